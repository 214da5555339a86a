//! Three-tangle feedback on pure three-qubit trajectories: the rotation is
//! chosen before the measurement to maximize the outcome-averaged tangle.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feedback::{grid_search, wrap_angle};
use crate::linalg::{c, CMat, CVec, HermitianEigen, ZERO};
use crate::noise::NoiseStream;
use crate::parallel::map_indexed;
use crate::protocols::{build_protocol, Method, OutputGrid, ProtocolConfig, RunOptions, SeriesAccumulator};
use crate::sme::povm_step_pure;
use crate::state::{Basis, FeedbackGenerator, ObservableSpec};

fn clip_tangle(t: f64) -> f64 {
    if t < 0.0 && t > -1e-10 {
        0.0
    } else if t > 1.0 && t < 1.0 + 1e-10 {
        1.0
    } else {
        t
    }
}

/// Reduced density matrix of the qubits in `keep` (ascending, 0 = A).
fn reduced(psi: &CVec, keep: &[usize]) -> CMat {
    let d = 1usize << keep.len();
    let mut rho = CMat::zeros(d, d);
    let bit = |i: usize, q: usize| (i >> (2 - q)) & 1;
    for i in 0..8 {
        for j in 0..8 {
            let traced_equal = (0..3).filter(|q| !keep.contains(q)).all(|q| bit(i, q) == bit(j, q));
            if !traced_equal {
                continue;
            }
            let ri = keep.iter().fold(0, |acc, &q| (acc << 1) | bit(i, q));
            let rj = keep.iter().fold(0, |acc, &q| (acc << 1) | bit(j, q));
            rho[(ri, rj)] += psi[i] * psi[j].conj();
        }
    }
    rho
}

/// Wootters concurrence of a two-qubit density matrix.
pub fn concurrence(rho: &CMat) -> f64 {
    let y = crate::linalg::pauli(crate::linalg::Axis::Y);
    let yy = y.kronecker(&y);
    let tilde = &yy * rho.map(|z| z.conj()) * &yy;
    let eig = HermitianEigen::new(rho);
    let sqrt_rho = eig.apply_fn(|w| c(w.max(0.0).sqrt(), 0.0));
    let r = &sqrt_rho * tilde * &sqrt_rho;
    let mut lam: Vec<f64> = HermitianEigen::new(&r).values.iter().map(|v| v.max(0.0).sqrt()).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    (lam[0] - lam[1] - lam[2] - lam[3]).max(0.0)
}

/// Residual tangle τ = 4 det ρ_A − C²(ρ_AB) − C²(ρ_AC).
pub fn three_tangle(psi: &CVec) -> f64 {
    let psi = psi.normalize();
    let ra = reduced(&psi, &[0]);
    let det = (ra[(0, 0)] * ra[(1, 1)] - ra[(0, 1)] * ra[(1, 0)]).re;
    let cab = concurrence(&reduced(&psi, &[0, 1]));
    let cac = concurrence(&reduced(&psi, &[0, 2]));
    clip_tangle(4.0 * det - cab * cab - cac * cac)
}

/// τ = 4|d1 − 2d2 + 4d3| from Cayley's hyperdeterminant of the amplitudes.
/// Assumes a normalized input.
pub fn three_tangle_hyperdet(a: &[Complex64]) -> f64 {
    let d1 = a[0] * a[0] * a[7] * a[7] + a[1] * a[1] * a[6] * a[6] + a[2] * a[2] * a[5] * a[5] + a[4] * a[4] * a[3] * a[3];
    let p07 = a[0] * a[7];
    let p34 = a[3] * a[4];
    let p25 = a[5] * a[2];
    let p16 = a[6] * a[1];
    let d2 = p07 * (p34 + p25 + p16) + p34 * (p25 + p16) + p25 * p16;
    let d3 = a[0] * a[6] * a[5] * a[3] + a[7] * a[1] * a[2] * a[4];
    clip_tangle(4.0 * (d1 - d2 * 2.0 + d3 * 4.0).norm())
}

/// τ of α|GHZ⟩ + β|φ⟩, φ the uniform superposition of the six strings
/// with mixed bits.
pub fn three_tangle_ghz_sym(alpha: Complex64, beta: Complex64) -> f64 {
    let a2 = alpha * alpha;
    let b2 = beta * beta;
    let v = a2 * a2 - a2 * b2 * 2.0 - b2 * b2 / 3.0 + alpha * b2 * beta * (8.0 / (3.0 * 3f64.sqrt()));
    clip_tangle(v.norm())
}

/// Probabilists' Gauss–Hermite rule (weights sum to 1) by Golub–Welsch.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = nalgebra::DMatrix::<f64>::zeros(order, order);
    for i in 1..order {
        let b = (i as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect())
}

/// Tangle of a state expressed in `basis` (full(3) or ghz-sym(3)).
pub fn tangle_in(basis: Basis, psi: &[Complex64]) -> f64 {
    match basis {
        Basis::GhzSym(3) => three_tangle_ghz_sym(psi[0], psi[1]),
        _ => three_tangle_hyperdet(psi),
    }
}

/// Outcome-averaged tangle for a fixed rotation angle. The outcome kernel
/// is a Gaussian mixture with one component per eigenvalue of X, so the
/// Kraus diagonals at the quadrature points are fixed for a given (X, k, dt).
#[derive(Debug, Clone)]
pub struct TangleObjective {
    pub basis: Basis,
    gen: FeedbackGenerator,
    /// Distinct eigenvalues of X and, per eigenvalue, the computational
    /// indices belonging to it (X is diagonal).
    components: Vec<Vec<usize>>,
    /// kernels[i][q][j]: Kraus diagonal at the q-th node of component i.
    kernels: Vec<Vec<Vec<f64>>>,
    weights: Vec<f64>,
}

impl TangleObjective {
    pub fn new(obs: &ObservableSpec, gen: &FeedbackGenerator, dt: f64, order: usize) -> Result<Self> {
        if !obs.diagonal {
            return Err(Error::Unsupported("tangle objective needs a diagonal observable".into()));
        }
        if order < 8 {
            return Err(Error::InvalidParam { key: "order", msg: "quadrature order must be at least 8".into() });
        }
        let lam = &obs.eigen.values;
        let mut distinct: Vec<f64> = Vec::new();
        let mut components: Vec<Vec<usize>> = Vec::new();
        for (j, &l) in lam.iter().enumerate() {
            match distinct.iter().position(|d| (d - l).abs() < 1e-9) {
                Some(i) => components[i].push(j),
                None => {
                    distinct.push(l);
                    components.push(vec![j]);
                }
            }
        }
        let (nodes, weights) = gauss_hermite(order);
        let sigma = (dt / (8.0 * obs.k)).sqrt();
        let kernels = distinct
            .iter()
            .map(|&li| {
                nodes
                    .iter()
                    .map(|z| {
                        let v = li + sigma * z / dt;
                        lam.iter().map(|&l| (-2.0 * obs.k * dt * (v - l) * (v - l)).exp()).collect()
                    })
                    .collect()
            })
            .collect();
        Ok(TangleObjective { basis: obs.basis, gen: gen.clone(), components, kernels, weights })
    }

    /// Coordinates of ψ in the eigenbasis of H_F, reused across angles.
    pub fn prepare(&self, psi: &CVec) -> CVec {
        self.gen.eigen.vectors.adjoint() * psi
    }

    pub fn rotated(&self, prepared: &CVec, theta: f64) -> CVec {
        let phased = CVec::from_fn(prepared.len(), |a, _| {
            prepared[a] * Complex64::from_polar(1.0, -theta * self.gen.eigen.values[a])
        });
        &self.gen.eigen.vectors * phased
    }

    pub fn value_rotated(&self, phi: &CVec) -> f64 {
        let n = phi.len();
        let mut buf = vec![ZERO; n];
        let mut total = 0.0;
        for (i, comp) in self.components.iter().enumerate() {
            let p: f64 = comp.iter().map(|&j| phi[j].norm_sqr()).sum();
            if p < 1e-15 {
                continue;
            }
            let mut acc = 0.0;
            for (q, kern) in self.kernels[i].iter().enumerate() {
                let mut nrm = 0.0;
                for j in 0..n {
                    buf[j] = phi[j] * kern[j];
                    nrm += buf[j].norm_sqr();
                }
                let inv = c(1.0 / nrm.sqrt(), 0.0);
                buf.iter_mut().for_each(|z| *z *= inv);
                acc += self.weights[q] * tangle_in(self.basis, &buf);
            }
            total += p * acc;
        }
        total
    }

    pub fn value(&self, psi: &CVec, theta: f64) -> f64 {
        self.value_rotated(&self.rotated(&self.prepare(psi), theta))
    }
}

/// ∫dV p(dV) τ(Ω_dV U_F(θ)ψ / ‖·‖) by Gauss–Hermite quadrature.
pub fn expected_tangle(
    psi: &CVec,
    theta: f64,
    obs: &ObservableSpec,
    gen: &FeedbackGenerator,
    dt: f64,
    order: usize,
) -> Result<f64> {
    Ok(TangleObjective::new(obs, gen, dt, order)?.value(psi, theta))
}

pub const TANGLE_GRID: usize = 128;
pub const TANGLE_ORDER: usize = 16;
pub const HISTOGRAM_BINS: usize = 50;
pub const SNAPSHOTS: usize = 20;

/// Rotate by the angle maximizing the expected tangle, then measure.
/// Returns the new state and the chosen angle in (−π/2, π/2].
pub fn tangle_step(
    psi: &CVec,
    objective: &TangleObjective,
    obs: &ObservableSpec,
    dt: f64,
    noise: &mut NoiseStream,
    grid: usize,
) -> Result<(CVec, f64)> {
    let prepared = objective.prepare(psi);
    let theta = grid_search(|t| objective.value_rotated(&objective.rotated(&prepared, t)), PI, grid, 1e-6);
    let phi = objective.rotated(&prepared, theta);
    let mean: f64 = (0..phi.len()).map(|j| obs.eigen.values[j] * phi[j].norm_sqr()).sum();
    let dv = mean * dt + noise.dw(dt) / (8.0 * obs.k).sqrt();
    Ok((povm_step_pure(&phi, obs, dt, dv)?, theta))
}

#[derive(Debug, Clone)]
pub struct AngleHistogram {
    pub time: f64,
    pub edges: Vec<f64>,
    pub frequency: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TangleStats {
    pub times: Vec<f64>,
    pub mean_tangle: Vec<f64>,
    pub sem_tangle: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub sem_fidelity: Vec<f64>,
    pub histograms: Vec<AngleHistogram>,
    pub n_traj: usize,
    pub aborted: Vec<(u64, String)>,
    pub min_tangle: f64,
    pub max_tangle: f64,
    pub max_norm_error: f64,
}

/// Decision steps at which angle histograms are taken.
pub fn snapshot_steps(n_steps: usize) -> Vec<usize> {
    (1..=SNAPSHOTS).map(|j| (j * n_steps / SNAPSHOTS).max(1) - 1).collect()
}

pub fn histogram_bin(theta: f64) -> usize {
    let t = theta.rem_euclid(PI);
    ((t / PI * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

struct TangleTrajectory {
    index: u64,
    tangle: Vec<f64>,
    fidelity: Vec<f64>,
    snapshot_bins: Vec<usize>,
    min_tangle: f64,
    max_tangle: f64,
    max_norm_error: f64,
    aborted: Option<String>,
}

pub fn run_tangle(config: &ProtocolConfig, opts: &RunOptions) -> Result<TangleStats> {
    if config.method != Method::Tangle {
        return Err(Error::InvalidParam { key: "protocol", msg: "expected the tangle method".into() });
    }
    let proto = build_protocol(config)?;
    let obs = &proto.ctx.obs;
    let objective = TangleObjective::new(obs, &proto.ctx.gen, config.dt, TANGLE_ORDER)?;
    // Pure initial state: the protocol's initial density matrix has rank one.
    let eig = HermitianEigen::new(&proto.initial);
    let psi0: CVec = eig.vectors.column(eig.values.len() - 1).into_owned();
    let target = proto.ctx.target.clone();
    let n_steps = config.n_steps();
    let grid = OutputGrid::new(n_steps, config.dt, opts.raw_steps);
    let snaps = snapshot_steps(n_steps);

    let run_one = |index: u64| -> TangleTrajectory {
        let mut noise = NoiseStream::new(config.master_seed, index);
        let mut psi = psi0.clone();
        let mut tr = TangleTrajectory {
            index,
            tangle: Vec::with_capacity(grid.steps.len()),
            fidelity: Vec::with_capacity(grid.steps.len()),
            snapshot_bins: Vec::with_capacity(SNAPSHOTS),
            min_tangle: f64::INFINITY,
            max_tangle: f64::NEG_INFINITY,
            max_norm_error: 0.0,
            aborted: None,
        };
        let mut next_out = 0;
        let mut next_snap = 0;
        for step in 0..=n_steps {
            if next_out < grid.steps.len() && grid.steps[next_out] == step {
                let tau = tangle_in(objective.basis, psi.as_slice());
                tr.min_tangle = tr.min_tangle.min(tau);
                tr.max_tangle = tr.max_tangle.max(tau);
                tr.tangle.push(tau);
                tr.fidelity.push(target.dotc(&psi).norm_sqr());
                tr.max_norm_error = tr.max_norm_error.max((psi.norm() - 1.0).abs());
                next_out += 1;
            }
            if step == n_steps {
                break;
            }
            match tangle_step(&psi, &objective, obs, config.dt, &mut noise, TANGLE_GRID) {
                Ok((next, theta)) => {
                    while next_snap < snaps.len() && snaps[next_snap] == step {
                        tr.snapshot_bins.push(histogram_bin(theta));
                        next_snap += 1;
                    }
                    psi = next;
                }
                Err(e) => {
                    tr.aborted = Some(format!("step {step}: {e}"));
                    return tr;
                }
            }
        }
        tr
    };

    let mut tau_acc = SeriesAccumulator::new(grid.steps.len());
    let mut fid_acc = SeriesAccumulator::new(grid.steps.len());
    let mut counts = vec![vec![0usize; HISTOGRAM_BINS]; SNAPSHOTS];
    let mut stats = TangleStats { times: grid.times(), min_tangle: f64::INFINITY, max_tangle: f64::NEG_INFINITY, ..Default::default() };
    let chunk = 256;
    for start in (0..config.n_traj).step_by(chunk) {
        let len = chunk.min(config.n_traj - start);
        let batch = map_indexed(len, opts.workers.max(1), |j| run_one((start + j) as u64));
        for tr in batch {
            if let Some(msg) = tr.aborted {
                stats.aborted.push((tr.index, msg));
                continue;
            }
            tau_acc.push(&tr.tangle);
            fid_acc.push(&tr.fidelity);
            for (s, &b) in tr.snapshot_bins.iter().enumerate() {
                counts[s][b] += 1;
            }
            stats.min_tangle = stats.min_tangle.min(tr.min_tangle);
            stats.max_tangle = stats.max_tangle.max(tr.max_tangle);
            stats.max_norm_error = stats.max_norm_error.max(tr.max_norm_error);
        }
    }
    let (mt, st) = tau_acc.finish();
    let (mf, sf) = fid_acc.finish();
    stats.mean_tangle = mt;
    stats.sem_tangle = st;
    stats.mean_fidelity = mf;
    stats.sem_fidelity = sf;
    stats.n_traj = tau_acc.count;
    let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|b| PI * b as f64 / HISTOGRAM_BINS as f64).collect();
    let n = tau_acc.count.max(1) as f64;
    stats.histograms = snaps
        .iter()
        .zip(&counts)
        .map(|(&s, cnt)| AngleHistogram {
            time: s as f64 * config.dt,
            edges: edges.clone(),
            frequency: cnt.iter().map(|&k| k as f64 / n).collect(),
        })
        .collect();
    Ok(stats)
}

/// Wrap an angle from a tangle decision to [0, π).
pub fn fold_angle(theta: f64) -> f64 {
    let w = wrap_angle(theta, PI);
    if w < 0.0 {
        w + PI
    } else {
        w
    }
}
