//! Named protocols: W, Dicke and GHZ preparation by trajectory feedback
//! (TEA), averaged-state schedules (ASLO), schedule replay and the
//! no-feedback baseline.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::feedback::{
    decide_feedback, grid_search, AngleLandscape, AnglePolicy, CoefficientOutcome, FeedbackContext, FeedbackMode,
    FeedbackOptions,
};
use crate::linalg::{c, outer, CMat, CVec, Axis, ONE};
use crate::noise::{NoiseStream, StepParams};
use crate::ops::{collective_operator, onebody_ghz_observable, two_body_zz_sum};
use crate::parallel::map_indexed;
use crate::sme::{aslo_channel_step, povm_step, readout};
use crate::state::{Basis, FeedbackGenerator, ObservableSpec};
use crate::symmetry::{
    build_ghz_sym_basis, dicke_collective_generators, dicke_vector, ghz_sym_isometry, ghz_sym_operators,
    project_operator,
};

/// Largest qubit count simulated in the full 2^N space.
pub const MAX_FULL_QUBITS: usize = 7;
/// Largest CSV row count without raw output.
pub const MAX_OUTPUT_ROWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    W,
    Dicke { excitation: usize },
    Ghz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    Symmetric,
    OneBodyNonSym,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tea,
    Aslo,
    Baseline,
    Tangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Auto,
    Full,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub target: Target,
    pub observable: ObservableKind,
    pub method: Method,
    pub n_qubits: usize,
    pub k: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_traj: usize,
    pub master_seed: u64,
    pub representation: Representation,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::W => write!(f, "w"),
            Target::Dicke { excitation } => write!(f, "dicke({excitation})"),
            Target::Ghz => write!(f, "ghz"),
        }
    }
}

impl ProtocolConfig {
    pub fn new(target: Target, method: Method, n_qubits: usize) -> Self {
        ProtocolConfig {
            target,
            observable: ObservableKind::Symmetric,
            method,
            n_qubits,
            k: 1.0,
            dt: 1e-3,
            t_final: 3.0,
            n_traj: 1000,
            master_seed: 1,
            representation: Representation::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        StepParams::new(self.dt, self.k)?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParam { key: "t_final", msg: "must be positive".into() });
        }
        let n = self.n_qubits;
        if n == 0 {
            return Err(Error::InvalidParam { key: "n_qubits", msg: "must be at least 1".into() });
        }
        match self.target {
            Target::Dicke { excitation } if excitation > n => {
                return Err(Error::InvalidParam {
                    key: "excitation",
                    msg: format!("must lie in [0, {n}], got {excitation}"),
                })
            }
            Target::Ghz if n < 2 => {
                return Err(Error::InvalidParam { key: "n_qubits", msg: "GHZ targets need at least 2 qubits".into() })
            }
            _ => {}
        }
        if self.observable == ObservableKind::OneBodyNonSym && !(self.target == Target::Ghz && n == 3) {
            return Err(Error::InvalidParam {
                key: "observable",
                msg: "onebody-nonsym is only defined for ghz with 3 qubits".into(),
            });
        }
        if self.method == Method::Tangle && !(self.target == Target::Ghz && n == 3) {
            return Err(Error::InvalidParam { key: "target", msg: "the tangle protocol needs ghz with 3 qubits".into() });
        }
        if matches!(self.method, Method::Tea | Method::Baseline | Method::Tangle) && self.n_traj == 0 {
            return Err(Error::InvalidParam { key: "n_traj", msg: "must be at least 1".into() });
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn excitation(&self) -> Option<usize> {
        match self.target {
            Target::W => Some(1),
            Target::Dicke { excitation } => Some(excitation),
            Target::Ghz => None,
        }
    }

    /// Basis the protocol runs in.
    pub fn resolved_basis(&self) -> Result<Basis> {
        let n = self.n_qubits;
        let full = || {
            if n > MAX_FULL_QUBITS {
                Err(Error::InvalidParam {
                    key: "representation",
                    msg: format!("full representation is limited to {MAX_FULL_QUBITS} qubits"),
                })
            } else {
                Ok(Basis::Full(n))
            }
        };
        match (self.target, self.observable, self.representation) {
            (_, _, Representation::Full) => full(),
            (Target::Ghz, ObservableKind::OneBodyNonSym, Representation::Auto) => full(),
            (Target::Ghz, ObservableKind::OneBodyNonSym, Representation::Symmetric) => {
                // Surface the leak diagnostic from the projection itself.
                let basis = build_ghz_sym_basis(n)?;
                project_operator(&onebody_ghz_observable(), &basis)?;
                Err(Error::Unsupported("onebody observable cannot be projected".into()))
            }
            (Target::Ghz, _, _) => Ok(Basis::GhzSym(n)),
            (_, _, _) => Ok(Basis::Dicke(n)),
        }
    }

    /// Hash of everything that determines an averaged-state schedule.
    pub fn fingerprint(&self) -> String {
        let basis = self.resolved_basis().map(|b| b.to_string()).unwrap_or_else(|_| "invalid".into());
        let obs = match self.observable {
            ObservableKind::Symmetric => "symmetric",
            ObservableKind::OneBodyNonSym => "onebody-nonsym",
        };
        let canonical = format!(
            "target={};n={};observable={};basis={};k={:e};dt={:e};t_final={:e}",
            self.target, self.n_qubits, obs, basis, self.k, self.dt, self.t_final
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Operators, initial state and angle policy of a configured protocol.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub basis: Basis,
    pub ctx: FeedbackContext,
    pub initial: CMat,
    pub policy: AnglePolicy,
    /// Angle of the initial global rotation.
    pub prerotation: f64,
}

impl Protocol {
    pub fn feedback_options(&self) -> FeedbackOptions {
        FeedbackOptions { policy: self.policy, ..FeedbackOptions::default() }
    }

    pub fn rotate(&self, rho: &CMat, theta: f64) -> CMat {
        if theta == 0.0 {
            return rho.clone();
        }
        let u = self.ctx.gen.unitary(theta);
        let mut out = &u * rho * u.adjoint();
        crate::linalg::hermitize(&mut out);
        out
    }

    pub fn fidelity(&self, rho: &CMat) -> f64 {
        self.ctx.fidelity(rho)
    }
}

fn basis_vector(dim: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[i] = ONE;
    v
}

/// |+⟩^⊗N expressed in GHZ-symmetric coordinates.
pub fn full_superposition_ghz_sym(n: usize) -> CVec {
    let dicke = CVec::from_fn(n + 1, |k, _| {
        let log_binom: f64 = (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum();
        c((0.5 * log_binom - 0.5 * n as f64 * 2f64.ln()).exp(), 0.0)
    });
    ghz_sym_isometry(n).adjoint() * dicke
}

pub fn build_protocol(config: &ProtocolConfig) -> Result<Protocol> {
    config.validate()?;
    let n = config.n_qubits;
    let basis = config.resolved_basis()?;
    let dim = basis.dim();
    let half = c(0.5, 0.0);
    let (x, h, target, initial, policy) = match (config.target, basis) {
        (Target::W | Target::Dicke { .. }, Basis::Dicke(_)) => {
            let kx = config.excitation().unwrap();
            let (jz, jy, _) = dicke_collective_generators(n);
            (jz, jy * half, basis_vector(dim, kx), basis_vector(dim, 0), AnglePolicy::Local)
        }
        (Target::W | Target::Dicke { .. }, Basis::Full(_)) => {
            let kx = config.excitation().unwrap();
            let x = collective_operator(n, Axis::Z)?;
            let h = collective_operator(n, Axis::Y)? * half;
            (x, h, dicke_vector(n, kx), basis_vector(dim, 0), AnglePolicy::Local)
        }
        (Target::Ghz, Basis::GhzSym(_)) => {
            let (zz, sx) = ghz_sym_operators(n);
            (zz, sx * half, basis_vector(dim, 0), full_superposition_ghz_sym(n), AnglePolicy::GhzCandidates)
        }
        (Target::Ghz, Basis::Full(_)) => {
            let (x, policy) = match config.observable {
                ObservableKind::Symmetric => (two_body_zz_sum(n)?, AnglePolicy::GhzCandidates),
                ObservableKind::OneBodyNonSym => (onebody_ghz_observable(), AnglePolicy::Local),
            };
            let h = collective_operator(n, Axis::X)? * half;
            let mut ghz = CVec::zeros(dim);
            ghz[0] = c(0.5f64.sqrt(), 0.0);
            ghz[dim - 1] = c(0.5f64.sqrt(), 0.0);
            let plus = CVec::from_element(dim, c(1.0 / (dim as f64).sqrt(), 0.0));
            (x, h, ghz, plus, policy)
        }
        _ => return Err(Error::Unsupported(format!("no protocol for {} in {basis}", config.target))),
    };
    let obs = ObservableSpec::new(x, config.k, basis)?;
    let gen = FeedbackGenerator::traceless(h, basis)?;
    let ctx = FeedbackContext::new(gen, obs, target);
    let rho0 = outer(&initial);
    let land = AngleLandscape::new(&ctx, &rho0);
    // The tangle is invariant under the feedback rotation, so that protocol
    // starts from the unrotated state.
    let prerotation = if land.commutator_norm < 1e-12 || config.method == Method::Tangle {
        0.0
    } else {
        let coarse = grid_search(|t| land.value(t), land.period, 2048, 1e-12);
        land.polish(coarse, 50)
    };
    let mut proto = Protocol { basis, ctx, initial: rho0, policy, prerotation };
    proto.initial = proto.rotate(&proto.initial, prerotation);
    Ok(proto)
}

/// Step indices at which ensemble statistics are recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrid {
    pub steps: Vec<usize>,
    pub dt: f64,
}

impl OutputGrid {
    pub fn new(n_steps: usize, dt: f64, raw: bool) -> Self {
        let stride = if raw { 1 } else { n_steps.div_ceil(MAX_OUTPUT_ROWS - 1).max(1) };
        let mut steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
        if *steps.last().unwrap() != n_steps {
            steps.push(n_steps);
        }
        OutputGrid { steps, dt }
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|&s| s as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: usize,
    /// Record every output step instead of at most 2000 rows.
    pub raw_steps: bool,
    /// Keep every feedback angle of every trajectory.
    pub record_angles: bool,
    /// Keep the per-trajectory fidelity series.
    pub keep_series: bool,
    pub feedback: Option<FeedbackOptions>,
}

impl RunOptions {
    pub fn with_workers(workers: usize) -> Self {
        RunOptions { workers, ..RunOptions::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryResult {
    pub index: u64,
    /// Fidelity on the output grid.
    pub fidelity: Vec<f64>,
    pub thetas: Vec<f64>,
    pub large_angle_events: usize,
    pub skip_events: usize,
    pub aborted: Option<String>,
}

impl TrajectoryResult {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity.last().unwrap_or(&f64::NAN)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub sem: Vec<f64>,
    /// Fraction of trajectories with at least one large-angle decision.
    pub large_angle_fraction: f64,
    pub n_traj: usize,
    pub aborted: Vec<(u64, String)>,
    pub final_fidelity: Vec<f64>,
    pub trajectories: Vec<TrajectoryResult>,
}

/// Running column sums, fed in trajectory-index order so that the result
/// does not depend on the worker count.
#[derive(Debug, Clone)]
pub struct SeriesAccumulator {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    pub count: usize,
}

impl SeriesAccumulator {
    pub fn new(len: usize) -> Self {
        SeriesAccumulator { sum: vec![0.0; len], sumsq: vec![0.0; len], count: 0 }
    }

    pub fn push(&mut self, row: &[f64]) {
        for ((s, q), v) in self.sum.iter_mut().zip(self.sumsq.iter_mut()).zip(row) {
            *s += v;
            *q += v * v;
        }
        self.count += 1;
    }

    /// Mean and standard error (sample standard deviation / √n).
    pub fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.count as f64;
        if self.count == 0 {
            return (vec![0.0; self.sum.len()], vec![0.0; self.sum.len()]);
        }
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let sem = if self.count < 2 {
            vec![0.0; self.sum.len()]
        } else {
            self.sumsq
                .iter()
                .zip(&mean)
                .map(|(q, m)| (((q - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt())
                .collect()
        };
        (mean, sem)
    }
}

/// Trajectories evaluated per parallel batch.
const CHUNK: usize = 512;

/// How the feedback angle of each cycle is obtained.
enum Controller<'a> {
    None,
    Locally(FeedbackOptions),
    Schedule { a1: &'a [f64], a2: &'a [f64], mean_y: &'a [f64] },
}

fn run_trajectory(
    proto: &Protocol,
    config: &ProtocolConfig,
    grid: &OutputGrid,
    index: u64,
    controller: &Controller,
    record_angles: bool,
) -> TrajectoryResult {
    let obs = &proto.ctx.obs;
    let dt = config.dt;
    let n_steps = config.n_steps();
    let mut noise = NoiseStream::new(config.master_seed, index);
    let mut rho = proto.initial.clone();
    let mut res = TrajectoryResult { index, ..Default::default() };
    res.fidelity.reserve(grid.steps.len());
    let mut next_out = 0;
    for step in 0..=n_steps {
        if next_out < grid.steps.len() && grid.steps[next_out] == step {
            res.fidelity.push(proto.fidelity(&rho));
            next_out += 1;
        }
        if step == n_steps {
            break;
        }
        let dw = noise.dw(dt);
        let dv = readout(&rho, obs, dt, dw);
        let post = match povm_step(&rho, obs, dt, dv) {
            Ok(r) => r,
            Err(e) => {
                res.aborted = Some(format!("step {step}: {e}"));
                return res;
            }
        };
        let theta = match controller {
            Controller::None => 0.0,
            Controller::Locally(opts) => {
                let d = decide_feedback(&proto.ctx, &rho, &post, dw, dt, opts);
                match d.mode {
                    FeedbackMode::LargeAngle => res.large_angle_events += 1,
                    FeedbackMode::SkipCommuting => res.skip_events += 1,
                    FeedbackMode::Infinitesimal => {}
                }
                d.theta
            }
            Controller::Schedule { a1, a2, mean_y } => {
                crate::feedback::optimal_angle_from_dv(a1[step], a2[step], dv, dt, mean_y[step], obs.k)
            }
        };
        if record_angles {
            res.thetas.push(theta);
        }
        rho = proto.rotate(&post, theta);
    }
    res
}

fn run_ensemble(config: &ProtocolConfig, opts: &RunOptions, proto: &Protocol, controller: &Controller) -> EnsembleStats {
    let grid = OutputGrid::new(config.n_steps(), config.dt, opts.raw_steps);
    let mut acc = SeriesAccumulator::new(grid.steps.len());
    let mut stats = EnsembleStats { times: grid.times(), ..Default::default() };
    let mut large = 0usize;
    for start in (0..config.n_traj).step_by(CHUNK) {
        let len = CHUNK.min(config.n_traj - start);
        let batch = map_indexed(len, opts.workers.max(1), |j| {
            run_trajectory(proto, config, &grid, (start + j) as u64, controller, opts.record_angles)
        });
        for mut r in batch {
            match &r.aborted {
                Some(msg) => stats.aborted.push((r.index, msg.clone())),
                None => {
                    acc.push(&r.fidelity);
                    stats.final_fidelity.push(r.final_fidelity());
                    if r.large_angle_events > 0 {
                        large += 1;
                    }
                }
            }
            if opts.keep_series || opts.record_angles {
                if !opts.keep_series {
                    r.fidelity = Vec::new();
                }
                stats.trajectories.push(r);
            }
        }
    }
    let (mean, sem) = acc.finish();
    stats.mean_fidelity = mean;
    stats.sem = sem;
    stats.n_traj = acc.count;
    stats.large_angle_fraction = if acc.count == 0 { 0.0 } else { large as f64 / acc.count as f64 };
    stats
}

/// Trajectory-ensemble feedback: each trajectory computes its own angles.
pub fn run_tea(config: &ProtocolConfig, opts: &RunOptions) -> Result<EnsembleStats> {
    let proto = build_protocol(config)?;
    let fb = opts.feedback.unwrap_or_else(|| proto.feedback_options());
    Ok(run_ensemble(config, opts, &proto, &Controller::Locally(fb)))
}

/// Pre-rotation followed by measurement only.
pub fn run_baseline(config: &ProtocolConfig, opts: &RunOptions) -> Result<EnsembleStats> {
    let proto = build_protocol(config)?;
    Ok(run_ensemble(config, opts, &proto, &Controller::None))
}

/// Per-step coefficients of a Markovian feedback law θ = A1 dW + A2 dt.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSchedule {
    pub times: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub fingerprint: String,
}

impl FeedbackSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.a1.len() != self.times.len() || self.a2.len() != self.times.len() {
            return Err(Error::ScheduleMismatch("column lengths differ".into()));
        }
        if self.a1.iter().chain(&self.a2).chain(&self.times).any(|v| !v.is_finite()) {
            return Err(Error::ScheduleMismatch("non-finite entry".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ScheduleMismatch("times are not strictly ascending".into()));
        }
        Ok(())
    }

    pub fn max_abs_a2(&self) -> f64 {
        self.a2.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct AsloRun {
    /// Fidelity of the averaged state; sem is zero.
    pub stats: EnsembleStats,
    pub schedule: FeedbackSchedule,
    /// Largest extremality residual met along the path.
    pub max_abs_g0: f64,
    pub final_state: CMat,
}

/// (A1, A2) for the averaged state, with the restoring angle folded into A2.
fn averaged_coefficients(proto: &Protocol, rho: &CMat, dt: f64, opts: &FeedbackOptions) -> (f64, f64, f64) {
    let global = |rho: &CMat| {
        let land = AngleLandscape::new(&proto.ctx, rho);
        grid_search(|t| land.value(t), land.period, opts.grid, 1e-10) / dt
    };
    match proto.ctx.coefficients(rho) {
        CoefficientOutcome::Regular(co) => {
            if co.g0.abs() <= opts.tol_ext {
                return (co.a1, co.a2, co.g0);
            }
            let restoring = co.g0 / co.den;
            if restoring.abs() > opts.max_restoring {
                (0.0, global(rho), co.g0)
            } else {
                (co.a1, co.a2 + restoring / dt, co.g0)
            }
        }
        CoefficientOutcome::Commuting => (0.0, 0.0, 0.0),
        CoefficientOutcome::Singular => (0.0, global(rho), 0.0),
    }
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Positivity { min_eig, .. } => Error::Positivity { step, min_eig },
        other => other,
    }
}

/// Deterministic evolution of the measurement-averaged state under its own
/// locally optimal coefficients; emits the schedule.
pub fn run_aslo(config: &ProtocolConfig, opts: &RunOptions) -> Result<AsloRun> {
    let proto = build_protocol(config)?;
    let fb = opts.feedback.unwrap_or_else(|| proto.feedback_options());
    let n_steps = config.n_steps();
    let dt = config.dt;
    let grid = OutputGrid::new(n_steps, dt, opts.raw_steps);
    let mut rho = proto.initial.clone();
    let mut fid = Vec::with_capacity(grid.steps.len());
    let mut schedule = FeedbackSchedule {
        times: Vec::with_capacity(n_steps),
        a1: Vec::with_capacity(n_steps),
        a2: Vec::with_capacity(n_steps),
        fingerprint: config.fingerprint(),
    };
    let mut max_g0: f64 = 0.0;
    let mut next_out = 0;
    for step in 0..=n_steps {
        if next_out < grid.steps.len() && grid.steps[next_out] == step {
            fid.push(proto.fidelity(&rho));
            next_out += 1;
        }
        if step == n_steps {
            break;
        }
        let (a1, a2, g0) = averaged_coefficients(&proto, &rho, dt, &fb);
        max_g0 = max_g0.max(g0.abs());
        schedule.times.push(step as f64 * dt);
        schedule.a1.push(a1);
        schedule.a2.push(a2);
        rho = aslo_channel_step(&rho, &proto.ctx.obs, &proto.ctx.gen, a1, a2, dt).map_err(|e| at_step(e, step))?;
    }
    let stats = EnsembleStats {
        times: grid.times(),
        sem: vec![0.0; fid.len()],
        final_fidelity: vec![*fid.last().unwrap()],
        mean_fidelity: fid,
        n_traj: 1,
        ..Default::default()
    };
    Ok(AsloRun { stats, schedule, max_abs_g0: max_g0, final_state: rho })
}

/// ⟨Y⟩ of the averaged state driven by `schedule`, one entry per step.
pub fn schedule_mean_y(proto: &Protocol, schedule: &FeedbackSchedule, dt: f64) -> Result<Vec<f64>> {
    let scale = (2.0 * proto.ctx.obs.k).sqrt();
    let mut rho = proto.initial.clone();
    let mut out = Vec::with_capacity(schedule.times.len());
    for step in 0..schedule.times.len() {
        out.push(scale * proto.ctx.obs.mean(&rho));
        rho = aslo_channel_step(&rho, &proto.ctx.obs, &proto.ctx.gen, schedule.a1[step], schedule.a2[step], dt)
            .map_err(|e| at_step(e, step))?;
    }
    Ok(out)
}

/// Apply a precomputed schedule to stochastic trajectories. The angle is a
/// function of the measured signal only: θ = √(8k)A1 dV + (A2 − 2A1⟨Y⟩)dt
/// with ⟨Y⟩ taken from the averaged state, so the ensemble mean follows the
/// averaged evolution that produced the schedule.
pub fn replay_schedule(schedule: &FeedbackSchedule, config: &ProtocolConfig, opts: &RunOptions) -> Result<EnsembleStats> {
    schedule.validate()?;
    if schedule.fingerprint != config.fingerprint() {
        return Err(Error::ScheduleMismatch(format!(
            "fingerprint {} does not match configuration {}",
            schedule.fingerprint,
            config.fingerprint()
        )));
    }
    let n_steps = config.n_steps();
    if schedule.times.len() != n_steps {
        return Err(Error::ScheduleMismatch(format!("{} rows for {} steps", schedule.times.len(), n_steps)));
    }
    if let Some(step) = (0..n_steps).find(|&s| (schedule.times[s] - s as f64 * config.dt).abs() > 1e-9 * (1.0 + config.t_final)) {
        return Err(Error::ScheduleMismatch(format!("time grid differs at row {step}")));
    }
    let proto = build_protocol(config)?;
    let mean_y = schedule_mean_y(&proto, schedule, config.dt)?;
    let controller = Controller::Schedule { a1: &schedule.a1, a2: &schedule.a2, mean_y: &mean_y };
    Ok(run_ensemble(config, opts, &proto, &controller))
}
