//! Locally optimal feedback angles: closed-form coefficients, the
//! second-derivative safeguard and the global fallback search.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::linalg::{c, CMat, CVec, ZERO};
use crate::state::{FeedbackGenerator, ObservableSpec};

/// Coefficients of θ* = A1 dW + A2 dt for a state ρ_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a1: f64,
    pub a2: f64,
    /// ⟨T|[H,[H,ρ]]|T⟩ = −F''(0).
    pub den: f64,
    /// −i⟨T|[H,ρ]|T⟩ = F'(0), the extremality residual.
    pub g0: f64,
    /// ⟨Y⟩ on ρ_t.
    pub mean_y: f64,
    /// Largest imaginary part discarded from A1, A2.
    pub imag_residue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientOutcome {
    Regular(Coefficients),
    /// Denominator vanishes although [H_F, ρ] ≠ 0.
    Singular,
    /// [H_F, ρ] = 0.
    Commuting,
}

/// Everything about (H_F, X, k, target) that does not depend on the state.
#[derive(Debug, Clone)]
pub struct FeedbackContext {
    pub gen: FeedbackGenerator,
    pub obs: ObservableSpec,
    pub target: CVec,
    /// Columns t, Ht, H²t, H³t, Yt, YHt, YH²t, Y²t, Y²Ht.
    probes: CMat,
    /// Target in the eigenbasis of H_F.
    target_h: CVec,
}

const T: usize = 0;
const HT: usize = 1;
const H2T: usize = 2;
const H3T: usize = 3;
const YT: usize = 4;
const YHT: usize = 5;
const YH2T: usize = 6;
const Y2T: usize = 7;
const Y2HT: usize = 8;

impl FeedbackContext {
    pub fn new(gen: FeedbackGenerator, obs: ObservableSpec, target: CVec) -> Self {
        let h = &gen.h;
        let y = obs.y();
        let t = target.clone();
        let ht = h * &t;
        let h2t = h * &ht;
        let h3t = h * &h2t;
        let yt = &y * &t;
        let yht = &y * &ht;
        let yh2t = &y * &h2t;
        let y2t = &y * &yt;
        let y2ht = &y * &yht;
        let probes = CMat::from_columns(&[t, ht, h2t, h3t, yt, yht, yh2t, y2t, y2ht]);
        let target_h = gen.eigen.vectors.adjoint() * &target;
        FeedbackContext { gen, obs, target, probes, target_h }
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// Coefficients on ρ_t. A1 and A2 use the innovation H[Y]ρ so that
    /// θ* = A1 dW + A2 dt holds for the Ito-expanded fidelity.
    pub fn coefficients(&self, rho: &CMat) -> CoefficientOutcome {
        let rp = rho * &self.probes;
        // z(a, b) = probe_a† ρ probe_b.
        let z = |a: usize, b: usize| -> Complex64 { self.probes.column(a).dotc(&rp.column(b)) };
        let den = (z(H2T, T) - z(HT, HT) * 2.0 + z(T, H2T)).re;
        if den.abs() < 1e-12 {
            let h = &self.gen.h;
            let comm = crate::linalg::max_abs(&(h * rho - rho * h));
            return if comm < 1e-12 { CoefficientOutcome::Commuting } else { CoefficientOutcome::Singular };
        }
        let c_rho = z(HT, T) - z(T, HT);
        let g0 = (-Complex64::i() * c_rho).re;
        let mean_y = self.obs.mean(rho) * (2.0 * self.obs.k).sqrt();

        // c(A) = ⟨T|[H,A]|T⟩ and cc(A) = ⟨T|[H,[H,A]]|T⟩ for the pieces of H[Y]ρ.
        let c_hy = z(YHT, T) - z(YT, HT) + z(HT, YT) - z(T, YHT) - c_rho * (2.0 * mean_y);
        let cc_hy = z(YH2T, T) - z(YHT, HT) * 2.0 + z(YT, H2T) + z(H2T, YT) - z(HT, YHT) * 2.0
            + z(T, YH2T)
            - c(2.0 * mean_y * den, 0.0);
        let c_dy = (z(YHT, YT) - z(YT, YHT)) - (z(Y2HT, T) - z(Y2T, HT)) * 0.5 - (z(HT, Y2T) - z(T, Y2HT)) * 0.5;
        let ccc = z(H3T, T) - z(H2T, HT) * 3.0 + z(HT, H2T) * 3.0 - z(T, H3T);
        let c_dh = ccc * -0.5;

        let i = Complex64::i();
        let a1c = -i * c_hy / den;
        let a1 = a1c.re;
        let a2c = -(i * c_dy + cc_hy * a1 + i * c_dh * (a1 * a1)) / den;
        CoefficientOutcome::Regular(Coefficients {
            a1,
            a2: a2c.re,
            den,
            g0,
            mean_y,
            imag_residue: a1c.im.abs().max(a2c.im.abs()),
        })
    }

    /// −⟨T|[H,[H,ρ]]|T⟩.
    pub fn second_derivative(&self, rho: &CMat) -> f64 {
        let t = self.probes.column(T);
        let h = self.probes.column(HT);
        let h2 = self.probes.column(H2T);
        let rt = rho * t;
        let rh = rho * h;
        -(h2.dotc(&rt) - h.dotc(&rh) * 2.0 + t.dotc(&(rho * h2))).re
    }

    pub fn fidelity(&self, rho: &CMat) -> f64 {
        crate::state::fidelity_raw(rho, &self.target)
    }
}

/// A1, A2 for explicit operators, building a throwaway context.
pub fn compute_coefficients(
    rho: &CMat,
    gen: &FeedbackGenerator,
    obs: &ObservableSpec,
    target: &CVec,
) -> CoefficientOutcome {
    FeedbackContext::new(gen.clone(), obs.clone(), target.clone()).coefficients(rho)
}

/// −⟨T|[H_F,[H_F,ρ^c]]|T⟩.
pub fn second_derivative_test(rho_c: &CMat, gen: &FeedbackGenerator, target: &CVec) -> f64 {
    let h = &gen.h;
    let hr = h * rho_c - rho_c * h;
    let hhr = h * &hr - &hr * h;
    -target.dotc(&(hhr * target)).re
}

/// θ = A1 dW + A2 dt.
pub fn optimal_angle(a1: f64, a2: f64, dw: f64, dt: f64) -> f64 {
    a1 * dw + a2 * dt
}

/// θ = √(8k) A1 dV + (A2 − 2A1⟨Y⟩) dt with ⟨Y⟩ on the pre-measurement state.
pub fn optimal_angle_from_dv(a1: f64, a2: f64, dv: f64, dt: f64, mean_y: f64, k: f64) -> f64 {
    (8.0 * k).sqrt() * a1 * dv + (a2 - 2.0 * a1 * mean_y) * dt
}

/// F(θ) = ⟨T|U(θ)ρU(θ)†|T⟩ for a fixed ρ, evaluated in the eigenbasis of H_F
/// as Σ_ab m_ab exp(−iθ(w_a − w_b)).
#[derive(Debug, Clone)]
pub struct AngleLandscape {
    terms: Vec<(f64, Complex64)>,
    pub commutator_norm: f64,
    pub period: f64,
}

impl AngleLandscape {
    pub fn new(ctx: &FeedbackContext, rho: &CMat) -> Self {
        let v = &ctx.gen.eigen.vectors;
        let w = &ctx.gen.eigen.values;
        let rt = v.adjoint() * rho * v;
        let t = &ctx.target_h;
        let n = rt.nrows();
        let mut terms: Vec<(f64, Complex64)> = Vec::with_capacity(n * n);
        let mut comm: f64 = 0.0;
        let mut half_turn: f64 = 0.0;
        for b in 0..n {
            for a in 0..n {
                let delta = w[a] - w[b];
                let r = rt[(a, b)];
                comm = comm.max((r * delta).norm());
                half_turn = half_turn.max((r * (Complex64::from_polar(1.0, -PI * delta) - 1.0)).norm());
                let m = t[a].conj() * r * t[b];
                if m != ZERO {
                    match terms.iter_mut().find(|(d, _)| (d - delta).abs() < 1e-12) {
                        Some(entry) => entry.1 += m,
                        None => terms.push((delta, m)),
                    }
                }
            }
        }
        let period = if half_turn < 1e-10 { PI } else { 2.0 * PI };
        AngleLandscape { terms, commutator_norm: comm, period }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.terms.iter().map(|(d, m)| (m * Complex64::from_polar(1.0, -theta * d)).re).sum()
    }

    pub fn first(&self, theta: f64) -> f64 {
        self.terms
            .iter()
            .map(|(d, m)| (m * Complex64::new(0.0, -d) * Complex64::from_polar(1.0, -theta * d)).re)
            .sum()
    }

    pub fn second(&self, theta: f64) -> f64 {
        self.terms.iter().map(|(d, m)| -(d * d) * (m * Complex64::from_polar(1.0, -theta * d)).re).sum()
    }

    /// Newton iterations on F' from `theta`, kept only while F improves.
    pub fn polish(&self, mut theta: f64, iters: usize) -> f64 {
        for _ in 0..iters {
            let f2 = self.second(theta);
            if !(f2 < 0.0) {
                break;
            }
            let next = theta - self.first(theta) / f2;
            if self.value(next) < self.value(theta) {
                break;
            }
            theta = next;
        }
        theta
    }
}

/// Wrap into (−P/2, P/2].
pub fn wrap_angle(theta: f64, period: f64) -> f64 {
    let mut t = theta.rem_euclid(period);
    if t > period / 2.0 {
        t -= period;
    }
    t
}

/// Maximize `f` on [a, b] by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    (a + b) / 2.0
}

/// Grid scan of `f` over one period, ties broken toward the smallest |θ|,
/// then golden-section refinement around the winner. Returns θ wrapped
/// into (−P/2, P/2].
pub fn grid_search(f: impl Fn(f64) -> f64, period: f64, resolution: usize, tol: f64) -> f64 {
    let step = period / resolution as f64;
    let vals: Vec<(f64, f64)> = (0..resolution)
        .map(|i| {
            let th = wrap_angle(i as f64 * step, period);
            (th, f(th))
        })
        .collect();
    let best = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let (theta0, f0) = vals
        .iter()
        .filter(|v| v.1 >= best - 1e-12)
        .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
        .copied()
        .unwrap();
    let refined = golden_section_max(&f, theta0 - step, theta0 + step, tol);
    if f(refined) > f0 + 1e-12 {
        wrap_angle(refined, period)
    } else {
        theta0
    }
}

/// Argmax over one period of F(θ) = ⟨T|U(θ)ρU(θ)†|T⟩.
pub fn global_angle_search(ctx: &FeedbackContext, rho: &CMat, resolution: usize) -> f64 {
    let land = AngleLandscape::new(ctx, rho);
    grid_search(|t| land.value(t), land.period, resolution, 1e-10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackMode {
    Infinitesimal,
    LargeAngle,
    SkipCommuting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnglePolicy {
    /// Closed-form small angle with second-derivative check and global fallback.
    Local,
    /// Compare θ ∈ {0, π/2} directly, falling back to the grid.
    GhzCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackOptions {
    pub policy: AnglePolicy,
    /// Extremality residual |F'(0)| above which the restoring angle F'(0)/den is added.
    pub tol_ext: f64,
    /// Restoring angles beyond this are not treated as small.
    pub max_restoring: f64,
    pub grid: usize,
    /// Compare every accepted small angle against a global search.
    pub global_check: bool,
}

impl Default for FeedbackOptions {
    fn default() -> Self {
        FeedbackOptions {
            policy: AnglePolicy::Local,
            tol_ext: 1e-6,
            max_restoring: 0.1,
            grid: 256,
            global_check: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackDecision {
    pub theta: f64,
    pub a1: f64,
    pub a2: f64,
    pub mode: FeedbackMode,
    pub second_derivative: f64,
}

fn large_angle(land: &AngleLandscape, theta: f64) -> FeedbackDecision {
    FeedbackDecision { theta, a1: 0.0, a2: 0.0, mode: FeedbackMode::LargeAngle, second_derivative: land.second(theta) }
}

fn global(land: &AngleLandscape, opts: &FeedbackOptions) -> FeedbackDecision {
    large_angle(land, grid_search(|t| land.value(t), land.period, opts.grid, 1e-10))
}

/// Choose the feedback angle for one measure-then-rotate cycle.
/// `rho_pre` is ρ_t (coefficients), `rho_post` the post-measurement state
/// the rotation acts on.
pub fn decide_feedback(
    ctx: &FeedbackContext,
    rho_pre: &CMat,
    rho_post: &CMat,
    dw: f64,
    dt: f64,
    opts: &FeedbackOptions,
) -> FeedbackDecision {
    let land = AngleLandscape::new(ctx, rho_post);
    if land.commutator_norm < 1e-12 {
        return FeedbackDecision { theta: 0.0, a1: 0.0, a2: 0.0, mode: FeedbackMode::SkipCommuting, second_derivative: 0.0 };
    }
    if opts.policy == AnglePolicy::GhzCandidates {
        let cands = [0.0, PI / 2.0];
        let best = cands
            .iter()
            .filter(|&&t| land.second(t) < 0.0)
            .fold(None::<f64>, |acc, &t| match acc {
                Some(b) if land.value(b) >= land.value(t) => Some(b),
                _ => Some(t),
            });
        return match best {
            Some(t) => large_angle(&land, t),
            None => global(&land, opts),
        };
    }
    let coeffs = match ctx.coefficients(rho_pre) {
        CoefficientOutcome::Regular(c) => c,
        _ => return global(&land, opts),
    };
    let mut a2 = coeffs.a2;
    if coeffs.g0.abs() > opts.tol_ext {
        let restoring = coeffs.g0 / coeffs.den;
        if restoring.abs() > opts.max_restoring {
            return global(&land, opts);
        }
        a2 += restoring / dt;
    }
    let mut theta = optimal_angle(coeffs.a1, a2, dw, dt);
    let mut f2 = land.second(theta);
    if !(f2 < 0.0) {
        return global(&land, opts);
    }
    if land.value(theta) < land.value(0.0) - 1e-12 {
        // Higher-order terms moved the maximum; follow it within the same basin.
        theta = land.polish(theta, 8);
        if land.value(theta) < land.value(0.0) - 1e-12 || !(land.second(theta) < 0.0) {
            return global(&land, opts);
        }
        a2 = (theta - coeffs.a1 * dw) / dt;
        theta = optimal_angle(coeffs.a1, a2, dw, dt);
        f2 = land.second(theta);
    }
    if opts.global_check {
        let g = grid_search(|t| land.value(t), land.period, opts.grid, 1e-10);
        if land.value(g) > land.value(theta) + 1e-12 {
            return large_angle(&land, g);
        }
    }
    FeedbackDecision { theta, a1: coeffs.a1, a2, mode: FeedbackMode::Infinitesimal, second_derivative: f2 }
}
