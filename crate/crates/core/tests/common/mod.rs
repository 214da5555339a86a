//! Checks shared by the property suite and the acceptance suite. Each
//! returns the measured quantity; the callers decide pass or fail.
#![allow(dead_code)]

use paqs::feedback::{decide_feedback, FeedbackMode};
use paqs::linalg::{c, frobenius, max_abs, outer, trace, CMat, CVec};
use paqs::noise::NoiseStream;
use paqs::protocols::{build_protocol, Method, ProtocolConfig, Representation, Target};
use paqs::random::{random_density, random_pure};
use paqs::sme::{aslo_channel_step, controlled_sme_step, kraus_values, povm_step, povm_step_pure, readout, sme_step};
use paqs::state::{Basis, FeedbackGenerator, ObservableSpec};
use paqs::symmetry::{build_ghz_sym_basis, dicke_collective_generators, EffectiveQubit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Least-squares slope of log(err) against log(dt).
pub fn fitted_order(dts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub const ORDER_DTS: [f64; 3] = [1e-3, 1e-4, 1e-5];

fn w3_ops(k: f64) -> (ObservableSpec, FeedbackGenerator) {
    let (jz, jy, _) = dicke_collective_generators(3);
    let obs = ObservableSpec::new(jz, k, Basis::Dicke(3)).unwrap();
    let gen = FeedbackGenerator::new(jy * c(0.5, 0.0), Basis::Dicke(3)).unwrap();
    (obs, gen)
}

/// Frobenius gap between one SME step and one POVM step fed the same
/// signal, averaged over random full-rank states; returns (errors, order).
pub fn sme_povm_order() -> (Vec<f64>, f64) {
    let (obs, _) = w3_ops(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let states: Vec<CMat> = (0..10).map(|_| random_density(4, 4, &mut rng)).collect();
    let errs: Vec<f64> = ORDER_DTS
        .iter()
        .map(|&dt| {
            let dw = dt.sqrt();
            let total: f64 = states
                .iter()
                .map(|rho| {
                    let a = sme_step(rho, &obs, dt, dw).unwrap();
                    let b = povm_step(rho, &obs, dt, readout(rho, &obs, dt, dw)).unwrap();
                    frobenius(&(a - b))
                })
                .sum();
            total / states.len() as f64
        })
        .collect();
    let order = fitted_order(&ORDER_DTS, &errs);
    (errs, order)
}

/// Controlled SME against measure-then-rotate with θ = A1 dW + A2 dt.
pub fn controlled_step_order() -> (Vec<f64>, f64) {
    let (obs, gen) = w3_ops(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let states: Vec<CMat> = (0..10).map(|_| random_density(4, 4, &mut rng)).collect();
    let (a1, a2) = (0.7, -0.4);
    let errs: Vec<f64> = [1e-3, 1e-4]
        .iter()
        .map(|&dt: &f64| {
            let dw = dt.sqrt();
            let total: f64 = states
                .iter()
                .map(|rho| {
                    let a = controlled_sme_step(rho, &obs, &gen, a1, a2, dt, dw).unwrap();
                    let post = sme_step(rho, &obs, dt, dw).unwrap();
                    let u = gen.unitary(a1 * dw + a2 * dt);
                    let b = &u * post * u.adjoint();
                    frobenius(&(a - b))
                })
                .sum();
            total / states.len() as f64
        })
        .collect();
    let order = fitted_order(&[1e-3, 1e-4], &errs);
    (errs, order)
}

/// max_j |∫ dV Ω_jj² − 1| by the trapezoid rule over ±14 standard deviations.
pub fn povm_completeness(obs: &ObservableSpec, dt: f64) -> f64 {
    let lam = &obs.eigen.values;
    let sd = (dt / (8.0 * obs.k)).sqrt();
    let lo = lam.iter().cloned().fold(f64::INFINITY, f64::min) * dt - 14.0 * sd;
    let hi = lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * dt + 14.0 * sd;
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut acc = vec![0.0; lam.len()];
    for i in 0..=n {
        let dv = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 * h } else { h };
        for (a, om) in acc.iter_mut().zip(kraus_values(obs, dt, dv)) {
            *a += w * om * om;
        }
    }
    acc.iter().fold(0.0f64, |m, a| m.max((a - 1.0).abs()))
}

/// Largest purity loss of povm_step_pure over many random steps.
pub fn pure_step_purity_loss(steps: usize) -> f64 {
    let (obs, _) = w3_ops(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut noise = NoiseStream::new(103, 0);
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    let mut psi = random_pure(4, &mut rng);
    for _ in 0..steps {
        let rho = outer(&psi);
        let dv = readout(&rho, &obs, dt, noise.dw(dt));
        let next = povm_step_pure(&psi, &obs, dt, dv).unwrap();
        let as_density = povm_step(&rho, &obs, dt, dv).unwrap();
        let purity = paqs::linalg::trace_product(&as_density, &as_density).re;
        worst = worst.max(1.0 - purity).max((next.norm() - 1.0).abs());
        psi = next;
    }
    worst
}

/// Largest trace error over controlled SME steps and averaged channel steps.
pub fn controlled_trace_drift(steps: usize) -> f64 {
    let (obs, gen) = w3_ops(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut noise = NoiseStream::new(104, 0);
    let dt = 1e-5;
    // Euler steps need room below: keep the start well inside the interior.
    let mut rho = random_density(4, 4, &mut rng) * c(0.5, 0.0) + CMat::identity(4, 4) * c(0.125, 0.0);
    let mut bar = random_density(4, 2, &mut rng);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let dw = noise.dw(dt);
        rho = controlled_sme_step(&rho, &obs, &gen, 0.3, 0.1, dt, dw).unwrap();
        bar = aslo_channel_step(&bar, &obs, &gen, 0.3, 0.1, dt).unwrap();
        worst = worst.max((trace(&rho).re - 1.0).abs()).max((trace(&bar).re - 1.0).abs());
    }
    worst
}

/// A1, A2 at the W target and the change of the target under one
/// controlled averaged step.
pub fn a1_fixed_point() -> (f64, f64, f64) {
    let (obs, gen) = w3_ops(1.0);
    let mut w = CVec::zeros(4);
    w[1] = c(1.0, 0.0);
    let ctx = paqs::feedback::FeedbackContext::new(gen.clone(), obs.clone(), w.clone());
    let rho = outer(&w);
    let co = match ctx.coefficients(&rho) {
        paqs::feedback::CoefficientOutcome::Regular(co) => co,
        other => panic!("{other:?}"),
    };
    let next = aslo_channel_step(&rho, &obs, &gen, co.a1, co.a2, 1e-3).unwrap();
    (co.a1, co.a2, max_abs(&(next - rho)))
}

/// Finite-difference slope of F at the chosen angle along W TEA
/// trajectories, in units of dt; returns (worst |slope|/dt, checked steps).
pub fn stationarity_along_trajectories(n_traj: usize) -> (f64, usize) {
    let mut cfg = ProtocolConfig::new(Target::W, Method::Tea, 3);
    cfg.t_final = 0.5;
    let proto = build_protocol(&cfg).unwrap();
    let opts = proto.feedback_options();
    let dt = cfg.dt;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for index in 0..n_traj as u64 {
        let mut noise = NoiseStream::new(77, index);
        let mut rho = proto.initial.clone();
        for _ in 0..cfg.n_steps() {
            let dw = noise.dw(dt);
            let post = povm_step(&rho, &proto.ctx.obs, dt, readout(&rho, &proto.ctx.obs, dt, dw)).unwrap();
            let d = decide_feedback(&proto.ctx, &rho, &post, dw, dt, &opts);
            if d.mode == FeedbackMode::Infinitesimal {
                let h = 1e-5;
                let f = |t: f64| proto.fidelity(&proto.rotate(&post, t));
                let slope = (f(d.theta + h) - f(d.theta - h)) / (2.0 * h);
                worst = worst.max(slope.abs() / dt);
                checked += 1;
            }
            rho = proto.rotate(&post, d.theta);
        }
    }
    (worst, checked)
}

fn ghz_config(rep: Representation) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::new(Target::Ghz, Method::Tea, 3);
    cfg.representation = rep;
    cfg
}

/// Largest per-step gap between the full 8-dim GHZ trajectory and the lifted
/// GHZ-symmetric one under shared noise, with each side choosing its own
/// angle. Returns (state gap, angle gap).
pub fn full_vs_ghz_sym(steps: usize, seed: u64) -> (f64, f64) {
    let pf = build_protocol(&ghz_config(Representation::Full)).unwrap();
    let ps = build_protocol(&ghz_config(Representation::Symmetric)).unwrap();
    assert_eq!(pf.basis, Basis::Full(3));
    assert_eq!(ps.basis, Basis::GhzSym(3));
    let iso = build_ghz_sym_basis(3).unwrap().matrix().unwrap();
    let dt = 1e-3;
    let (mut rf, mut rs) = (pf.initial.clone(), ps.initial.clone());
    let mut noise = NoiseStream::new(seed, 0);
    let (mut gap, mut angle_gap): (f64, f64) = (max_abs(&(&iso * &rs * iso.adjoint() - &rf)), 0.0);
    for _ in 0..steps {
        let dw = noise.dw(dt);
        let post_f = povm_step(&rf, &pf.ctx.obs, dt, readout(&rf, &pf.ctx.obs, dt, dw)).unwrap();
        let post_s = povm_step(&rs, &ps.ctx.obs, dt, readout(&rs, &ps.ctx.obs, dt, dw)).unwrap();
        let df = decide_feedback(&pf.ctx, &rf, &post_f, dw, dt, &pf.feedback_options());
        let ds = decide_feedback(&ps.ctx, &rs, &post_s, dw, dt, &ps.feedback_options());
        angle_gap = angle_gap.max((df.theta - ds.theta).abs());
        rf = pf.rotate(&post_f, df.theta);
        rs = ps.rotate(&post_s, ds.theta);
        gap = gap.max(max_abs(&(&iso * &rs * iso.adjoint() - &rf)));
    }
    (gap, angle_gap)
}

/// Largest per-step gap between the GHZ-symmetric trajectory and the
/// single-qubit map with k̃ = 4k, θ̃ = 2θ and dṼ = (dV − dt)/2. Returns
/// (state gap, signal gap).
pub fn ghz_sym_vs_qubit(steps: usize, seed: u64) -> (f64, f64) {
    let ps = build_protocol(&ghz_config(Representation::Symmetric)).unwrap();
    let k = ps.ctx.obs.k;
    let obs_q = ObservableSpec::new(EffectiveQubit::observable(), 4.0 * k, Basis::EffectiveQubit).unwrap();
    let gen_q = FeedbackGenerator::new(EffectiveQubit::generator(), Basis::EffectiveQubit).unwrap();
    let dt = 1e-3;
    let mut rs = ps.initial.clone();
    let mut rq = ps.initial.clone();
    let mut noise = NoiseStream::new(seed, 0);
    let (mut gap, mut signal_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..steps {
        let dw = noise.dw(dt);
        let dv = readout(&rs, &ps.ctx.obs, dt, dw);
        let dv_q = (dv - dt) / 2.0;
        signal_gap = signal_gap.max((dv_q - readout(&rq, &obs_q, dt, dw)).abs());
        let post_s = povm_step(&rs, &ps.ctx.obs, dt, dv).unwrap();
        let post_q = povm_step(&rq, &obs_q, dt, dv_q).unwrap();
        let d = decide_feedback(&ps.ctx, &rs, &post_s, dw, dt, &ps.feedback_options());
        rs = ps.rotate(&post_s, d.theta);
        let u = gen_q.unitary(2.0 * d.theta);
        rq = &u * post_q * u.adjoint();
        gap = gap.max(max_abs(&(&rs - &rq)));
    }
    (gap, signal_gap)
}

/// Collapse statistics of measurement-only W(3) trajectories: counts of
/// final states per X eigenvalue against the initial populations.
/// Returns (χ², counts, expected probabilities, undecided trajectories).
pub fn collapse_chi2(n_traj: usize, t_final: f64) -> (f64, Vec<usize>, Vec<f64>, usize) {
    let mut cfg = ProtocolConfig::new(Target::W, Method::Baseline, 3);
    cfg.t_final = t_final;
    let proto = build_protocol(&cfg).unwrap();
    let obs = &proto.ctx.obs;
    let probs: Vec<f64> = (0..4).map(|i| proto.initial[(i, i)].re).collect();
    let results = paqs::parallel::map_indexed(n_traj, 1, |index| {
        let mut noise = NoiseStream::new(cfg.master_seed, index as u64);
        let mut rho = proto.initial.clone();
        for _ in 0..cfg.n_steps() {
            let dv = readout(&rho, obs, cfg.dt, noise.dw(cfg.dt));
            rho = povm_step(&rho, obs, cfg.dt, dv).unwrap();
        }
        let pops: Vec<f64> = (0..4).map(|i| rho[(i, i)].re).collect();
        let (best, p) = pops.iter().cloned().enumerate().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        (best, p)
    });
    let mut counts = vec![0usize; 4];
    let mut undecided = 0;
    for (best, p) in results {
        counts[best] += 1;
        if p < 0.99 {
            undecided += 1;
        }
    }
    let n = n_traj as f64;
    let chi2 = counts
        .iter()
        .zip(&probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&o, &p)| (o as f64 - n * p).powi(2) / (n * p))
        .sum();
    (chi2, counts, probs, undecided)
}

/// 99.73% quantile of χ² with three degrees of freedom.
pub const CHI2_3DOF_3SIGMA: f64 = 14.16;

/// Largest |z| of the ensemble-mean fidelity against its initial value for
/// measurement-only W(3) trajectories (the target is an eigenstate of X, so
/// its fidelity is a martingale).
pub fn fidelity_martingale(n_traj: usize, t_final: f64) -> (f64, usize) {
    let mut cfg = ProtocolConfig::new(Target::W, Method::Baseline, 3);
    cfg.t_final = t_final;
    cfg.n_traj = n_traj;
    cfg.master_seed = 31;
    let proto = build_protocol(&cfg).unwrap();
    let f0 = proto.fidelity(&proto.initial);
    let stats = paqs::protocols::run_baseline(&cfg, &paqs::protocols::RunOptions::with_workers(1)).unwrap();
    let z = stats
        .mean_fidelity
        .iter()
        .zip(&stats.sem)
        .skip(1)
        .map(|(m, s)| (m - f0).abs() / s.max(1e-300))
        .fold(0.0, f64::max);
    (z, stats.aborted.len())
}
