//! End-to-end acceptance checks. Each test prints one
//! `criterion N: PASS|FAIL ...` line before asserting.

mod common;

use std::f64::consts::FRAC_PI_2;

use common::*;
use paqs::protocols::{
    build_protocol, replay_schedule, run_aslo, run_baseline, run_tea, EnsembleStats, Method, ObservableKind,
    ProtocolConfig, Representation, RunOptions, Target,
};
use paqs::tangle::{run_tangle, HISTOGRAM_BINS};

fn workers() -> RunOptions {
    RunOptions::with_workers(paqs::parallel::default_workers())
}

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
}

fn at_time(stats: &EnsembleStats, t: f64) -> (f64, f64) {
    let i = stats
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .unwrap()
        .0;
    (stats.mean_fidelity[i], stats.sem[i])
}

fn w3(method: Method) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::new(Target::W, method, 3);
    cfg.k = 1.0;
    cfg.dt = 1e-3;
    cfg.t_final = 3.0;
    cfg
}

#[test]
fn criterion_01_w_tea() {
    let mut cfg = w3(Method::Tea);
    cfg.n_traj = 1000;
    let start = std::time::Instant::now();
    let stats = run_tea(&cfg, &workers()).unwrap();
    let (f15, _) = at_time(&stats, 1.5);
    let (f3, _) = at_time(&stats, 3.0);
    let pass = f15 >= 0.95 && f3 >= 0.98 && stats.aborted.is_empty();
    report(
        1,
        pass,
        format!("F(1.5)={f15:.4} F(3)={f3:.4} aborted={} in {:.1}s", stats.aborted.len(), start.elapsed().as_secs_f64()),
    );
}

#[test]
fn criterion_02_w_baseline() {
    let mut cfg = w3(Method::Baseline);
    cfg.n_traj = 10_000;
    let stats = run_baseline(&cfg, &workers()).unwrap();
    let p = 4.0 / 9.0;
    let worst_z = stats
        .mean_fidelity
        .iter()
        .zip(&stats.sem)
        .map(|(m, s)| if *s == 0.0 { if (m - p).abs() < 1e-12 { 0.0 } else { f64::INFINITY } } else { (m - p).abs() / s })
        .fold(0.0, f64::max);
    // Projection probability: share of trajectories that ended on |W⟩.
    let n = stats.final_fidelity.len() as f64;
    let on_w = stats.final_fidelity.iter().filter(|&&f| f > 0.5).count() as f64 / n;
    let sigma = (p * (1.0 - p) / n).sqrt();
    let pass = worst_z <= 3.0 && (on_w - p).abs() <= 3.0 * sigma && stats.aborted.is_empty();
    report(2, pass, format!("max |F-4/9|/sem={worst_z:.2} p_W={on_w:.4} (4/9 ± {:.4})", 3.0 * sigma));
}

#[test]
fn criterion_03_w_aslo_and_replay() {
    let cfg = w3(Method::Aslo);
    let aslo = run_aslo(&cfg, &workers()).unwrap();
    let curve = &aslo.stats;
    let late: Vec<f64> =
        curve.times.iter().zip(&curve.mean_fidelity).filter(|(t, _)| **t >= 1.5).map(|(_, f)| *f).collect();
    let lo = late.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = late.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rcfg = cfg.clone();
    rcfg.n_traj = 1000;
    let replay = replay_schedule(&aslo.schedule, &rcfg, &workers()).unwrap();
    let worst_z = replay
        .mean_fidelity
        .iter()
        .zip(&replay.sem)
        .zip(&curve.mean_fidelity)
        .map(|((m, s), a)| if (m - a).abs() < 1e-9 { 0.0 } else { (m - a).abs() / s })
        .fold(0.0, f64::max);
    let pass = lo >= 0.96 && hi <= 1.0 && worst_z <= 3.0 && replay.aborted.is_empty();
    report(3, pass, format!("ASLO F on [1.5,3] in [{lo:.4}, {hi:.4}]; replay max z={worst_z:.2}"));
}

#[test]
fn criterion_04_large_angle_fraction() {
    let mut cfg = w3(Method::Tea);
    cfg.n_traj = 10_000;
    cfg.master_seed = 4;
    let stats = run_tea(&cfg, &workers()).unwrap();
    let frac = stats.large_angle_fraction;
    let pass = (0.001..=0.03).contains(&frac) && stats.aborted.is_empty();
    report(4, pass, format!("large-angle fraction {frac:.4} over {} trajectories", stats.n_traj));
}

fn aslo_final(target: Target, n: usize) -> (f64, f64) {
    let mut cfg = ProtocolConfig::new(target, Method::Aslo, n);
    cfg.t_final = 3.0;
    cfg.representation = Representation::Symmetric;
    let run = run_aslo(&cfg, &RunOptions::default()).unwrap();
    (*run.stats.mean_fidelity.last().unwrap(), run.schedule.max_abs_a2())
}

#[test]
fn criterion_05_dicke_scaling() {
    let mut worst = (f64::INFINITY, String::new());
    for n in 2..=12usize {
        for kx in 1..=n / 2 {
            let (f, _) = aslo_final(Target::Dicke { excitation: kx }, n);
            if f < worst.0 {
                worst = (f, format!("dicke({n},{kx})"));
            }
        }
    }
    for n in [24usize, 48, 100] {
        let (f, _) = aslo_final(Target::W, n);
        if f < worst.0 {
            worst = (f, format!("w({n})"));
        }
    }
    report(5, worst.0 > 0.9, format!("lowest final ASLO fidelity {:.4} at {}", worst.0, worst.1));
}

#[test]
fn criterion_06_half_filled_a2() {
    let mut detail = Vec::new();
    let mut pass = true;
    for n in [3usize, 5, 7, 9, 11] {
        let (_, a2) = aslo_final(Target::Dicke { excitation: n.div_ceil(2) }, n);
        pass &= a2 < 1e-8;
        detail.push(format!("N={n}: {a2:.3e}"));
    }
    report(6, pass, format!("max|A2| {}", detail.join(", ")));
}

#[test]
fn criterion_07_ghz_symmetric() {
    let mut cfg = ProtocolConfig::new(Target::Ghz, Method::Tea, 3);
    cfg.n_traj = 1000;
    let mut opts = workers();
    opts.record_angles = true;
    let stats = run_tea(&cfg, &opts).unwrap();
    let (f3, _) = at_time(&stats, 3.0);
    let worst = stats
        .trajectories
        .iter()
        .flat_map(|t| t.thetas.iter())
        .map(|&th| th.abs().min((th - FRAC_PI_2).abs()))
        .fold(0.0, f64::max);
    let pass = f3 >= 0.95 && worst <= 1e-6 && stats.aborted.is_empty();
    report(7, pass, format!("F(3)={f3:.4} max distance of θ from {{0, π/2}} {worst:.2e}"));
}

#[test]
fn criterion_08_ghz_one_body() {
    let mut cfg = ProtocolConfig::new(Target::Ghz, Method::Tea, 3);
    cfg.observable = ObservableKind::OneBodyNonSym;
    cfg.n_traj = 1000;
    let stats = run_tea(&cfg, &workers()).unwrap();
    let max = stats.mean_fidelity.iter().cloned().fold(0.0, f64::max);
    let pass = max < 0.6 && stats.aborted.is_empty();
    report(8, pass, format!("max mean fidelity {max:.4}"));
}

#[test]
fn criterion_09_equivalences() {
    let (full_gap, angle_gap) = full_vs_ghz_sym(10_000, 9);
    let (qubit_gap, signal_gap) = ghz_sym_vs_qubit(10_000, 9);
    let pass = full_gap <= 1e-8 && angle_gap <= 1e-8 && qubit_gap <= 1e-8 && signal_gap <= 1e-8;
    report(
        9,
        pass,
        format!("full vs sym {full_gap:.2e} (θ {angle_gap:.2e}); sym vs qubit {qubit_gap:.2e} (dV {signal_gap:.2e})"),
    );
}

#[test]
fn criterion_10_sme_povm_order() {
    let (errs, order) = sme_povm_order();
    report(10, (1.3..=1.7).contains(&order), format!("order {order:.3} errors {errs:?}"));
}

#[test]
fn criterion_11_tangle() {
    let mut sym = ProtocolConfig::new(Target::Ghz, Method::Tangle, 3);
    sym.n_traj = 1000;
    sym.t_final = 2.0;
    let s = run_tangle(&sym, &workers()).unwrap();
    let tau = *s.mean_tangle.last().unwrap();
    let fid = *s.mean_fidelity.last().unwrap();
    let last = s.histograms.last().unwrap();
    let zero_bin = last.frequency[0] + last.frequency[HISTOGRAM_BINS - 1];

    let mut one = ProtocolConfig::new(Target::Ghz, Method::Tangle, 3);
    one.observable = ObservableKind::OneBodyNonSym;
    one.n_traj = 100;
    one.t_final = 4.0;
    let o = run_tangle(&one, &workers()).unwrap();
    let plateau = *o.mean_tangle.last().unwrap();
    let plateau_sem = *o.sem_tangle.last().unwrap();

    let pass = tau >= 0.9
        && fid >= 0.9
        && zero_bin >= 0.9
        && (0.6..=0.8).contains(&plateau)
        && s.aborted.is_empty()
        && o.aborted.is_empty();
    report(
        11,
        pass,
        format!(
            "symmetric τ(2)={tau:.4} F(2)={fid:.4} θ≈0 share {zero_bin:.3}; one-body plateau τ={plateau:.3} ± {plateau_sem:.3}"
        ),
    );
}

#[test]
fn criterion_12_property_suites() {
    let mut fails = Vec::new();
    let mut check = |name: &str, ok: bool, value: String| {
        if !ok {
            fails.push(format!("{name} ({value})"));
        }
    };
    let purity = pure_step_purity_loss(2000);
    check("purity", purity < 1e-10, format!("{purity:.2e}"));
    let drift = controlled_trace_drift(2000);
    check("trace", drift < 1e-12, format!("{drift:.2e}"));
    let proto = build_protocol(&ProtocolConfig::new(Target::W, Method::Tea, 3)).unwrap();
    let completeness = povm_completeness(&proto.ctx.obs, 1e-3);
    check("completeness", completeness < 1e-8, format!("{completeness:.2e}"));
    let (z, aborted) = fidelity_martingale(2000, 1.0);
    check("martingale", z < 4.0 && aborted == 0, format!("z={z:.2} aborted={aborted}"));
    let (a1, a2, fixed) = a1_fixed_point();
    check("fixed point", a1.abs() < 1e-12 && a2.abs() < 1e-12 && fixed < 1e-12, format!("{a1:.1e} {a2:.1e} {fixed:.1e}"));
    let (slope, checked) = stationarity_along_trajectories(10);
    check("stationarity", slope < 50.0 && checked > 1000, format!("slope/dt={slope:.2}"));
    report(12, fails.is_empty(), if fails.is_empty() { "all property suites green".into() } else { fails.join("; ") });
}
