//! WebAssembly bindings for a single-page demo: averaged-state fidelity
//! curves, sample feedback trajectories and the GHZ effective-qubit path.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented
//! per function. The plain-Rust versions carry the logic and are tested
//! natively.

use paqs::feedback::decide_feedback;
use paqs::noise::{NoiseStream, MAX_K_DT};
use paqs::protocols::{build_protocol, run_aslo, run_tea, Method, ProtocolConfig, RunOptions, Target};
use paqs::sme::{povm_step, readout};
use paqs::symmetry::bloch_vector;
use wasm_bindgen::prelude::*;

/// Largest number of sample trajectories drawn in the browser.
pub const MAX_SAMPLES: usize = 64;
/// Points per curve handed to the page.
const CURVE_POINTS: usize = 400;

fn target_for(excitation: usize) -> Target {
    if excitation == 1 {
        Target::W
    } else {
        Target::Dicke { excitation }
    }
}

/// Default step, shortened for strong measurement so that k·dt stays legal.
fn step_for(k: f64) -> f64 {
    (1e-3f64).min(MAX_K_DT / k)
}

fn thin(len: usize) -> impl Iterator<Item = usize> {
    let stride = len.div_ceil(CURVE_POINTS).max(1);
    (0..len).step_by(stride).chain(std::iter::once(len - 1)).scan(usize::MAX, |last, i| {
        let keep = *last != i;
        *last = i;
        Some(if keep { Some(i) } else { None })
    })
    .flatten()
}

/// Averaged-state fidelity for a Dicke target: pairs (t, F) interleaved.
pub fn aslo_curve_native(n: usize, excitation: usize, k: f64, t_final: f64) -> Result<Vec<f64>, String> {
    let mut cfg = ProtocolConfig::new(target_for(excitation), Method::Aslo, n);
    cfg.k = k;
    cfg.dt = step_for(k);
    cfg.t_final = t_final;
    let run = run_aslo(&cfg, &RunOptions::with_workers(1)).map_err(|e| e.to_string())?;
    let s = &run.stats;
    Ok(thin(s.times.len()).flat_map(|i| [s.times[i], s.mean_fidelity[i]]).collect())
}

/// Per-trajectory feedback on a Dicke target. Layout:
/// `[points, samples, t…, mean…, sample_0…, sample_1…]`.
pub fn tea_samples_native(
    n: usize,
    excitation: usize,
    k: f64,
    t_final: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let samples = samples.clamp(1, MAX_SAMPLES);
    let mut cfg = ProtocolConfig::new(target_for(excitation), Method::Tea, n);
    cfg.k = k;
    cfg.dt = step_for(k);
    cfg.t_final = t_final;
    cfg.n_traj = samples;
    cfg.master_seed = seed;
    let opts = RunOptions { keep_series: true, ..RunOptions::with_workers(1) };
    let stats = run_tea(&cfg, &opts).map_err(|e| e.to_string())?;
    let idx: Vec<usize> = thin(stats.times.len()).collect();
    let mut out = vec![idx.len() as f64, stats.trajectories.len() as f64];
    out.extend(idx.iter().map(|&i| stats.times[i]));
    out.extend(idx.iter().map(|&i| stats.mean_fidelity[i]));
    for t in &stats.trajectories {
        // Aborted trajectories stop early; hold their last value.
        out.extend(idx.iter().map(|&i| *t.fidelity.get(i).or(t.fidelity.last()).unwrap_or(&0.0)));
    }
    Ok(out)
}

/// One three-qubit GHZ trajectory in the two-level symmetric picture.
/// Layout: `(t, x, y, z, F)` per point; F is the GHZ fidelity.
pub fn ghz_path_native(k: f64, t_final: f64, seed: u64, feedback: bool) -> Result<Vec<f64>, String> {
    let mut cfg = ProtocolConfig::new(Target::Ghz, Method::Tea, 3);
    cfg.k = k;
    cfg.dt = step_for(k);
    cfg.t_final = t_final;
    let proto = build_protocol(&cfg).map_err(|e| e.to_string())?;
    let opts = proto.feedback_options();
    let obs = &proto.ctx.obs;
    let n_steps = cfg.n_steps();
    let stride = n_steps.div_ceil(CURVE_POINTS).max(1);
    let mut noise = NoiseStream::new(seed, 0);
    let mut rho = proto.initial.clone();
    let mut out = Vec::with_capacity(5 * (n_steps / stride + 2));
    let mut push = |step: usize, rho: &paqs::linalg::CMat| {
        let [x, y, z] = bloch_vector(rho);
        out.extend([step as f64 * cfg.dt, x, y, z, proto.fidelity(rho)]);
    };
    push(0, &rho);
    for step in 0..n_steps {
        let dw = noise.dw(cfg.dt);
        let post = povm_step(&rho, obs, cfg.dt, readout(&rho, obs, cfg.dt, dw)).map_err(|e| e.to_string())?;
        rho = if feedback {
            let d = decide_feedback(&proto.ctx, &rho, &post, dw, cfg.dt, &opts);
            proto.rotate(&post, d.theta)
        } else {
            post
        };
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            push(step + 1, &rho);
        }
    }
    Ok(out)
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn aslo_curve(n: usize, excitation: usize, k: f64, t_final: f64) -> Result<Vec<f64>, JsValue> {
    js(aslo_curve_native(n, excitation, k, t_final))
}

#[wasm_bindgen]
pub fn tea_samples(n: usize, excitation: usize, k: f64, t_final: f64, samples: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
    js(tea_samples_native(n, excitation, k, t_final, samples, seed.into()))
}

#[wasm_bindgen]
pub fn ghz_path(k: f64, t_final: f64, seed: u32, feedback: bool) -> Result<Vec<f64>, JsValue> {
    js(ghz_path_native(k, t_final, seed.into(), feedback))
}
