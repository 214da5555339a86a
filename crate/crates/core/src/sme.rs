//! Steppers for conditioned, POVM and measurement-averaged evolution.

use crate::error::{Error, Result};
use crate::linalg::{c, commutator, hermitize, is_positive_within, min_eigenvalue, trace, CMat, CVec, I};
use crate::noise::NoiseStream;
use crate::ops::{dissipator, innovation};
use crate::state::{FeedbackGenerator, ObservableSpec};

/// Eigenvalue floor tolerated before a state counts as non-positive.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// dV = ⟨X⟩dt + dW/√(8k).
pub fn readout(rho: &CMat, obs: &ObservableSpec, dt: f64, dw: f64) -> f64 {
    obs.mean(rho) * dt + dw / (8.0 * obs.k).sqrt()
}

/// Divide by the trace, symmetrize and check positivity.
pub fn finish_step(mut rho: CMat) -> Result<CMat> {
    let tr = trace(&rho).re;
    rho /= c(tr, 0.0);
    hermitize(&mut rho);
    if !is_positive_within(&rho, POSITIVITY_TOL) {
        return Err(Error::Positivity { step: 0, min_eig: min_eigenvalue(&rho) });
    }
    Ok(rho)
}

/// Euler–Maruyama increment 2kD[X]ρdt + √(2k)H[X]ρdW, before renormalization.
pub fn sme_increment(rho: &CMat, obs: &ObservableSpec, dt: f64, dw: f64) -> Result<CMat> {
    let d = dissipator(&obs.x, rho)?;
    let h = innovation(&obs.x, rho)?;
    Ok(d * c(2.0 * obs.k * dt, 0.0) + h * c((2.0 * obs.k).sqrt() * dw, 0.0))
}

pub fn sme_step(rho: &CMat, obs: &ObservableSpec, dt: f64, dw: f64) -> Result<CMat> {
    finish_step(rho + sme_increment(rho, obs, dt, dw)?)
}

/// Diagonal of the Kraus operator Ω_dV in the eigenbasis of X, scaled so
/// that its largest entry is 1, together with ln of the removed scale.
fn kraus_diagonal(obs: &ObservableSpec, dt: f64, dv: f64) -> (Vec<f64>, f64) {
    let v = dv / dt;
    let expo: Vec<f64> = obs.eigen.values.iter().map(|&l| -2.0 * obs.k * dt * (v - l) * (v - l)).collect();
    let top = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let prefactor = 0.25 * (4.0 * obs.k / (std::f64::consts::PI * dt)).ln();
    (expo.iter().map(|e| (e - top).exp()).collect(), top + prefactor)
}

/// Diagonal of Ω_dV in the eigenbasis of X.
pub fn kraus_values(obs: &ObservableSpec, dt: f64, dv: f64) -> Vec<f64> {
    let (w, log_scale) = kraus_diagonal(obs, dt, dv);
    w.iter().map(|x| x * log_scale.exp()).collect()
}

fn to_eigenbasis(obs: &ObservableSpec, rho: &CMat) -> CMat {
    if obs.diagonal {
        rho.clone()
    } else {
        obs.eigen.vectors.adjoint() * rho * &obs.eigen.vectors
    }
}

fn from_eigenbasis(obs: &ObservableSpec, rho: CMat) -> CMat {
    if obs.diagonal {
        rho
    } else {
        &obs.eigen.vectors * rho * obs.eigen.vectors.adjoint()
    }
}

/// ρ' = ΩρΩ†/Tr(ΩρΩ†), Ω = (4k/πdt)^{1/4} exp[−2kdt(dV/dt − X)²].
pub fn povm_step(rho: &CMat, obs: &ObservableSpec, dt: f64, dv: f64) -> Result<CMat> {
    let (w, log_scale) = kraus_diagonal(obs, dt, dv);
    let mut r = to_eigenbasis(obs, rho);
    let n = r.nrows();
    for j in 0..n {
        for i in 0..n {
            r[(i, j)] *= w[i] * w[j];
        }
    }
    let tr = trace(&r).re;
    let log_likelihood = tr.ln() + 2.0 * log_scale;
    if !(tr > 0.0) || log_likelihood < (1e-300f64).ln() {
        return Err(Error::ZeroLikelihood(log_likelihood.exp()));
    }
    finish_step(from_eigenbasis(obs, r))
}

/// POVM step on a pure state.
pub fn povm_step_pure(psi: &CVec, obs: &ObservableSpec, dt: f64, dv: f64) -> Result<CVec> {
    let (w, log_scale) = kraus_diagonal(obs, dt, dv);
    let mut coords = if obs.diagonal { psi.clone() } else { obs.eigen.vectors.adjoint() * psi };
    for (a, wi) in coords.iter_mut().zip(&w) {
        *a *= *wi;
    }
    let nrm = coords.norm();
    if !(nrm > 0.0) || 2.0 * nrm.ln() + 2.0 * log_scale < (1e-300f64).ln() {
        return Err(Error::ZeroLikelihood((2.0 * nrm.ln() + 2.0 * log_scale).exp()));
    }
    coords.unscale_mut(nrm);
    Ok(if obs.diagonal { coords } else { &obs.eigen.vectors * coords })
}

/// Draw dV with Gaussian-mixture statistics via dW ~ N(0,dt) and the readout
/// equation.
pub fn povm_sample_outcome(rho: &CMat, obs: &ObservableSpec, dt: f64, noise: &mut NoiseStream) -> f64 {
    let dw = noise.dw(dt);
    readout(rho, obs, dt, dw)
}

/// Innovation of the scaled operator Y = √(2k)X.
fn y_innovation(rho: &CMat, obs: &ObservableSpec) -> Result<CMat> {
    Ok(innovation(&obs.x, rho)? * c((2.0 * obs.k).sqrt(), 0.0))
}

/// Deterministic part of the controlled evolution:
/// D[Y]ρ − iA2[H,ρ] + A1²D[H]ρ − iA1[H, H[Y]ρ], per unit time.
fn averaged_generator(rho: &CMat, obs: &ObservableSpec, gen: &FeedbackGenerator, a1: f64, a2: f64) -> Result<CMat> {
    let dy = dissipator(&obs.x, rho)? * c(2.0 * obs.k, 0.0);
    let dh = dissipator(&gen.h, rho)?;
    let hy = y_innovation(rho, obs)?;
    Ok(dy - commutator(&gen.h, rho) * (I * a2) + dh * c(a1 * a1, 0.0) - commutator(&gen.h, &hy) * (I * a1))
}

/// Euler step of the measurement-averaged controlled evolution.
pub fn aslo_step(rho_bar: &CMat, obs: &ObservableSpec, gen: &FeedbackGenerator, a1: f64, a2: f64, dt: f64) -> Result<CMat> {
    let inc = averaged_generator(rho_bar, obs, gen, a1, a2)?;
    finish_step(rho_bar + inc * c(dt, 0.0))
}

/// Euler step of the full controlled SME with θ = A1 dW + A2 dt.
pub fn controlled_sme_step(
    rho: &CMat,
    obs: &ObservableSpec,
    gen: &FeedbackGenerator,
    a1: f64,
    a2: f64,
    dt: f64,
    dw: f64,
) -> Result<CMat> {
    let drift = averaged_generator(rho, obs, gen, a1, a2)?;
    let hy = y_innovation(rho, obs)?;
    let noise = hy - commutator(&gen.h, rho) * (I * a1);
    finish_step(rho + drift * c(dt, 0.0) + noise * c(dw, 0.0))
}

/// Probabilists' Gauss–Hermite nodes and weights (weights sum to 1).
const GH3_NODES: [f64; 3] = [-1.732_050_807_568_877_2, 0.0, 1.732_050_807_568_877_2];
const GH3_WEIGHTS: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

/// Measurement-averaged step as a completely positive map. The outcome
/// average of the controlled cycle is taken over three Gauss–Hermite
/// Kraus operators M_q, normalized per eigenvalue of X so that
/// Σ_q M_q² = I, each followed by the exact rotation U(A1√dt z_q + A2 dt).
/// Agrees with `aslo_step` to first order in dt but keeps ρ̄ positive for
/// stiff dephasing rates.
pub fn aslo_channel_step(
    rho_bar: &CMat,
    obs: &ObservableSpec,
    gen: &FeedbackGenerator,
    a1: f64,
    a2: f64,
    dt: f64,
) -> Result<CMat> {
    let n = rho_bar.nrows();
    let lam_bar = obs.mean(rho_bar);
    let s = (2.0 * obs.k * dt).sqrt();
    let lam = &obs.eigen.values;
    let mut m = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let e: Vec<f64> = GH3_NODES.iter().map(|z| (s * z * (lam[i] - lam_bar)).exp()).collect();
        let nrm = (0..3).map(|q| GH3_WEIGHTS[q] * e[q] * e[q]).sum::<f64>().sqrt();
        for q in 0..3 {
            m[q][i] = GH3_WEIGHTS[q].sqrt() * e[q] / nrm;
        }
    }
    let r = to_eigenbasis(obs, rho_bar);
    // Work in the eigenbasis of H_F: W = V_H† V_X maps X-eigen coordinates.
    let v = if obs.diagonal {
        gen.eigen.vectors.clone()
    } else {
        obs.eigen.vectors.adjoint() * &gen.eigen.vectors
    };
    let w = &gen.eigen.values;
    let mut acc = CMat::zeros(n, n);
    for q in 0..3 {
        let mut b = v.clone();
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] *= m[q][i];
            }
        }
        let rq = b.adjoint() * (&r * &b);
        let theta = a1 * dt.sqrt() * GH3_NODES[q] + a2 * dt;
        for bcol in 0..n {
            for a in 0..n {
                acc[(a, bcol)] += rq[(a, bcol)] * num_complex::Complex64::from_polar(1.0, -theta * (w[a] - w[bcol]));
            }
        }
    }
    let out = &gen.eigen.vectors * acc * gen.eigen.vectors.adjoint();
    finish_step(out)
}
