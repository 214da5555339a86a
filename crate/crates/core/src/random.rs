//! Random states and operators for property checks and demos.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, CMat, CVec};

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    random_vector(n, rng).normalize()
}

/// Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Density matrix G G†/Tr with G of shape n × rank.
pub fn random_density<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, rank, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let rho = &g * g.adjoint();
    let tr = crate::linalg::trace(&rho);
    rho / tr
}

/// Haar-random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}
