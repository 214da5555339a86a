//! Dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: Axis) -> CMat {
    match axis {
        Axis::X => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Axis::Y => CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        Axis::Z => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn ensure_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Tensor product in left-to-right qubit order: the first factor is the
/// most significant index.
pub fn kron_chain(factors: &[CMat]) -> Result<CMat> {
    let (first, rest) = factors.split_first().ok_or(Error::EmptyFactors)?;
    ensure_square(first)?;
    let mut acc = first.clone();
    for f in rest {
        ensure_square(f)?;
        acc = acc.kronecker(f);
    }
    Ok(acc)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest element of the anti-Hermitian part.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn ensure_hermitian(m: &CMat, tol: f64) -> Result<()> {
    ensure_square(m)?;
    let dev = hermitian_deviation(m);
    if dev > tol {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// Replace `m` by its Hermitian part in place.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = c(m[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub fn unitarity_deviation(u: &CMat) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - identity(n)))
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().sum()
}

/// Tr(a b) without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// a† m b.
pub fn sandwich(a: &CVec, m: &CMat, b: &CVec) -> Complex64 {
    a.dotc(&(m * b))
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        let eig = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let n = m.nrows();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        HermitianEigen { values, vectors }
    }

    /// V f(Λ) V†.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let mut scaled = self.vectors.clone();
        for (j, &w) in self.values.iter().enumerate() {
            let fw = f(w);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= fw;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// exp(-i θ H).
    pub fn unitary(&self, theta: f64) -> CMat {
        self.apply_fn(|w| Complex64::from_polar(1.0, -theta * w))
    }
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// True when every eigenvalue of the Hermitian matrix `m` is above `-tol`.
/// A Cholesky factorization of `m + tol I` with real pivots avoids a full
/// eigendecomposition.
pub fn is_positive_within(m: &CMat, tol: f64) -> bool {
    let n = m.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re + tol;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let djj = d.sqrt();
        l[(j, j)] = c(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    true
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let s = (norm.log2().ceil().max(0.0) as i32) + 1;
    let scaled = a * c(0.5f64.powi(s), 0.0);
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=20 {
        term = &term * &scaled * c(1.0 / k as f64, 0.0);
        sum += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}
