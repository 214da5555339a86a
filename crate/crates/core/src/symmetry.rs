//! Permutation-symmetric subspaces, operator projection and the effective
//! single-qubit picture of the three-qubit GHZ problem.

use crate::error::{Error, Result};
use crate::linalg::{c, ensure_dim, CMat, CVec, I, ONE, ZERO};
use crate::ops::zz_sum_eigenvalue;
use crate::state::{Basis, QuantumState, StateData};

/// Largest qubit count for which full-space basis vectors are built.
pub const MAX_MATERIALIZED_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetricKind {
    Dicke,
    GhzSym,
}

#[derive(Debug, Clone)]
pub struct SymmetricBasis {
    pub kind: SymmetricKind,
    pub n: usize,
    pub dim: usize,
    /// Full-space vectors, present only for n ≤ MAX_MATERIALIZED_QUBITS.
    pub vectors: Option<Vec<CVec>>,
}

impl SymmetricBasis {
    pub fn basis_tag(&self) -> Basis {
        match self.kind {
            SymmetricKind::Dicke => Basis::Dicke(self.n),
            SymmetricKind::GhzSym => Basis::GhzSym(self.n),
        }
    }

    /// 2^N × dim matrix whose columns are the basis vectors.
    pub fn matrix(&self) -> Result<CMat> {
        let vs = self.vectors.as_ref().ok_or_else(|| not_materialized(self.n))?;
        Ok(CMat::from_columns(vs))
    }
}

fn not_materialized(n: usize) -> Error {
    Error::Unsupported(format!(
        "full-space vectors are only built for N <= {MAX_MATERIALIZED_QUBITS} (N = {n})"
    ))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// |N,k⟩ in the full basis: uniform superposition of strings with k ones.
pub fn dicke_vector(n: usize, k: usize) -> CVec {
    let dim = 1usize << n;
    let amp = c(1.0 / binomial(n, k).sqrt(), 0.0);
    CVec::from_fn(dim, |b, _| if b.count_ones() as usize == k { amp } else { ZERO })
}

pub fn build_dicke_basis(n: usize) -> Result<SymmetricBasis> {
    if n == 0 {
        return Err(Error::InvalidParam { key: "n_qubits", msg: "must be at least 1".into() });
    }
    let vectors = (n <= MAX_MATERIALIZED_QUBITS).then(|| (0..=n).map(|k| dicke_vector(n, k)).collect());
    Ok(SymmetricBasis { kind: SymmetricKind::Dicke, n, dim: n + 1, vectors })
}

pub fn ghz_sym_dim(n: usize) -> usize {
    n / 2 + 1
}

/// Maps GHZ-symmetric coordinates to Dicke coordinates: column m is
/// (|N,m⟩ + |N,N−m⟩)/√2, or |N,N/2⟩ itself when m = N/2.
pub fn ghz_sym_isometry(n: usize) -> CMat {
    let d = ghz_sym_dim(n);
    let mut m = CMat::zeros(n + 1, d);
    let r = c(0.5f64.sqrt(), 0.0);
    for j in 0..d {
        if 2 * j == n {
            m[(j, j)] = ONE;
        } else {
            m[(j, j)] = r;
            m[(n - j, j)] = r;
        }
    }
    m
}

pub fn build_ghz_sym_basis(n: usize) -> Result<SymmetricBasis> {
    if n < 2 {
        return Err(Error::InvalidParam { key: "n_qubits", msg: "must be at least 2".into() });
    }
    let dim = ghz_sym_dim(n);
    let vectors = (n <= MAX_MATERIALIZED_QUBITS).then(|| {
        let dicke: Vec<CVec> = (0..=n).map(|k| dicke_vector(n, k)).collect();
        let iso = ghz_sym_isometry(n);
        (0..dim)
            .map(|j| {
                let mut v = CVec::zeros(1 << n);
                for (k, dk) in dicke.iter().enumerate() {
                    if iso[(k, j)] != ZERO {
                        v += dk * iso[(k, j)];
                    }
                }
                v
            })
            .collect()
    });
    Ok(SymmetricBasis { kind: SymmetricKind::GhzSym, n, dim, vectors })
}

fn swap_bits(i: usize, a: usize, b: usize) -> usize {
    let ba = (i >> a) & 1;
    let bb = (i >> b) & 1;
    if ba == bb {
        i
    } else {
        i ^ ((1 << a) | (1 << b))
    }
}

/// Largest deviation of `op` from invariance under the symmetry group of
/// `kind` (adjacent transpositions generate S_N; Π flips every bit).
pub fn symmetry_leak(op: &CMat, n: usize, kind: SymmetricKind) -> f64 {
    let dim = op.nrows();
    let mut leak: f64 = 0.0;
    let mut check = |p: &dyn Fn(usize) -> usize| {
        for i in 0..dim {
            for j in 0..dim {
                leak = leak.max((op[(p(i), p(j))] - op[(i, j)]).norm());
            }
        }
    };
    for q in 0..n.saturating_sub(1) {
        check(&|i| swap_bits(i, q, q + 1));
    }
    if kind == SymmetricKind::GhzSym {
        check(&|i| i ^ (dim - 1));
    }
    leak
}

/// ⟨b_i|op|b_j⟩ for a symmetry-commuting full-space operator.
pub fn project_operator(op: &CMat, basis: &SymmetricBasis) -> Result<CMat> {
    ensure_dim(1 << basis.n, op.nrows())?;
    let b = basis.matrix()?;
    let leak = symmetry_leak(op, basis.n, basis.kind);
    if leak > 1e-10 {
        return Err(Error::ProjectionLeak(leak));
    }
    Ok(b.adjoint() * op * b)
}

/// (Σ Z_i, Σ Y_i, Σ X_i) in the Dicke basis, built from the spin-N/2 ladder.
pub fn dicke_collective_generators(n: usize) -> (CMat, CMat, CMat) {
    let d = n + 1;
    let j = n as f64 / 2.0;
    let mut raise = CMat::zeros(d, d);
    for k in 1..d {
        let m = j - k as f64;
        raise[(k - 1, k)] = c(((j - m) * (j + m + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.transpose();
    let jz = CMat::from_diagonal(&CVec::from_fn(d, |k, _| c(n as f64 - 2.0 * k as f64, 0.0)));
    let jy = (&raise - &lower) * (-I);
    let jx = raise + lower;
    (jz, jy, jx)
}

/// Σ_{i<j} Z_i Z_j in the Dicke basis.
pub fn dicke_zz_sum(n: usize) -> CMat {
    CMat::from_diagonal(&CVec::from_fn(n + 1, |k, _| c(zz_sum_eigenvalue(n, k), 0.0)))
}

/// (Σ_{i<j} Z_i Z_j, Σ X_i) in the GHZ-symmetric basis, for any N.
pub fn ghz_sym_operators(n: usize) -> (CMat, CMat) {
    let iso = ghz_sym_isometry(n);
    let (_, _, jx) = dicke_collective_generators(n);
    let zz = iso.adjoint() * dicke_zz_sum(n) * &iso;
    let sx = iso.adjoint() * jx * &iso;
    (zz, sx)
}

pub fn embed_state(state: &QuantumState, basis: &SymmetricBasis) -> Result<QuantumState> {
    state.basis.ensure_same(&basis.basis_tag())?;
    let b = basis.matrix()?;
    let data = match &state.data {
        StateData::Pure(p) => StateData::Pure(&b * p),
        StateData::Density(r) => StateData::Density(&b * r * b.adjoint()),
    };
    Ok(QuantumState { data, basis: Basis::Full(basis.n) })
}

pub fn lift_state(state: &QuantumState, basis: &SymmetricBasis) -> Result<QuantumState> {
    state.basis.ensure_same(&Basis::Full(basis.n))?;
    let b = basis.matrix()?;
    let bd = b.adjoint();
    let (data, residual) = match &state.data {
        StateData::Pure(p) => {
            let coords = &bd * p;
            let back = &b * &coords;
            (StateData::Pure(coords), (p - back).norm())
        }
        StateData::Density(r) => {
            let coords = &bd * r * &b;
            let back = &b * &coords * &bd;
            (StateData::Density(coords), crate::linalg::frobenius(&(r - back)))
        }
    };
    if residual >= 1e-8 {
        return Err(Error::OutOfSpan(residual));
    }
    Ok(QuantumState { data, basis: basis.basis_tag() })
}

/// Single-qubit picture of the N=3 GHZ-symmetric problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveQubit {
    pub rotation_axis: [f64; 3],
    pub effective_strength: f64,
    pub bloch: [f64; 3],
}

/// Axis n̂ with projected Σ X_i = Ĩ + 2 n̂·σ̃.
pub const EFFECTIVE_AXIS: [f64; 3] = [0.866_025_403_784_438_6, 0.0, -0.5];

impl EffectiveQubit {
    /// f = (1 + z̃)/2.
    pub fn fidelity(&self) -> f64 {
        (1.0 + self.bloch[2]) / 2.0
    }

    /// Measured operator Z̃ (the offset and factor 2 are absorbed into k̃).
    pub fn observable() -> CMat {
        crate::linalg::pauli(crate::linalg::Axis::Z)
    }

    /// n̂·σ̃/2, so that the effective rotation is exp(−iθ̃ n̂·σ̃/2) with θ̃ = 2θ.
    pub fn generator() -> CMat {
        let [nx, ny, nz] = EFFECTIVE_AXIS;
        let x = crate::linalg::pauli(crate::linalg::Axis::X);
        let y = crate::linalg::pauli(crate::linalg::Axis::Y);
        let z = crate::linalg::pauli(crate::linalg::Axis::Z);
        (x * c(nx, 0.0) + y * c(ny, 0.0) + z * c(nz, 0.0)) * c(0.5, 0.0)
    }
}

pub fn bloch_vector(rho: &CMat) -> [f64; 3] {
    let off = rho[(0, 1)];
    [2.0 * off.re, -2.0 * off.im, rho[(0, 0)].re - rho[(1, 1)].re]
}

pub fn effective_qubit_map(state: &QuantumState, k: f64) -> Result<EffectiveQubit> {
    state.basis.ensure_same(&Basis::GhzSym(3))?;
    Ok(EffectiveQubit {
        rotation_axis: EFFECTIVE_AXIS,
        effective_strength: 4.0 * k,
        bloch: bloch_vector(&state.rho()),
    })
}
