//! Quantum states, measured observables and feedback generators.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    c, ensure_dim, ensure_hermitian, hermitian_deviation, outer, trace, trace_product,
    unitarity_deviation, CMat, CVec, HermitianEigen,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Full(usize),
    Dicke(usize),
    GhzSym(usize),
    EffectiveQubit,
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::Full(n) => 1 << n,
            Basis::Dicke(n) => n + 1,
            Basis::GhzSym(n) => n / 2 + 1,
            Basis::EffectiveQubit => 2,
        }
    }

    pub fn ensure_same(&self, other: &Basis) -> Result<()> {
        if self != other {
            return Err(Error::BasisMismatch(self.to_string(), other.to_string()));
        }
        Ok(())
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Full(n) => write!(f, "full({n})"),
            Basis::Dicke(n) => write!(f, "dicke({n})"),
            Basis::GhzSym(n) => write!(f, "ghz-sym({n})"),
            Basis::EffectiveQubit => write!(f, "effective-qubit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateData {
    Density(CMat),
    Pure(CVec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub data: StateData,
    pub basis: Basis,
}

impl QuantumState {
    pub fn density(rho: CMat, basis: Basis) -> Result<Self> {
        ensure_dim(basis.dim(), rho.nrows())?;
        ensure_hermitian(&rho, 1e-12)?;
        Ok(QuantumState { data: StateData::Density(rho), basis })
    }

    pub fn pure(psi: CVec, basis: Basis) -> Result<Self> {
        ensure_dim(basis.dim(), psi.len())?;
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParam { key: "psi", msg: "zero vector".into() });
        }
        Ok(QuantumState { data: StateData::Pure(psi.unscale(norm)), basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn rho(&self) -> CMat {
        match &self.data {
            StateData::Density(r) => r.clone(),
            StateData::Pure(p) => outer(p),
        }
    }

    pub fn psi(&self) -> Option<&CVec> {
        match &self.data {
            StateData::Pure(p) => Some(p),
            StateData::Density(_) => None,
        }
    }

    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Pure(p) => p.norm_squared().powi(2),
            StateData::Density(r) => trace_product(r, r).re,
        }
    }
}

/// ⟨ψ|ρ|ψ⟩ for raw matrices, clipped to [0,1] near the boundary.
pub fn fidelity_raw(rho: &CMat, psi: &CVec) -> f64 {
    clip_unit(psi.dotc(&(rho * psi)).re)
}

pub fn clip_unit(f: f64) -> f64 {
    if f < 0.0 && f > -1e-10 {
        0.0
    } else if f > 1.0 && f < 1.0 + 1e-10 {
        1.0
    } else {
        f
    }
}

pub fn fidelity(state: &QuantumState, target: &QuantumState) -> Result<f64> {
    state.basis.ensure_same(&target.basis)?;
    let psi = target
        .psi()
        .ok_or_else(|| Error::Unsupported("fidelity target must be a pure state".into()))?;
    Ok(match &state.data {
        StateData::Density(r) => fidelity_raw(r, psi),
        StateData::Pure(p) => clip_unit(psi.dotc(p).norm_sqr()),
    })
}

pub fn expectation(x: &CMat, state: &QuantumState) -> Result<f64> {
    ensure_dim(state.dim(), x.nrows())?;
    Ok(match &state.data {
        StateData::Density(r) => trace_product(x, r).re,
        StateData::Pure(p) => p.dotc(&(x * p)).re,
    })
}

pub fn apply_unitary(u: &CMat, state: &QuantumState) -> Result<QuantumState> {
    ensure_dim(state.dim(), u.nrows())?;
    let dev = unitarity_deviation(u);
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    let data = match &state.data {
        StateData::Density(r) => StateData::Density(u * r * u.adjoint()),
        StateData::Pure(p) => StateData::Pure(u * p),
    };
    Ok(QuantumState { data, basis: state.basis })
}

/// Measured observable X with strength k (1/μs).
#[derive(Debug, Clone)]
pub struct ObservableSpec {
    pub x: CMat,
    pub k: f64,
    pub basis: Basis,
    pub eigen: HermitianEigen,
    pub diagonal: bool,
}

impl ObservableSpec {
    pub fn new(x: CMat, k: f64, basis: Basis) -> Result<Self> {
        ensure_dim(basis.dim(), x.nrows())?;
        ensure_hermitian(&x, 1e-12)?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParam { key: "k", msg: format!("must be positive, got {k}") });
        }
        let n = x.nrows();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || x[(i, j)].norm() == 0.0));
        let eigen = if diagonal {
            // Keep the computational ordering so that diagonal X needs no basis change.
            HermitianEigen {
                values: (0..n).map(|i| x[(i, i)].re).collect(),
                vectors: CMat::identity(n, n),
            }
        } else {
            HermitianEigen::new(&x)
        };
        Ok(ObservableSpec { x, k, basis, eigen, diagonal })
    }

    /// Y = √(2k) X.
    pub fn y(&self) -> CMat {
        &self.x * c((2.0 * self.k).sqrt(), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn mean(&self, rho: &CMat) -> f64 {
        if self.diagonal {
            (0..self.dim()).map(|i| self.eigen.values[i] * rho[(i, i)].re).sum()
        } else {
            trace_product(&self.x, rho).re
        }
    }

    /// Distinct eigenvalues with the projector populations of `rho`.
    pub fn populations(&self, rho: &CMat) -> Vec<(f64, f64)> {
        let v = &self.eigen.vectors;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (j, &lam) in self.eigen.values.iter().enumerate() {
            let p = if self.diagonal {
                rho[(j, j)].re
            } else {
                let col = v.column(j).into_owned();
                col.dotc(&(rho * &col)).re
            };
            match out.iter_mut().find(|(l, _)| (l - lam).abs() < 1e-9) {
                Some(entry) => entry.1 += p,
                None => out.push((lam, p)),
            }
        }
        out
    }
}

/// Feedback generator H_F with U_F(θ) = exp(−iθH_F).
#[derive(Debug, Clone)]
pub struct FeedbackGenerator {
    pub h: CMat,
    pub basis: Basis,
    pub eigen: HermitianEigen,
}

impl FeedbackGenerator {
    pub fn new(h: CMat, basis: Basis) -> Result<Self> {
        ensure_dim(basis.dim(), h.nrows())?;
        ensure_hermitian(&h, 1e-12)?;
        let eigen = HermitianEigen::new(&h);
        Ok(FeedbackGenerator { h, basis, eigen })
    }

    /// Same generator with its trace part removed.
    pub fn traceless(h: CMat, basis: Basis) -> Result<Self> {
        let n = h.nrows();
        let shift = trace(&h) / c(n as f64, 0.0);
        Self::new(h - CMat::identity(n, n) * shift, basis)
    }

    pub fn unitary(&self, theta: f64) -> CMat {
        self.eigen.unitary(theta)
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }
}

pub fn is_density_valid(rho: &CMat) -> bool {
    hermitian_deviation(rho) < 1e-10 && (trace(rho) - Complex64::new(1.0, 0.0)).norm() < 1e-10
}
