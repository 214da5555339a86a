//! Multi-qubit operators in the full computational basis and the
//! measurement superoperators.

use crate::error::{Error, Result};
use crate::linalg::{c, ensure_dim, ensure_square, identity, kron_chain, pauli, Axis, CMat};

/// `op` acting on qubit `site` (0-based, most significant first) of `n`.
pub fn single_site(op: &CMat, site: usize, n: usize) -> Result<CMat> {
    if site >= n {
        return Err(Error::InvalidParam { key: "site", msg: format!("{site} >= {n}") });
    }
    let factors: Vec<CMat> =
        (0..n).map(|i| if i == site { op.clone() } else { identity(2) }).collect();
    kron_chain(&factors)
}

/// Σ_i σ_axis^(i) on `n` qubits.
pub fn collective_operator(n: usize, axis: Axis) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidParam { key: "n_qubits", msg: "must be at least 1".into() });
    }
    let p = pauli(axis);
    let mut acc = CMat::zeros(1 << n, 1 << n);
    for i in 0..n {
        acc += single_site(&p, i, n)?;
    }
    Ok(acc)
}

fn choose2(m: usize) -> i64 {
    (m as i64) * (m as i64 - 1) / 2
}

/// Eigenvalue of Σ_{i<j} Z_i Z_j on a bitstring with `ones` ones.
pub fn zz_sum_eigenvalue(n: usize, ones: usize) -> f64 {
    (choose2(n - ones) + choose2(ones) - (ones as i64) * (n - ones) as i64) as f64
}

/// Σ_{i<j} Z_i Z_j, diagonal in the computational basis.
pub fn two_body_zz_sum(n: usize) -> Result<CMat> {
    if n < 2 {
        return Err(Error::InvalidParam { key: "n_qubits", msg: "must be at least 2".into() });
    }
    let dim = 1usize << n;
    let mut m = CMat::zeros(dim, dim);
    for b in 0..dim {
        m[(b, b)] = c(zz_sum_eigenvalue(n, b.count_ones() as usize), 0.0);
    }
    Ok(m)
}

/// 2Z_1 − Z_2 − Z_3 on three qubits.
pub fn onebody_ghz_observable() -> CMat {
    let z = pauli(Axis::Z);
    let z1 = single_site(&z, 0, 3).unwrap();
    let z2 = single_site(&z, 1, 3).unwrap();
    let z3 = single_site(&z, 2, 3).unwrap();
    z1 * c(2.0, 0.0) - z2 - z3
}

/// D[X]ρ = XρX† − ½(X†Xρ + ρX†X).
pub fn dissipator(x: &CMat, rho: &CMat) -> Result<CMat> {
    let n = ensure_square(x)?;
    ensure_dim(n, rho.nrows())?;
    ensure_dim(n, rho.ncols())?;
    let xd = x.adjoint();
    let xdx = &xd * x;
    Ok(x * rho * &xd - (&xdx * rho + rho * &xdx) * c(0.5, 0.0))
}

/// H[X]ρ = Xρ + ρX† − Tr((X + X†)ρ) ρ.
pub fn innovation(x: &CMat, rho: &CMat) -> Result<CMat> {
    let n = ensure_square(x)?;
    ensure_dim(n, rho.nrows())?;
    ensure_dim(n, rho.ncols())?;
    let xd = x.adjoint();
    let mean = crate::linalg::trace_product(&(x + &xd), rho);
    Ok(x * rho + rho * &xd - rho * mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, outer, trace, CVec};

    fn plus() -> CMat {
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]) * c(0.5f64.sqrt(), 0.0);
        outer(&v)
    }

    #[test]
    fn collective_z_diagonal() {
        let z = collective_operator(3, Axis::Z).unwrap();
        let want = [3.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -3.0];
        for (i, w) in want.iter().enumerate() {
            assert_eq!(z[(i, i)].re, *w);
        }
        assert_eq!(collective_operator(1, Axis::X).unwrap(), pauli(Axis::X));
    }

    #[test]
    fn zz_sum_examples() {
        let m = two_body_zz_sum(3).unwrap();
        assert_eq!(m[(0, 0)].re, 3.0);
        assert_eq!(m[(1, 1)].re, -1.0);
        let m4 = two_body_zz_sum(4).unwrap();
        assert_eq!(m4[(0b0011, 0b0011)].re, -2.0);
    }

    #[test]
    fn zz_sum_matches_brute_force_parities() {
        for n in 2..=6 {
            let m = two_body_zz_sum(n).unwrap();
            for b in 0..(1usize << n) {
                let mut s = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let zi = if b >> i & 1 == 1 { -1.0 } else { 1.0 };
                        let zj = if b >> j & 1 == 1 { -1.0 } else { 1.0 };
                        s += zi * zj;
                    }
                }
                assert_eq!(m[(b, b)].re, s);
            }
        }
    }

    #[test]
    fn dissipator_examples() {
        let z = pauli(Axis::Z);
        let d = dissipator(&z, &plus()).unwrap();
        let minus = outer(&(CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]) * c(0.5f64.sqrt(), 0.0)));
        assert!(max_abs(&(d - (minus - plus()))) < 1e-15);

        let rho = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.3, 0.0), c(0.3, 0.0), c(0.5, 0.0)]);
        let d = dissipator(&z, &rho).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-0.6, 0.0), c(-0.6, 0.0), c(0.0, 0.0)]);
        assert!(max_abs(&(d - want)) < 1e-15);

        let proj = outer(&CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        assert!(max_abs(&dissipator(&z, &proj).unwrap()) < 1e-15);
    }

    #[test]
    fn innovation_examples() {
        let z = pauli(Axis::Z);
        // Z|+><+| + |+><+|Z = [[1,0],[0,-1]] and <Z> = 0.
        let h = innovation(&z, &plus()).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(max_abs(&(h.clone() - want)) < 1e-15);
        assert!(trace(&h).norm() < 1e-15);
        let proj = outer(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(max_abs(&innovation(&z, &proj).unwrap()) < 1e-15);
    }

    #[test]
    fn superoperator_dimension_mismatch() {
        let z = pauli(Axis::Z);
        let rho = identity(4);
        assert!(matches!(dissipator(&z, &rho), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(innovation(&z, &rho), Err(Error::DimensionMismatch { .. })));
    }
}
