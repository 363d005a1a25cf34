//! Krylov (Lanczos) propagator for the unitary evolution exp(-i dt H) psi
//! of a Hermitian operator on a sector.

use crate::eigen::tridiagonal_eigen;
use crate::lanczos::{axpy, caxpy, dot, norm, scale};
use crate::linop::LinOp;
use crate::scalar::{rl, Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KrylovError {
    #[error("zero state vector")]
    ZeroState,
}

/// One step psi -> exp(-i dt H) psi in a Krylov subspace of dimension at
/// most `m`. Happy breakdown (invariant subspace) truncates the basis and
/// the step is then exact in that subspace.
pub fn expm_step<T: Real>(
    op: &dyn LinOp<T>,
    psi: &[C<T>],
    dt: T,
    m: usize,
) -> Result<Vec<C<T>>, KrylovError> {
    let n = op.dim();
    assert_eq!(psi.len(), n);
    let beta0 = norm(psi);
    if !(beta0 > T::zero()) {
        return Err(KrylovError::ZeroState);
    }
    let mut q = psi.to_vec();
    scale(&mut q, T::one() / beta0);

    let m_eff = m.max(2).min(n);
    let mut basis: Vec<Vec<C<T>>> = vec![q];
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();

    for j in 0..m_eff {
        let mut w = op.apply_vec(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        axpy(&mut w, -a, &basis[j]);
        if j > 0 {
            axpy(&mut w, -beta[j - 1], &basis[j - 1]);
        }
        for qv in &basis {
            let ov = dot(qv, &w);
            caxpy(&mut w, -ov, qv);
        }
        let b = norm(&w);
        if j + 1 == m_eff || b <= T::epsilon() * rl::<T>(64.0) {
            break;
        }
        beta.push(b);
        scale(&mut w, T::one() / b);
        basis.push(w);
    }

    // exp(-i dt T_m) e_1 through the tridiagonal eigendecomposition
    let (vals, vecs) = tridiagonal_eigen(&alpha, &beta[..basis.len() - 1]).expect("tridiag eigen");
    let k = vals.len();
    let mut small = vec![C::new(T::zero(), T::zero()); k];
    for (val, vec) in vals.iter().zip(&vecs) {
        let phase = C::from_polar(T::one(), -dt * *val);
        let w0 = vec[0];
        for (s, &vi) in small.iter_mut().zip(vec.iter()) {
            *s += phase.scale(w0 * vi);
        }
    }

    let mut out = vec![C::new(T::zero(), T::zero()); n];
    for (coef, qv) in small.iter().zip(&basis) {
        caxpy(&mut out, coef.scale(beta0), qv);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::CMatrix;
    use crate::eigen::hermitian_eigen;

    fn hermitian(n: usize) -> CMatrix<f64> {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new((i as f64).cos(), 0.0);
            for j in (i + 1)..n {
                let v = C::new(0.4 / (1 + i + j) as f64, 0.2 * ((i * 5 + j) as f64).sin());
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }

    fn dense_expm_apply(h: &CMatrix<f64>, psi: &[C<f64>], dt: f64) -> Vec<C<f64>> {
        let eig = hermitian_eigen(h).unwrap();
        let n = h.nrows();
        let mut coeffs = vec![C::new(0.0, 0.0); n];
        for j in 0..n {
            let mut acc = C::new(0.0, 0.0);
            for i in 0..n {
                acc += eig.vectors[(i, j)].conj() * psi[i];
            }
            coeffs[j] = acc * C::from_polar(1.0, -dt * eig.values[j]);
        }
        (0..n)
            .map(|i| {
                (0..n).fold(C::new(0.0, 0.0), |acc, j| acc + eig.vectors[(i, j)] * coeffs[j])
            })
            .collect()
    }

    #[test]
    fn matches_dense_exponential() {
        let h = hermitian(18);
        let psi: Vec<C<f64>> = (0..18).map(|i| C::new((i as f64).sin(), 0.2)).collect();
        let got = expm_step(&h, &psi, 0.7, 18).unwrap();
        let want = dense_expm_apply(&h, &psi, 0.7);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn preserves_norm() {
        let h = hermitian(25);
        let psi: Vec<C<f64>> = (0..25).map(|i| C::new(1.0 / (1 + i) as f64, 0.1)).collect();
        let n0 = norm(&psi);
        let out = expm_step(&h, &psi, 0.31, 20).unwrap();
        assert!((norm(&out) - n0).abs() < 1e-12);
    }

    #[test]
    fn eigenstate_picks_up_pure_phase() {
        let h = hermitian(10);
        let eig = hermitian_eigen(&h).unwrap();
        let psi: Vec<C<f64>> = (0..10).map(|i| eig.vectors[(i, 0)]).collect();
        let out = expm_step(&h, &psi, 1.3, 10).unwrap();
        let overlap = dot(&psi, &out);
        assert!((overlap.norm() - 1.0).abs() < 1e-11);
        let expect = C::from_polar(1.0, -1.3 * eig.values[0]);
        assert!((overlap - expect).norm() < 1e-10);
    }
}
