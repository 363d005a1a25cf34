//! Dense Hermitian eigensolvers: cyclic Jacobi for complex Hermitian
//! matrices and implicit-shift QL for real symmetric tridiagonal ones.
//!
//! Hand-rolled rather than bound to LAPACK so the whole crate stays generic
//! over the scalar type; the sector dimensions these run at (a few hundred)
//! make the O(n^3) cost irrelevant.

use crate::dense::CMatrix;
use crate::scalar::{rl, Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix is not Hermitian (defect {0})")]
    NotHermitian(f64),
    #[error("eigensolver failed to converge after {0} sweeps/iterations")]
    NoConvergence(usize),
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

/// Cyclic Jacobi for complex Hermitian matrices.
pub fn hermitian_eigen<T: Real>(a: &CMatrix<T>) -> Result<HermitianEigen<T>, EigenError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let defect = a.hermiticity_defect();
    let scale = a.max_abs().max(T::min_positive_value());
    if defect > rl::<T>(1e-10) * scale.max(T::one()) {
        return Err(EigenError::NotHermitian(defect.to_f64().unwrap_or(f64::NAN)));
    }
    let mut m = a.clone();
    // enforce exact Hermiticity so rotations see consistent data
    for i in 0..n {
        let d = m[(i, i)];
        m[(i, i)] = C::new(d.re, T::zero());
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()).scale(rl::<T>(0.5));
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n);
    if n <= 1 {
        return Ok(finish(m, v));
    }

    let fro = m.frobenius().max(T::min_positive_value());
    let tol = T::epsilon() * fro;
    let max_sweeps = 60;
    for _sweep in 0..max_sweeps {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            return Ok(finish(m, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let abs = apq.norm();
                if abs <= tol * rl::<T>(1e-3) {
                    continue;
                }
                // phase e^{i beta} of the pivot and the classic real rotation
                let phase = apq.scale(T::one() / abs);
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (rl::<T>(2.0) * abs);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                // columns update: col_p <- c col_p - s conj(phase) col_q
                //                 col_q <- s phase col_p + c col_q
                let sp = phase.scale(s);
                let spc = phase.conj().scale(s);
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp.scale(c) - spc * mkq;
                    m[(k, q)] = sp * mkp + mkq.scale(c);
                }
                // rows update (conjugate rotation from the left)
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk.scale(c) - sp * mqk;
                    m[(q, k)] = spc * mpk + mqk.scale(c);
                }
                // keep the pivot pair exactly clean
                m[(p, q)] = C::new(T::zero(), T::zero());
                m[(q, p)] = C::new(T::zero(), T::zero());
                m[(p, p)] = C::new(m[(p, p)].re, T::zero());
                m[(q, q)] = C::new(m[(q, q)].re, T::zero());
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp.scale(c) - spc * vkq;
                    v[(k, q)] = sp * vkp + vkq.scale(c);
                }
            }
        }
    }
    Err(EigenError::NoConvergence(max_sweeps))
}

fn finish<T: Real>(m: CMatrix<T>, v: CMatrix<T>) -> HermitianEigen<T> {
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<T> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let sorted_values: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    HermitianEigen { values: sorted_values, vectors }
}

/// Eigendecomposition of a real symmetric tridiagonal matrix by implicit-
/// shift QL. `diag` has length m, `off` length m-1. Returns ascending
/// eigenvalues with eigenvector columns.
pub fn tridiagonal_eigen<T: Real>(
    diag: &[T],
    off: &[T],
) -> Result<(Vec<T>, Vec<Vec<T>>), EigenError> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    if n == 0 {
        return Ok((vec![], vec![]));
    }
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n - 1].copy_from_slice(off);
    // z holds eigenvectors as columns: z[i][j] = component i of eigenvector j
    let mut z = vec![vec![T::zero(); n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = T::one();
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a negligible off-diagonal element
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(EigenError::NoConvergence(50));
            }
            let mut g = (d[l + 1] - d[l]) / (rl::<T>(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            let sign_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + rl::<T>(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if r == T::zero() && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let vectors: Vec<Vec<T>> = order
        .iter()
        .map(|&j| (0..n).map(|i| z[i][j]).collect())
        .collect();
    Ok((values, vectors))
}

/// Smallest eigenvalue of a Hermitian matrix (dense path).
pub fn smallest_eigenvalue<T: Real>(a: &CMatrix<T>) -> Result<T, EigenError> {
    Ok(hermitian_eigen(a)?.values[0])
}

/// p(A) for Hermitian A with known integer spectrum 0..=n by Lagrange
/// interpolation through the nodes; exact for such A, no eigensolve needed.
pub fn integer_spectrum_function<T: Real>(
    a: &CMatrix<T>,
    max_value: usize,
    f: impl Fn(usize) -> T,
) -> CMatrix<T> {
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..=max_value {
        // Lagrange basis polynomial through node j, applied to the matrix
        let mut basis = CMatrix::identity(n);
        let mut denom = T::one();
        for l in 0..=max_value {
            if l == j {
                continue;
            }
            let mut shifted = a.clone();
            let mut minus_l = CMatrix::identity(n);
            minus_l.scale(C::new(-rl::<T>(l as f64), T::zero()));
            shifted.add_scaled(C::new(T::one(), T::zero()), &minus_l);
            basis = basis.matmul(&shifted);
            denom *= rl::<T>(j as f64) - rl::<T>(l as f64);
        }
        basis.scale(C::new(f(j) / denom, T::zero()));
        out.add_scaled(C::new(T::one(), T::zero()), &basis);
    }
    out
}
