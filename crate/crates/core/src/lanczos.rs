//! Hermitian Lanczos with full reorthogonalization for extremal eigenpairs
//! of sparse or composed operators.

use crate::eigen::tridiagonal_eigen;
use crate::linop::{deterministic_start, LinOp};
use crate::scalar::{rl, Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LanczosError {
    #[error("Lanczos did not reach residual {wanted:e} (got {got:e}) within {iters} iterations")]
    NoConvergence { wanted: f64, got: f64, iters: usize },
    #[error("zero start vector")]
    ZeroStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremal {
    Smallest,
    Largest,
}

pub struct LanczosResult<T: Real> {
    pub value: T,
    pub vector: Vec<C<T>>,
    pub residual: T,
    pub iterations: usize,
}

/// Extremal eigenpair of a Hermitian operator.
///
/// Full reorthogonalization each step; the tridiagonal Ritz problem is
/// re-solved every few iterations until the requested residual
/// ||A v - lambda v|| <= tol is certified on the assembled Ritz vector.
pub fn extremal_eigenpair<T: Real>(
    op: &dyn LinOp<T>,
    which: Extremal,
    tol: T,
    max_iter: usize,
    start: Option<Vec<C<T>>>,
) -> Result<LanczosResult<T>, LanczosError> {
    let n = op.dim();
    if n == 0 {
        return Err(LanczosError::ZeroStart);
    }
    let mut q = match start {
        Some(v) => v,
        None => deterministic_start(n),
    };
    let qn = norm(&q);
    if !(qn > T::zero()) {
        return Err(LanczosError::ZeroStart);
    }
    scale(&mut q, T::one() / qn);

    let m_max = max_iter.min(n);
    let mut basis: Vec<Vec<C<T>>> = vec![q.clone()];
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let mut best: Option<LanczosResult<T>> = None;

    for j in 0..m_max {
        let mut w = op.apply_vec(&basis[j]);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        axpy(&mut w, -a, &basis[j]);
        if j > 0 {
            let b = beta[j - 1];
            axpy(&mut w, -b, &basis[j - 1]);
        }
        // full reorthogonalization keeps the basis numerically orthonormal
        for qv in &basis {
            let ov = dot(qv, &w);
            caxpy(&mut w, -ov, qv);
        }
        let b = norm(&w);

        let exhausted = b <= T::epsilon() * rl::<T>(64.0) || j + 1 == m_max;
        if exhausted || (j + 1) % 8 == 0 {
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta).expect("tridiagonal eigen");
            let idx = match which {
                Extremal::Smallest => 0,
                Extremal::Largest => vals.len() - 1,
            };
            let ritz = vals[idx];
            let mut vec = vec![C::new(T::zero(), T::zero()); n];
            for (coef, qv) in vecs[idx].iter().zip(&basis) {
                caxpy(&mut vec, C::new(*coef, T::zero()), qv);
            }
            let vn = norm(&vec);
            scale(&mut vec, T::one() / vn);
            let av = op.apply_vec(&vec);
            let mut res_vec = av;
            axpy(&mut res_vec, -ritz, &vec);
            let res = norm(&res_vec);
            let cand = LanczosResult { value: ritz, vector: vec, residual: res, iterations: j + 1 };
            let better = match &best {
                None => true,
                Some(b) => res < b.residual,
            };
            if better {
                best = Some(cand);
            }
            if let Some(b) = &best {
                if b.residual <= tol {
                    return Ok(best.unwrap());
                }
            }
            if exhausted {
                break;
            }
        }
        if b <= T::epsilon() * rl::<T>(64.0) {
            break;
        }
        beta.push(b);
        let mut next = w;
        scale(&mut next, T::one() / b);
        basis.push(next);
    }

    match best {
        Some(b) if b.residual <= tol => Ok(b),
        Some(b) => Err(LanczosError::NoConvergence {
            wanted: tol.to_f64().unwrap_or(f64::NAN),
            got: b.residual.to_f64().unwrap_or(f64::NAN),
            iters: b.iterations,
        }),
        None => Err(LanczosError::ZeroStart),
    }
}

pub(crate) fn norm<T: Real>(v: &[C<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

pub(crate) fn dot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v)
}

pub(crate) fn scale<T: Real>(v: &mut [C<T>], s: T) {
    for z in v {
        *z = z.scale(s);
    }
}

pub(crate) fn axpy<T: Real>(y: &mut [C<T>], a: T, x: &[C<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi.scale(a);
    }
}

pub(crate) fn caxpy<T: Real>(y: &mut [C<T>], a: C<T>, x: &[C<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
