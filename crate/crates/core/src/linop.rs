//! Matrix-free linear operator abstraction shared by the iterative solvers.

use crate::dense::CMatrix;
use crate::scalar::{Real, C};

/// Square linear operator on complex vectors, applied matrix-free.
pub trait LinOp<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C<T>], y: &mut [C<T>]);

    fn apply_vec(&self, x: &[C<T>]) -> Vec<C<T>> {
        let mut y = vec![C::new(T::zero(), T::zero()); self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: Real> LinOp<T> for CMatrix<T> {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows(), self.ncols());
        self.nrows()
    }

    fn apply(&self, x: &[C<T>], y: &mut [C<T>]) {
        y.copy_from_slice(&self.matvec(x));
    }
}

/// Operator defined by a closure.
pub struct FnOp<T, F> {
    dim: usize,
    f: F,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Real, F: Fn(&[C<T>], &mut [C<T>])> FnOp<T, F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, _marker: std::marker::PhantomData }
    }
}

impl<T: Real, F: Fn(&[C<T>], &mut [C<T>])> LinOp<T> for FnOp<T, F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C<T>], y: &mut [C<T>]) {
        (self.f)(x, y)
    }
}

/// Deterministic unit start vector for the iterative eigensolvers: a fixed
/// quasi-random pattern so library results are reproducible without an RNG.
pub fn deterministic_start<T: Real>(dim: usize) -> Vec<C<T>> {
    let golden = 0.618_033_988_749_894_9_f64;
    let mut v: Vec<C<T>> = (0..dim)
        .map(|i| {
            let a = ((i as f64 + 1.0) * golden).fract() - 0.5;
            let b = ((i as f64 + 1.0) * golden * golden).fract() - 0.5;
            C::new(crate::scalar::rl(a), crate::scalar::rl(b))
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    for z in &mut v {
        *z = z.scale(T::one() / norm);
    }
    v
}
