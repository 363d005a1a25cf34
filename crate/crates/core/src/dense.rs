//! Minimal dense complex matrix used for one-body kernels, small-sector
//! oracles and the Jacobi eigensolver. Row-major storage.

use crate::scalar::{Real, C};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T: Real> {
    nrows: usize,
    ncols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![C::new(T::zero(), T::zero()); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self { nrows: self.nrows, ncols: self.ncols, data: self.data.iter().map(|v| v.conj()).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let aik = self[(i, k)];
                if aik.norm_sqr() == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                for (d, &o) in dst.iter_mut().zip(orow) {
                    *d += aik * o;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(C::new(T::zero(), T::zero()), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn add_scaled(&mut self, c: C<T>, other: &Self) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: C<T>) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(C::new(-T::one(), T::zero()), other);
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// Frobenius norm, doubling as the Hilbert-Schmidt norm once the caller
    /// applies its own measure weight.
    pub fn frobenius(&self) -> T {
        self.data.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }

    /// max |A - A^dagger| entry; zero for exactly Hermitian matrices.
    pub fn hermiticity_defect(&self) -> T {
        assert_eq!(self.nrows, self.ncols);
        let mut worst = T::zero();
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn trace(&self) -> C<T> {
        assert_eq!(self.nrows, self.ncols);
        (0..self.nrows).fold(C::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.ncols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.ncols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_against_hand_computed_2x2() {
        let a = CMatrix::from_fn(2, 2, |i, j| C::new((i + 1) as f64, j as f64));
        let b = CMatrix::from_fn(2, 2, |i, j| C::new(0.0, (i + j) as f64));
        let c = a.matmul(&b);
        // row 0: [1, 1+i] x [[0, i],[i, 2i]]
        let expect00 = C::new(1.0, 0.0) * C::new(0.0, 0.0) + C::new(1.0, 1.0) * C::new(0.0, 1.0);
        assert!((c[(0, 0)] - expect00).norm() < 1e-15);
    }

    #[test]
    fn adjoint_of_product_reverses_order() {
        let a = CMatrix::from_fn(3, 2, |i, j| C::new(i as f64 - 0.5, j as f64 + 0.25));
        let b = CMatrix::from_fn(2, 3, |i, j| C::new(0.1 * j as f64, -(i as f64)));
        let lhs = a.matmul(&b).adjoint();
        let rhs = b.adjoint().matmul(&a.adjoint());
        assert!(lhs.sub(&rhs).max_abs() < 1e-14);
    }
}
