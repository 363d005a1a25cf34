//! CSR sparse operators between Fock-space bases.

use crate::dense::CMatrix;
use crate::linop::LinOp;
use crate::scalar::{Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("operator is not square")]
    NotSquare,
}

/// Lightweight basis descriptor used for compatibility checks. A `None`
/// particle number marks a truncated (direct-sum) space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisId {
    pub modes: usize,
    pub particles: Option<usize>,
    pub dim: usize,
}

impl BasisId {
    pub fn sector(modes: usize, particles: usize, dim: usize) -> Self {
        Self { modes, particles: Some(particles), dim }
    }

    pub fn truncated(modes: usize, dim: usize) -> Self {
        Self { modes, particles: None, dim }
    }
}

/// Complex sparse matrix in CSR form with explicit domain and codomain.
/// Entries are kept sorted by (row, col) and exact zeros are pruned, so two
/// operators assembled from the same data compare entry-for-entry.
#[derive(Debug, Clone)]
pub struct SparseOperator<T: Real> {
    domain: BasisId,
    codomain: BasisId,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<C<T>>,
}

impl<T: Real> SparseOperator<T> {
    pub fn from_triplets(
        domain: BasisId,
        codomain: BasisId,
        mut triplets: Vec<(u32, u32, C<T>)>,
    ) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; codomain.dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C<T>> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<u32> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            vals.push(v);
        }
        // prune exact zeros after merging
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(vals) {
            if v.re != T::zero() || v.im != T::zero() {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..codomain.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { domain, codomain, row_ptr, col_idx: keep_cols, vals: keep_vals }
    }

    pub fn zero(domain: BasisId, codomain: BasisId) -> Self {
        Self::from_triplets(domain, codomain, Vec::new())
    }

    pub fn identity(basis: BasisId) -> Self {
        let triplets = (0..basis.dim as u32)
            .map(|i| (i, i, C::new(T::one(), T::zero())))
            .collect();
        Self::from_triplets(basis, basis, triplets)
    }

    pub fn domain(&self) -> BasisId {
        self.domain
    }

    pub fn codomain(&self) -> BasisId {
        self.codomain
    }

    pub fn nrows(&self) -> usize {
        self.codomain.dim
    }

    pub fn ncols(&self) -> usize {
        self.domain.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, C<T>)> + '_ {
        (0..self.nrows()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k] as usize, self.vals[k]))
        })
    }

    /// Exact conjugate transpose; domain and codomain swap.
    pub fn adjoint(&self) -> Self {
        let triplets = self
            .iter_entries()
            .map(|(r, c, v)| (c as u32, r as u32, v.conj()))
            .collect();
        Self::from_triplets(self.codomain, self.domain, triplets)
    }

    pub fn scale(&mut self, c: C<T>) {
        for v in &mut self.vals {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: C<T>) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, SparseError> {
        self.add_scaled(other, C::new(T::one(), T::zero()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SparseError> {
        self.add_scaled(other, C::new(-T::one(), T::zero()))
    }

    pub fn add_scaled(&self, other: &Self, c: C<T>) -> Result<Self, SparseError> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(SparseError::BasisMismatch("add: operator shapes differ".into()));
        }
        let mut triplets: Vec<(u32, u32, C<T>)> = self
            .iter_entries()
            .map(|(r, cl, v)| (r as u32, cl as u32, v))
            .collect();
        triplets.extend(other.iter_entries().map(|(r, cl, v)| (r as u32, cl as u32, c * v)));
        Ok(Self::from_triplets(self.domain, self.codomain, triplets))
    }

    /// Matrix product self * other (apply `other` first).
    pub fn matmul(&self, other: &Self) -> Result<Self, SparseError> {
        if self.domain != other.codomain {
            return Err(SparseError::BasisMismatch(format!(
                "compose: inner bases differ ({:?} vs {:?})",
                self.domain, other.codomain
            )));
        }
        // row-by-row with a dense accumulator over the output row
        let ncols = other.ncols();
        let mut acc = vec![C::new(T::zero(), T::zero()); ncols];
        let mut touched: Vec<u32> = Vec::new();
        let mut triplets: Vec<(u32, u32, C<T>)> = Vec::new();
        for r in 0..self.nrows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let mid = self.col_idx[k] as usize;
                let va = self.vals[k];
                for k2 in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    let c = other.col_idx[k2];
                    if acc[c as usize].re == T::zero() && acc[c as usize].im == T::zero() {
                        touched.push(c);
                    }
                    acc[c as usize] += va * other.vals[k2];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                let v = acc[c as usize];
                if v.re != T::zero() || v.im != T::zero() {
                    triplets.push((r as u32, c, v));
                }
                acc[c as usize] = C::new(T::zero(), T::zero());
            }
            touched.clear();
        }
        Ok(Self::from_triplets(other.domain, self.codomain, triplets))
    }

    /// AB - BA for square operators on the same basis.
    pub fn commutator(&self, other: &Self) -> Result<Self, SparseError> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.sub(&ba)
    }

    pub fn apply_rect(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.ncols());
        let mut y = vec![C::new(T::zero(), T::zero()); self.nrows()];
        for r in 0..self.nrows() {
            let mut acc = C::new(T::zero(), T::zero());
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
        y
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.nrows(), self.ncols());
        for (r, c, v) in self.iter_entries() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn max_abs(&self) -> T {
        self.vals.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// max entry of |A - A^dagger|; meaningful for square operators.
    pub fn hermiticity_defect(&self) -> Result<T, SparseError> {
        if self.domain != self.codomain {
            return Err(SparseError::NotSquare);
        }
        Ok(self.sub(&self.adjoint())?.max_abs())
    }

    /// <x, A x> for a square operator.
    pub fn expectation(&self, x: &[C<T>]) -> C<T> {
        let ax = self.apply_rect(x);
        x.iter()
            .zip(&ax)
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v)
    }

    /// Submatrix on row range x column range, reindexed from zero. The
    /// caller supplies the basis descriptors of the restricted spaces.
    pub fn restrict(
        &self,
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
        domain: BasisId,
        codomain: BasisId,
    ) -> Self {
        let triplets = self
            .iter_entries()
            .filter(|(r, c, _)| rows.contains(r) && cols.contains(c))
            .map(|(r, c, v)| ((r - rows.start) as u32, (c - cols.start) as u32, v))
            .collect();
        Self::from_triplets(domain, codomain, triplets)
    }
}

impl<T: Real> LinOp<T> for SparseOperator<T> {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows(), self.ncols(), "LinOp requires a square operator");
        self.nrows()
    }

    fn apply(&self, x: &[C<T>], y: &mut [C<T>]) {
        let out = self.apply_rect(x);
        y.copy_from_slice(&out);
    }
}
