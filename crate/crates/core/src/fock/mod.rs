//! Second-quantized lattice sectors: occupation bases, coefficient vectors,
//! sparse creation/annihilation machinery and the canonical-commutation
//! checks.

pub mod basis;
pub mod bounds;
pub mod onebody;
pub mod ops;
pub mod sparse;

pub use basis::{sector_dimension, BasisError, SectorBasis, TruncatedBasis};
pub use onebody::{gradient_matrix, laplacian_matrix, projector_q};
pub use ops::*;
pub use sparse::{BasisId, SparseOperator, SparseError};

use crate::scalar::{rl, Real, C};
use rand::Rng;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("coefficient count does not match basis dimension")]
    BadLength,
    #[error("zero vector cannot be normalized")]
    ZeroNorm,
    #[error("vectors live on different bases")]
    BasisMismatch,
}

/// Coefficient vector over a [`SectorBasis`].
#[derive(Debug, Clone)]
pub struct FockVector<T: Real> {
    basis: Arc<SectorBasis>,
    coeffs: Vec<C<T>>,
}

impl<T: Real> FockVector<T> {
    pub fn new(basis: Arc<SectorBasis>, coeffs: Vec<C<T>>) -> Self {
        assert_eq!(coeffs.len(), basis.dim(), "coefficient count must match basis");
        Self { basis, coeffs }
    }

    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        Self { basis, coeffs: vec![C::new(T::zero(), T::zero()); dim] }
    }

    /// Basis state |i>.
    pub fn basis_state(basis: Arc<SectorBasis>, i: usize) -> Self {
        let mut v = Self::zeros(basis);
        v.coeffs[i] = C::new(T::one(), T::zero());
        v
    }

    /// Condensate product state phi^{(x) N} from a normalized one-body field.
    pub fn product_state(basis: Arc<SectorBasis>, single: &crate::field::Field<T>) -> Self {
        assert_eq!(basis.modes(), single.grid().len(), "field must live on the basis modes");
        let amp = single.grid().cell_volume().sqrt();
        let coeffs = (0..basis.dim())
            .map(|i| {
                let mult = rl::<T>(basis.multiplicity(i)).sqrt();
                let mut c = C::new(mult, T::zero());
                for &m in basis.state(i) {
                    c *= single.values()[m as usize].scale(amp);
                }
                c
            })
            .collect();
        Self { basis, coeffs }
    }

    /// Random complex state, normalized; components uniform in the square.
    pub fn random(basis: Arc<SectorBasis>, rng: &mut impl Rng) -> Self {
        let coeffs = (0..basis.dim())
            .map(|_| C::new(rl::<T>(rng.gen_range(-1.0..1.0)), rl::<T>(rng.gen_range(-1.0..1.0))))
            .collect();
        let mut v = Self { basis, coeffs };
        v.normalize().expect("random state has positive norm");
        v
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[C<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C<T>] {
        &mut self.coeffs
    }

    pub fn norm(&self) -> T {
        self.coeffs.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn normalize(&mut self) -> Result<(), VectorError> {
        let n = self.norm();
        if !(n > T::zero()) {
            return Err(VectorError::ZeroNorm);
        }
        let inv = T::one() / n;
        for v in &mut self.coeffs {
            *v = v.scale(inv);
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<C<T>, VectorError> {
        if self.basis.as_ref() != other.basis.as_ref() {
            return Err(VectorError::BasisMismatch);
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v))
    }

    /// <self, A self> for a square operator on this sector.
    pub fn expectation(&self, op: &SparseOperator<T>) -> C<T> {
        op.expectation(&self.coeffs)
    }
}
