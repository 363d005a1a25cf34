//! One-body lattice operators as dense M x M matrices acting on sample
//! vectors (f_i), with the h^d-weighted inner product understood.

use crate::dense::CMatrix;
use crate::fft::SpectralEngine;
use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::{rl, Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OneBodyError {
    #[error("field is not normalized (deviation {0:e})")]
    NotNormalized(f64),
}

/// Spectral -Laplacian as a matrix: column j is -Delta applied to the unit
/// sample vector at site j. Real symmetric.
pub fn laplacian_matrix<T: Real>(grid: &Grid<T>) -> CMatrix<T> {
    spectral_matrix(grid, |k2, _k| C::new(k2, T::zero()))
}

/// Spectral partial derivative along `axis` as a matrix (multiplier i k_a).
pub fn gradient_matrix<T: Real>(grid: &Grid<T>, axis: usize) -> CMatrix<T> {
    spectral_matrix(grid, |_k2, k| C::new(T::zero(), k[axis]))
}

fn spectral_matrix<T: Real>(grid: &Grid<T>, mult: impl Fn(T, &[T]) -> C<T>) -> CMatrix<T> {
    let m = grid.len();
    let mut eng = SpectralEngine::for_grid(grid);
    let mut out = CMatrix::zeros(m, m);
    let mut col = vec![C::new(T::zero(), T::zero()); m];
    // precompute per-index multipliers
    let factors: Vec<C<T>> = (0..m)
        .map(|flat| {
            let multi = grid.multi_index(flat);
            let ks: Vec<T> = multi.iter().enumerate().map(|(a, &mm)| grid.wavenumber(a, mm)).collect();
            let k2 = ks.iter().fold(T::zero(), |acc, &k| acc + k * k);
            mult(k2, &ks)
        })
        .collect();
    for j in 0..m {
        for v in col.iter_mut() {
            *v = C::new(T::zero(), T::zero());
        }
        col[j] = C::new(T::one(), T::zero());
        eng.forward(grid, &mut col);
        for (v, f) in col.iter_mut().zip(&factors) {
            *v *= *f;
        }
        eng.inverse(grid, &mut col);
        for i in 0..m {
            out[(i, j)] = col[i];
        }
    }
    out
}

/// Orthogonal projector Q = 1 - |phi><phi| as the matrix I - h^d phi phi^H.
pub fn projector_q<T: Real>(phi: &Field<T>) -> Result<CMatrix<T>, OneBodyError> {
    let dev = (phi.norm_l2() - T::one()).abs();
    if dev > rl::<T>(1e-8) {
        return Err(OneBodyError::NotNormalized(dev.to_f64().unwrap_or(f64::NAN)));
    }
    let m = phi.grid().len();
    let h_d = phi.grid().cell_volume();
    let v = phi.values();
    Ok(CMatrix::from_fn(m, m, |i, j| {
        let delta = if i == j { T::one() } else { T::zero() };
        C::new(delta, T::zero()) - v[i].scale(h_d) * v[j].conj()
    }))
}

/// Rank-one operator |f><g| as the matrix h^d f g^H.
pub fn ketbra<T: Real>(f: &Field<T>, g: &Field<T>) -> CMatrix<T> {
    let m = f.grid().len();
    let h_d = f.grid().cell_volume();
    CMatrix::from_fn(m, m, |i, j| f.values()[i].scale(h_d) * g.values()[j].conj())
}
