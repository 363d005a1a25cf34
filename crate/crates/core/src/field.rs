//! Complex one-body wavefunctions sampled on a [`Grid`].

use crate::fft::SpectralEngine;
use crate::grid::Grid;
use crate::scalar::{rl, Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("field norm is zero, cannot normalize")]
    ZeroNorm,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("Sobolev order {0} not supported (max 4)")]
    SobolevOrder(usize),
}

/// Complex scalar field over the lattice, always paired with its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T: Real> {
    grid: Grid<T>,
    values: Vec<C<T>>,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![C::new(T::zero(), T::zero()); n] }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<C<T>>) -> Self {
        assert_eq!(values.len(), grid.len(), "value count must match grid");
        Self { grid, values }
    }

    /// Build from a function of the site coordinates.
    pub fn from_fn(grid: Grid<T>, mut f: impl FnMut(&[T]) -> C<T>) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self { grid, values }
    }

    /// Constant field 1/sqrt(vol), the normalized zero-momentum mode.
    pub fn constant_normalized(grid: Grid<T>) -> Self {
        let amp = T::one() / grid.volume().sqrt();
        let n = grid.len();
        Self { grid, values: vec![C::new(amp, T::zero()); n] }
    }

    /// Normalized plane wave e^{i k.x}/sqrt(vol) with integer mode numbers.
    pub fn plane_wave(grid: Grid<T>, modes: &[usize]) -> Self {
        assert_eq!(modes.len(), grid.dim());
        let ks: Vec<T> = modes.iter().enumerate().map(|(a, &m)| grid.wavenumber(a, m)).collect();
        let amp = T::one() / grid.volume().sqrt();
        Self::from_fn(grid, |x| {
            let phase = ks.iter().zip(x).fold(T::zero(), |acc, (&k, &xi)| acc + k * xi);
            C::from_polar(amp, phase)
        })
    }

    /// Normalized Gaussian exp(-|x-c|^2 / (2 w^2)) centered at `center`.
    pub fn gaussian(grid: Grid<T>, center: &[T], width: T) -> Result<Self, FieldError> {
        let two_w2 = rl::<T>(2.0) * width * width;
        let mut f = Self::from_fn(grid, |x| {
            let r2 = x
                .iter()
                .zip(center)
                .fold(T::zero(), |acc, (&xi, &c)| acc + (xi - c) * (xi - c));
            C::new((-r2 / two_w2).exp(), T::zero())
        });
        f.normalize()?;
        Ok(f)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[C<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C<T>> {
        self.values
    }

    /// L2 norm with the h^d weight.
    pub fn norm_l2(&self) -> T {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<T>() * self.grid.cell_volume()).sqrt()
    }

    /// Inner product <self, other> = h^d sum conj(self) other.
    pub fn inner(&self, other: &Self) -> Result<C<T>, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let s: C<T> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v);
        Ok(s.scale(self.grid.cell_volume()))
    }

    pub fn normalize(&mut self) -> Result<(), FieldError> {
        let n = self.norm_l2();
        if !(n > T::zero()) {
            return Err(FieldError::ZeroNorm);
        }
        let inv = T::one() / n;
        for v in &mut self.values {
            *v = v.scale(inv);
        }
        Ok(())
    }

    pub fn scale(&mut self, c: C<T>) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// self += c * other
    pub fn axpy(&mut self, c: C<T>, other: &Self) -> Result<(), FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Plane-wave coefficients hat(k) = h^d sum psi e^{-ik.x}.
    pub fn fourier(&self, eng: &mut SpectralEngine<T>) -> Vec<C<T>> {
        let mut hat = self.values.clone();
        eng.forward(&self.grid, &mut hat);
        hat
    }

    /// -Laplacian applied spectrally (Fourier multiplier |k|^2).
    pub fn neg_laplacian(&self, eng: &mut SpectralEngine<T>) -> Self {
        let mut out = self.clone();
        eng.apply_multiplier(&self.grid, &mut out.values, |k2| C::new(k2, T::zero()));
        out
    }

    /// Spectral partial derivative along axis `a` (multiplier i k_a).
    pub fn gradient_component(&self, eng: &mut SpectralEngine<T>, a: usize) -> Self {
        let grid = self.grid.clone();
        let mut hat = self.values.clone();
        let mut raw = SpectralRaw::new(eng);
        raw.forward_raw(&grid, &mut hat);
        for (flat, v) in hat.iter_mut().enumerate() {
            let m = grid.multi_index(flat)[a];
            let k = grid.wavenumber(a, m);
            *v *= C::new(T::zero(), k);
        }
        raw.inverse_raw(&grid, &mut hat);
        let w = T::one() / rl::<T>(grid.len() as f64);
        for v in hat.iter_mut() {
            *v = v.scale(w);
        }
        Self { grid, values: hat }
    }

    /// Kinetic energy <psi, -Laplacian psi> evaluated spectrally.
    pub fn kinetic_energy(&self, eng: &mut SpectralEngine<T>) -> T {
        let hat = self.fourier(eng);
        let k2 = self.grid.k_squared_table();
        hat.iter()
            .zip(&k2)
            .map(|(v, &k2v)| v.norm_sqr() * k2v)
            .sum::<T>()
            / self.grid.volume()
    }

    /// Spectral Sobolev norm (sum (1+|k|^2)^m |hat|^2)^{1/2}, m <= 4.
    pub fn sobolev_norm(&self, eng: &mut SpectralEngine<T>, m: usize) -> Result<T, FieldError> {
        if m > 4 {
            return Err(FieldError::SobolevOrder(m));
        }
        let hat = self.fourier(eng);
        let k2 = self.grid.k_squared_table();
        let s = hat
            .iter()
            .zip(&k2)
            .map(|(v, &k2v)| v.norm_sqr() * (T::one() + k2v).powi(m as i32))
            .sum::<T>()
            / self.grid.volume();
        Ok(s.sqrt())
    }

    /// Largest |psi| over the wrap-seam shell (boundary-density diagnostic).
    pub fn max_abs_on_boundary(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_boundary_site(*i))
            .map(|(_, v)| v.norm())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }
}

/// Thin helper exposing the unnormalized transforms of the engine for
/// multiplier loops that need per-axis wavenumbers.
struct SpectralRaw<'a, T: Real> {
    eng: &'a mut SpectralEngine<T>,
}

impl<'a, T: Real> SpectralRaw<'a, T> {
    fn new(eng: &'a mut SpectralEngine<T>) -> Self {
        Self { eng }
    }

    fn forward_raw(&mut self, grid: &Grid<T>, data: &mut [C<T>]) {
        self.eng.forward(grid, data);
        let w = T::one() / grid.cell_volume();
        for v in data.iter_mut() {
            *v = v.scale(w);
        }
    }

    fn inverse_raw(&mut self, grid: &Grid<T>, data: &mut [C<T>]) {
        self.eng.inverse(grid, data);
        let w = grid.volume();
        for v in data.iter_mut() {
            *v = v.scale(w);
        }
    }
}
