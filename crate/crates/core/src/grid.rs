//! Periodic lattice (torus) discretizations in one to three dimensions.
//!
//! The grid is the common geometry shared by the mean-field solver and the
//! second-quantized sectors: row-major site enumeration, plane-wave duals,
//! and minimum-image metric for all two-body factors.

use crate::scalar::{rl, Real};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("points per axis must be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("grid spacing must be positive")]
    BadSpacing,
}

/// Periodic d-dimensional lattice with per-axis point counts and spacings.
///
/// Sites are enumerated row-major with axis 0 slowest. Point counts are
/// restricted to powers of two so the plane-wave dual is available through
/// fast transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    dims: Vec<usize>,
    spacing: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(dims: &[usize], spacing: &[T]) -> Result<Self, GridError> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(GridError::BadDimension(dims.len()));
        }
        if spacing.len() != dims.len() {
            return Err(GridError::BadDimension(spacing.len()));
        }
        for &n in dims {
            if n < 2 || !n.is_power_of_two() {
                return Err(GridError::NotPowerOfTwo(n));
            }
        }
        for &h in spacing {
            if !(h > T::zero()) || !h.is_finite() {
                return Err(GridError::BadSpacing);
            }
        }
        Ok(Self { dims: dims.to_vec(), spacing: spacing.to_vec() })
    }

    /// Cubic grid: `n` points per axis, uniform spacing `h`.
    pub fn cubic(dim: usize, n: usize, h: T) -> Result<Self, GridError> {
        Self::new(&vec![n; dim], &vec![h; dim])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    /// Total number of lattice sites.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one lattice cell, h_1 ... h_d.
    pub fn cell_volume(&self) -> T {
        self.spacing.iter().fold(T::one(), |acc, &h| acc * h)
    }

    /// Total torus volume.
    pub fn volume(&self) -> T {
        self.dims
            .iter()
            .zip(&self.spacing)
            .fold(T::one(), |acc, (&n, &h)| acc * rl::<T>(n as f64) * h)
    }

    /// Side length of axis `a`.
    pub fn extent(&self, a: usize) -> T {
        rl::<T>(self.dims[a] as f64) * self.spacing[a]
    }

    /// Smallest side length over all axes.
    pub fn min_extent(&self) -> T {
        (0..self.dim()).map(|a| self.extent(a)).fold(T::infinity(), T::min)
    }

    /// Decompose a flat site index into per-axis indices.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        out
    }

    /// Flatten per-axis indices (row-major, axis 0 slowest).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut flat = 0;
        for (a, &m) in multi.iter().enumerate() {
            flat = flat * self.dims[a] + (m % self.dims[a]);
        }
        flat
    }

    /// Coordinates of a site, x_a = m_a * h_a.
    pub fn coords(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .iter()
            .zip(&self.spacing)
            .map(|(&m, &h)| rl::<T>(m as f64) * h)
            .collect()
    }

    /// Geometric center of the domain, (n_a/2) h_a per axis.
    pub fn center(&self) -> Vec<T> {
        self.dims
            .iter()
            .zip(&self.spacing)
            .map(|(&n, &h)| rl::<T>((n / 2) as f64) * h)
            .collect()
    }

    /// Signed minimum-image displacement from site `b` to site `a`, per axis.
    pub fn min_image_disp(&self, a: usize, b: usize) -> Vec<T> {
        let ma = self.multi_index(a);
        let mb = self.multi_index(b);
        ma.iter()
            .zip(&mb)
            .zip(self.dims.iter().zip(&self.spacing))
            .map(|((&ia, &ib), (&n, &h))| {
                let mut d = (ia as isize - ib as isize).rem_euclid(n as isize);
                if d > (n / 2) as isize {
                    d -= n as isize;
                }
                rl::<T>(d as f64) * h
            })
            .collect()
    }

    /// Minimum-image distance between two sites.
    pub fn min_image_distance(&self, a: usize, b: usize) -> T {
        self.min_image_disp(a, b)
            .iter()
            .fold(T::zero(), |acc, &d| acc + d * d)
            .sqrt()
    }

    /// Wavenumber for transform index `m` on axis `a`: 2 pi m~ / (n h) with
    /// the signed frequency m~ in (-n/2, n/2].
    pub fn wavenumber(&self, a: usize, m: usize) -> T {
        let n = self.dims[a];
        let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        rl::<T>(2.0 * std::f64::consts::PI * signed) / (rl::<T>(n as f64) * self.spacing[a])
    }

    /// |k|^2 for every flat spectral index, in transform layout.
    pub fn k_squared_table(&self) -> Vec<T> {
        let mut table = vec![T::zero(); self.len()];
        for (flat, slot) in table.iter_mut().enumerate() {
            let multi = self.multi_index(flat);
            let mut k2 = T::zero();
            for (a, &m) in multi.iter().enumerate() {
                let k = self.wavenumber(a, m);
                k2 += k * k;
            }
            *slot = k2;
        }
        table
    }

    /// Whether a site sits on the wrap seam (index 0 on some axis), the layer
    /// farthest from the domain center. Used for boundary-density reporting.
    pub fn is_boundary_site(&self, flat: usize) -> bool {
        self.multi_index(flat).iter().any(|&m| m == 0)
    }
}
