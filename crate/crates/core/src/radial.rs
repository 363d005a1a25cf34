//! Radial potentials sampled on a uniform grid.
//!
//! A potential is its sample vector V(i*dr) together with the spacing; the
//! function is the piecewise-linear interpolant of the samples and is
//! identically zero beyond the sampled range. All solvers and quadratures in
//! the crate evaluate the same interpolant, so integral identities close to
//! solver accuracy.

use crate::scalar::{rl, Real};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RadialError {
    #[error("potential sample {index} is negative ({value})")]
    NegativeSample { index: usize, value: f64 },
    #[error("grid spacing must be positive")]
    BadSpacing,
    #[error("potential needs at least one sample")]
    Empty,
    #[error("table radii are not uniformly spaced")]
    NonUniformTable,
}

/// Non-negative, compactly supported radial potential.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPotential<T: Real> {
    samples: Vec<T>,
    dr: T,
}

impl<T: Real> RadialPotential<T> {
    pub fn new(samples: Vec<T>, dr: T) -> Result<Self, RadialError> {
        if !(dr > T::zero()) {
            return Err(RadialError::BadSpacing);
        }
        if samples.is_empty() {
            return Err(RadialError::Empty);
        }
        for (index, &value) in samples.iter().enumerate() {
            if value < T::zero() || !value.is_finite() {
                return Err(RadialError::NegativeSample {
                    index,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { samples, dr })
    }

    /// Square well of the given depth on [0, radius].
    pub fn square_well(depth: T, radius: T, dr: T) -> Result<Self, RadialError> {
        if !(dr > T::zero()) || !(radius > T::zero()) {
            return Err(RadialError::BadSpacing);
        }
        let n = (radius / dr).round().to_usize().unwrap_or(0).max(1);
        Ok(Self::new(vec![depth; n + 1], dr)?)
    }

    /// Sampled profile of an arbitrary radial function on [0, radius].
    pub fn from_profile(radius: T, dr: T, f: impl Fn(T) -> T) -> Result<Self, RadialError> {
        if !(dr > T::zero()) || !(radius > T::zero()) {
            return Err(RadialError::BadSpacing);
        }
        let n = (radius / dr).round().to_usize().unwrap_or(0).max(1);
        let samples = (0..=n).map(|i| f(rl::<T>(i as f64) * dr)).collect();
        Self::new(samples, dr)
    }

    /// Build from tabulated (r, V) pairs on a uniform radial grid starting
    /// at r = 0.
    pub fn from_table(rs: &[T], vs: &[T]) -> Result<Self, RadialError> {
        if rs.len() != vs.len() || rs.len() < 2 {
            return Err(RadialError::Empty);
        }
        let dr = rs[1] - rs[0];
        if !(dr > T::zero()) || rs[0].abs() > dr * rl::<T>(1e-9) {
            return Err(RadialError::NonUniformTable);
        }
        for (i, w) in rs.windows(2).enumerate() {
            if ((w[1] - w[0]) - dr).abs() > dr * rl::<T>(1e-6) {
                let _ = i;
                return Err(RadialError::NonUniformTable);
            }
        }
        Self::new(vs.to_vec(), dr)
    }

    pub fn dr(&self) -> T {
        self.dr
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    /// Largest radius with a nonzero sample; zero for the trivial potential.
    pub fn support_radius(&self) -> T {
        match self.samples.iter().rposition(|&v| v > T::zero()) {
            Some(i) => rl::<T>(i as f64) * self.dr,
            None => T::zero(),
        }
    }

    /// End of the sampled range.
    pub fn sampled_radius(&self) -> T {
        rl::<T>((self.samples.len() - 1) as f64) * self.dr
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == T::zero())
    }

    /// Piecewise-linear value; zero beyond the sampled range.
    pub fn value_at(&self, r: T) -> T {
        if r < T::zero() {
            return T::zero();
        }
        let x = r / self.dr;
        let i = x.floor().to_usize().unwrap_or(usize::MAX);
        if i + 1 >= self.samples.len() {
            if i + 1 == self.samples.len() && (x - x.floor()) == T::zero() {
                return self.samples[i];
            }
            return T::zero();
        }
        let t = x - x.floor();
        self.samples[i] * (T::one() - t) + self.samples[i + 1] * t
    }

    /// || V ||_1 = 4 pi int V(r) r^2 dr over the sampled range.
    pub fn l1_norm(&self) -> T {
        let four_pi = rl::<T>(4.0) * T::PI();
        four_pi * integrate_radial(self.samples.len() - 1, self.dr, |r| {
            self.value_at(r) * r * r
        })
    }

    /// GP-scaled potential scale^2 V(scale * r): same samples times scale^2
    /// on the grid dr/scale, so the scaling is exact sample-for-sample.
    pub fn scaled(&self, scale: T) -> Self {
        let s2 = scale * scale;
        Self {
            samples: self.samples.iter().map(|&v| v * s2).collect(),
            dr: self.dr / scale,
        }
    }
}

/// Composite per-interval Simpson rule with midpoints on [0, n*dr]. Exact
/// enough (O(dr^4)) for integrands that are smooth within each interval,
/// which is the case for piecewise-linear potentials times smooth factors.
pub fn integrate_radial<T: Real>(n_intervals: usize, dr: T, f: impl Fn(T) -> T) -> T {
    let half = rl::<T>(0.5);
    let sixth = dr / rl::<T>(6.0);
    let mut acc = T::zero();
    for i in 0..n_intervals {
        let r0 = rl::<T>(i as f64) * dr;
        let r1 = r0 + dr;
        let rm = r0 + dr * half;
        acc += sixth * (f(r0) + rl::<T>(4.0) * f(rm) + f(r1));
    }
    acc
}
