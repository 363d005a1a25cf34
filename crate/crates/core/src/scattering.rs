//! Zero-energy s-wave scattering for radial, compactly supported,
//! non-negative potentials: -2 Delta f + V f = 0 with f -> 1 at infinity.
//!
//! The substitution u = r f removes the origin singularity; u solves
//! u'' = (V/2) u with u(0) = 0, and outside the support u is exactly affine,
//! u(r) = alpha (r - a). The scattering length is extracted three independent
//! ways (ODE asymptote, variational minimization, the integral identity
//! int V f = 8 pi a) and the routes are cross-checked in the test suites.

use crate::radial::{integrate_radial, RadialPotential};
use crate::scalar::{rl, Real};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScatteringError {
    #[error("r_max = {r_max} must exceed twice the support radius {support}")]
    RangeTooShort { r_max: f64, support: f64 },
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("outward integration diverged (u not finite at r = {r})")]
    Diverged { r: f64 },
    #[error("asymptote residual {residual:e} exceeds the requested tolerance {tol:e}")]
    NoAsymptote { residual: f64, tol: f64 },
    #[error("no samples beyond the potential support: empty asymptotic region")]
    EmptyAsymptoticRegion,
    #[error("trial family must have at least one member")]
    EmptyTrialFamily,
}

/// Solved zero-energy scattering problem on [0, r_max].
///
/// `f = u / r` is normalized so that `u(r) = r - a` outside the support;
/// `f(0)` stores the finite limit `u'(0)`.
#[derive(Debug, Clone)]
pub struct ScatteringSolution<T: Real> {
    dr: T,
    f_samples: Vec<T>,
    u_samples: Vec<T>,
    uprime_samples: Vec<T>,
    a: T,
    support_radius: T,
}

impl<T: Real> ScatteringSolution<T> {
    pub fn scattering_length(&self) -> T {
        self.a
    }

    pub fn dr(&self) -> T {
        self.dr
    }

    pub fn r_max(&self) -> T {
        rl::<T>((self.f_samples.len() - 1) as f64) * self.dr
    }

    pub fn support_radius(&self) -> T {
        self.support_radius
    }

    pub fn f_samples(&self) -> &[T] {
        &self.f_samples
    }

    pub fn u_samples(&self) -> &[T] {
        &self.u_samples
    }

    /// f(r) by local cubic (Catmull-Rom) interpolation of the samples,
    /// clamped to 1 beyond the solved range.
    pub fn f_at(&self, r: T) -> T {
        interp_cubic(&self.f_samples, self.dr, r, T::one())
    }

    /// Radial derivative f'(r); zero beyond the solved range, consistent
    /// with the clamp of `f_at`.
    pub fn f_prime_at(&self, r: T) -> T {
        let n = self.f_samples.len();
        let fp: Vec<T> = (0..n)
            .map(|i| {
                if i == 0 {
                    T::zero()
                } else {
                    let ri = rl::<T>(i as f64) * self.dr;
                    (self.uprime_samples[i] * ri - self.u_samples[i]) / (ri * ri)
                }
            })
            .collect();
        interp_cubic(&fp, self.dr, r, T::zero())
    }

    /// Sample-wise invariant violations (0 <= f <= 1, monotone f, affine
    /// tail); empty when the solution is healthy.
    pub fn validate(&self, tail_tol: T) -> Vec<String> {
        let mut issues = Vec::new();
        let eps = rl::<T>(1e-12);
        for (i, &f) in self.f_samples.iter().enumerate() {
            if f < -eps || f > T::one() + eps {
                issues.push(format!("f out of [0,1] at sample {i}: {f:?}"));
                break;
            }
        }
        for (i, w) in self.f_samples.windows(2).enumerate() {
            if w[1] < w[0] - eps {
                issues.push(format!("f decreases between samples {i} and {}", i + 1));
                break;
            }
        }
        let res = asymptote_residual_of(self);
        if res > tail_tol {
            issues.push(format!("asymptote residual {res:?} above {tail_tol:?}"));
        }
        issues
    }
}

/// Solve u'' = (V/2) u outward with RK4 on the sampled support, extend by
/// the exact affine tail, and normalize by the least-squares asymptote.
pub fn solve_zero_energy<T: Real>(
    potential: &RadialPotential<T>,
    r_max: T,
    tol: T,
) -> Result<ScatteringSolution<T>, ScatteringError> {
    if !(tol > T::zero()) {
        return Err(ScatteringError::BadTolerance);
    }
    let support = potential.support_radius();
    let dr = potential.dr();
    if !(r_max > rl::<T>(2.0) * support) || !(r_max > dr) {
        return Err(ScatteringError::RangeTooShort {
            r_max: r_max.to_f64().unwrap_or(f64::NAN),
            support: support.to_f64().unwrap_or(f64::NAN),
        });
    }

    let n_total = (r_max / dr).ceil().to_usize().unwrap();
    let n_support = ((potential.sampled_radius() / dr).round().to_usize().unwrap()).min(n_total);

    let mut u = vec![T::zero(); n_total + 1];
    let mut up = vec![T::zero(); n_total + 1];
    up[0] = T::one();

    if potential.is_zero() {
        // free equation: u = r exactly
        for i in 0..=n_total {
            u[i] = rl::<T>(i as f64) * dr;
            up[i] = T::one();
        }
        let f = (0..=n_total).map(|i| if i == 0 { T::one() } else { T::one() }).collect();
        return Ok(ScatteringSolution {
            dr,
            f_samples: f,
            u_samples: u,
            uprime_samples: up,
            a: T::zero(),
            support_radius: support,
        });
    }

    // RK4 across the sampled support; the half-step potential is the linear
    // interpolant, exact for the piecewise-linear V.
    let half = rl::<T>(0.5);
    let sixth = rl::<T>(1.0 / 6.0);
    let w = |r: T| potential.value_at(r) * half;
    for i in 0..n_support {
        let r0 = rl::<T>(i as f64) * dr;
        let (y, yp) = (u[i], up[i]);
        let k1 = (yp, w(r0) * y);
        let k2 = (yp + dr * half * k1.1, w(r0 + dr * half) * (y + dr * half * k1.0));
        let k3 = (yp + dr * half * k2.1, w(r0 + dr * half) * (y + dr * half * k2.0));
        let k4 = (yp + dr * k3.1, w(r0 + dr) * (y + dr * k3.0));
        u[i + 1] = y + dr * sixth * (k1.0 + rl::<T>(2.0) * (k2.0 + k3.0) + k4.0);
        up[i + 1] = yp + dr * sixth * (k1.1 + rl::<T>(2.0) * (k2.1 + k3.1) + k4.1);
        if !u[i + 1].is_finite() || !up[i + 1].is_finite() {
            return Err(ScatteringError::Diverged {
                r: (rl::<T>((i + 1) as f64) * dr).to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    // exact affine continuation beyond the sampled support
    let (u_end, up_end) = (u[n_support], up[n_support]);
    let r_end = rl::<T>(n_support as f64) * dr;
    for i in (n_support + 1)..=n_total {
        let r = rl::<T>(i as f64) * dr;
        u[i] = u_end + up_end * (r - r_end);
        up[i] = up_end;
    }

    // least-squares affine fit u = alpha r + beta on the outer third of
    // (support, r_max]
    let fit_from = support + (r_max - support) * rl::<T>(2.0 / 3.0);
    let i_from = ((fit_from / dr).ceil().to_usize().unwrap()).min(n_total);
    let mut sums = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for i in i_from..=n_total {
        let r = rl::<T>(i as f64) * dr;
        sums.0 += T::one();
        sums.1 += r;
        sums.2 += r * r;
        sums.3 += u[i];
        sums.4 += r * u[i];
    }
    let det = sums.0 * sums.2 - sums.1 * sums.1;
    let alpha = (sums.0 * sums.4 - sums.1 * sums.3) / det;
    let beta = (sums.2 * sums.3 - sums.1 * sums.4) / det;
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(ScatteringError::Diverged { r: f64::NAN });
    }
    let a = -beta / alpha;

    let inv_alpha = T::one() / alpha;
    let mut f = vec![T::zero(); n_total + 1];
    for i in 0..=n_total {
        u[i] *= inv_alpha;
        up[i] *= inv_alpha;
        f[i] = if i == 0 { up[0] } else { u[i] / (rl::<T>(i as f64) * dr) };
    }

    let sol = ScatteringSolution {
        dr,
        f_samples: f,
        u_samples: u,
        uprime_samples: up,
        a,
        support_radius: support,
    };
    let residual = asymptote_residual_of(&sol);
    if residual > tol {
        return Err(ScatteringError::NoAsymptote {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(sol)
}

/// max over r in (support, r_max] of |f(r) - (1 - a/r)|.
pub fn asymptote_residual<T: Real>(sol: &ScatteringSolution<T>) -> Result<T, ScatteringError> {
    let n = sol.f_samples.len() - 1;
    let i_from = (sol.support_radius / sol.dr).floor().to_usize().unwrap() + 1;
    if i_from > n {
        return Err(ScatteringError::EmptyAsymptoticRegion);
    }
    Ok(asymptote_residual_of(sol))
}

fn asymptote_residual_of<T: Real>(sol: &ScatteringSolution<T>) -> T {
    let n = sol.f_samples.len() - 1;
    let i_from = (sol.support_radius / sol.dr).floor().to_usize().unwrap_or(0) + 1;
    let mut worst = T::zero();
    for i in i_from..=n {
        let r = rl::<T>(i as f64) * sol.dr;
        let expect = T::one() - sol.a / r;
        worst = worst.max((sol.f_samples[i] - expect).abs());
    }
    worst
}

/// Scattering length through the integral identity int V f dx = 8 pi a,
/// evaluated with the solver's own samples.
pub fn scattering_length_integral_identity<T: Real>(
    potential: &RadialPotential<T>,
    sol: &ScatteringSolution<T>,
) -> T {
    let n = (potential.sampled_radius() / potential.dr())
        .round()
        .to_usize()
        .unwrap();
    let integral = integrate_radial(n, potential.dr(), |r| {
        potential.value_at(r) * sol.f_at(r) * r * r
    });
    let four_pi = rl::<T>(4.0) * T::PI();
    four_pi * integral / (rl::<T>(8.0) * T::PI())
}

/// Upper bound on the scattering length by minimizing
/// (1/8pi) int (2 |f'|^2 + V f^2) over two parametric trial families:
/// square-well profiles (contains the exact shape for well potentials) and
/// hard-cutoff profiles 1 - b/max(r, r0).
pub fn scattering_length_variational<T: Real>(
    potential: &RadialPotential<T>,
    trial_family_size: usize,
) -> Result<T, ScatteringError> {
    if trial_family_size == 0 {
        return Err(ScatteringError::EmptyTrialFamily);
    }
    if potential.is_zero() {
        return Ok(T::zero());
    }
    let support = potential.support_radius();
    let vmax = potential
        .samples()
        .iter()
        .fold(T::zero(), |acc, &v| acc.max(v));

    // family A: zero-energy square-well profile with curvature parameter c
    let energy_a = |c: T| trial_energy_well(potential, support, c);
    let c_star = (vmax / rl::<T>(2.0)).sqrt();
    let c_lo = c_star * rl::<T>(0.05);
    let c_hi = c_star * rl::<T>(3.0) + rl::<T>(1e-3);
    let mut best = energy_a(c_star);
    let m = trial_family_size;
    for i in 0..m {
        let t = rl::<T>((i as f64 + 0.5) / m as f64);
        let c = c_lo + (c_hi - c_lo) * t;
        best = best.min(golden_min(&energy_a, c * rl::<T>(0.8), c * rl::<T>(1.25), 60));
    }

    // family B: hard cutoff 1 - b/max(r, r0)
    for i in 0..m {
        let t = rl::<T>((i as f64 + 1.0) / (m as f64 + 1.0));
        let r0 = support * t;
        if !(r0 > T::zero()) {
            continue;
        }
        let energy_b = |b: T| trial_energy_cutoff(potential, support, b, r0);
        best = best.min(golden_min(&energy_b, T::zero(), support, 60));
    }

    Ok(best / (rl::<T>(8.0) * T::PI()))
}

/// Quoted functional int (2|grad f|^2 + V f^2) for the square-well trial
/// profile: u_c(r) = sinh(c r)/(c cosh(c R)) inside, r - a_c outside.
fn trial_energy_well<T: Real>(potential: &RadialPotential<T>, support: T, c: T) -> T {
    let four_pi = rl::<T>(4.0) * T::PI();
    if !(c > T::zero()) {
        // c -> 0 limit: f == 1 inside, a = 0
        let n = (potential.sampled_radius() / potential.dr()).round().to_usize().unwrap();
        return four_pi * integrate_radial(n, potential.dr(), |r| potential.value_at(r) * r * r);
    }
    let cr = c * support;
    let a_c = support - cr.tanh() / c;
    let cosh_cr = cr.cosh();
    let f = |r: T| {
        if r <= T::zero() {
            T::one() / cosh_cr
        } else if r <= support {
            (c * r).sinh() / (c * r * cosh_cr)
        } else {
            T::one() - a_c / r
        }
    };
    let fp = |r: T| {
        if r <= T::zero() {
            T::zero()
        } else if r <= support {
            (c * (c * r).cosh() * r - (c * r).sinh()) / (c * r * r * cosh_cr)
        } else {
            a_c / (r * r)
        }
    };
    let n = (potential.sampled_radius() / potential.dr()).round().to_usize().unwrap();
    let inner = integrate_radial(n, potential.dr(), |r| {
        let fr = f(r);
        (rl::<T>(2.0) * fp(r) * fp(r) + potential.value_at(r) * fr * fr) * r * r
    });
    // analytic tail: V = 0, f = 1 - a/r beyond the support
    let tail = rl::<T>(2.0) * a_c * a_c / support;
    four_pi * (inner + tail)
}

/// Same functional for the hard-cutoff profile f = 1 - b/max(r, r0).
fn trial_energy_cutoff<T: Real>(potential: &RadialPotential<T>, support: T, b: T, r0: T) -> T {
    let four_pi = rl::<T>(4.0) * T::PI();
    let f = |r: T| T::one() - b / r.max(r0);
    let n = (potential.sampled_radius() / potential.dr()).round().to_usize().unwrap();
    let v_part = integrate_radial(n, potential.dr(), |r| {
        let fr = f(r);
        potential.value_at(r) * fr * fr * r * r
    });
    // kinetic part: zero inside r0, 2 b^2 / r^4 * r^2 outside, integrated to
    // infinity in closed form; the [r0, support] piece overlaps the sampled
    // range, the rest is the analytic tail
    let kinetic = rl::<T>(2.0) * b * b / r0;
    let _ = support;
    four_pi * (v_part + kinetic)
}

fn golden_min<T: Real>(f: &impl Fn(T) -> T, mut lo: T, mut hi: T, iters: usize) -> T {
    let phi = rl::<T>(0.618_033_988_749_894_9);
    let mut x1 = hi - (hi - lo) * phi;
    let mut x2 = lo + (hi - lo) * phi;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * phi;
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * phi;
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

/// Local cubic (Catmull-Rom) interpolation on a uniform grid with a constant
/// continuation beyond the last sample.
fn interp_cubic<T: Real>(samples: &[T], dr: T, r: T, beyond: T) -> T {
    let n = samples.len();
    if r <= T::zero() {
        return samples[0];
    }
    let x = r / dr;
    let i = x.floor().to_usize().unwrap_or(usize::MAX);
    if i >= n - 1 {
        if i == n - 1 && (x - x.floor()) == T::zero() {
            return samples[n - 1];
        }
        return beyond;
    }
    let t = x - x.floor();
    let ym = if i == 0 { samples[0] * rl::<T>(2.0) - samples[1] } else { samples[i - 1] };
    let y0 = samples[i];
    let y1 = samples[i + 1];
    let yp = if i + 2 < n { samples[i + 2] } else { samples[n - 1] * rl::<T>(2.0) - samples[n - 2] };
    let half = rl::<T>(0.5);
    let a = (-ym + rl::<T>(3.0) * (y0 - y1) + yp) * half;
    let b = ym - rl::<T>(2.5) * y0 + rl::<T>(2.0) * y1 - yp * half;
    let c = (y1 - ym) * half;
    ((a * t + b) * t + c) * t + y0
}

/// Closed-form oracle for the square well: a = R - tanh(kappa R)/kappa with
/// kappa = sqrt(depth/2). Kept in the library so the CLI and the tests quote
/// the same matching solution.
pub fn square_well_scattering_length<T: Real>(depth: T, radius: T) -> T {
    if depth <= T::zero() {
        return T::zero();
    }
    let kappa = (depth / rl::<T>(2.0)).sqrt();
    radius - (kappa * radius).tanh() / kappa
}
