//! Mean-field solver: minimization of the trapped energy functional by
//! projected imaginary-time flow, and split-step spectral propagation of
//! the time-dependent equation i d/dt psi = -Delta psi + g |psi|^2 psi.

use crate::fft::SpectralEngine;
use crate::field::Field;
use crate::grid::Grid;
use crate::scalar::{ci, rl, Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("coupling must be non-negative, got {0}")]
    NegativeCoupling(f64),
    #[error("field is not normalized (|norm - 1| = {0:e}, limit 1e-8)")]
    NotNormalized(f64),
    #[error("trap must be absent for free evolution")]
    TrapPresent,
    #[error("trap samples must be finite")]
    BadTrap,
    #[error("imaginary-time flow stagnated: residual {residual:e} above tol {tol:e}")]
    Stagnation { residual: f64, tol: f64 },
    #[error("split-step instability: norm drift {drift:e} at step {step}")]
    Instability { step: usize, drift: f64 },
    #[error("requested time not in the sampled window")]
    OutsideWindow,
    #[error("trajectory needs at least {0} samples")]
    TooFewSamples(usize),
}

/// Mean-field parameters: coupling g = 8 pi a and an optional trap.
#[derive(Debug, Clone)]
pub struct GpParams<T: Real> {
    pub coupling: T,
    pub trap: Option<Vec<T>>,
}

impl<T: Real> GpParams<T> {
    pub fn new(coupling: T, trap: Option<Vec<T>>) -> Result<Self, GpError> {
        if coupling < T::zero() {
            return Err(GpError::NegativeCoupling(coupling.to_f64().unwrap_or(f64::NAN)));
        }
        if let Some(t) = &trap {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(GpError::BadTrap);
            }
        }
        Ok(Self { coupling, trap })
    }

    /// Harmonic trap strength * |x - center|^2 sampled on the grid.
    pub fn harmonic_trap(grid: &Grid<T>, strength: T) -> Vec<T> {
        let c = grid.center();
        (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                let r2 = x
                    .iter()
                    .zip(&c)
                    .fold(T::zero(), |acc, (&xi, &ci)| acc + (xi - ci) * (xi - ci));
                strength * r2
            })
            .collect()
    }
}

/// Energy split of the functional int |grad|^2 + V_ext |psi|^2 + (g/2)|psi|^4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub kinetic: T,
    pub trap: T,
    pub interaction: T,
    pub total: T,
}

fn check_normalized<T: Real>(psi: &Field<T>) -> Result<(), GpError> {
    let dev = (psi.norm_l2() - T::one()).abs();
    if dev > rl::<T>(1e-8) {
        return Err(GpError::NotNormalized(dev.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// Energy of a normalized field; kinetic part evaluated spectrally.
pub fn gp_energy<T: Real>(
    psi: &Field<T>,
    params: &GpParams<T>,
    eng: &mut SpectralEngine<T>,
) -> Result<EnergyBreakdown<T>, GpError> {
    check_normalized(psi)?;
    Ok(gp_energy_unchecked(psi, params, eng))
}

pub(crate) fn gp_energy_unchecked<T: Real>(
    psi: &Field<T>,
    params: &GpParams<T>,
    eng: &mut SpectralEngine<T>,
) -> EnergyBreakdown<T> {
    let h_d = psi.grid().cell_volume();
    let kinetic = psi.kinetic_energy(eng);
    let trap = match &params.trap {
        Some(v) => {
            v.iter()
                .zip(psi.values())
                .map(|(&vi, p)| vi * p.norm_sqr())
                .sum::<T>()
                * h_d
        }
        None => T::zero(),
    };
    let quartic = psi.values().iter().map(|p| p.norm_sqr() * p.norm_sqr()).sum::<T>() * h_d;
    let interaction = params.coupling / rl::<T>(2.0) * quartic;
    EnergyBreakdown { kinetic, trap, interaction, total: kinetic + trap + interaction }
}

/// Apply the mean-field Hamiltonian (-Delta + V_ext + g |psi|^2) to psi.
fn apply_h<T: Real>(psi: &Field<T>, params: &GpParams<T>, eng: &mut SpectralEngine<T>) -> Field<T> {
    let mut out = psi.neg_laplacian(eng);
    let g = params.coupling;
    for (i, (o, p)) in out.values_mut().iter_mut().zip(psi.values()).enumerate() {
        let mut v = g * p.norm_sqr();
        if let Some(trap) = &params.trap {
            v += trap[i];
        }
        *o += p.scale(v);
    }
    out
}

/// Euler-Lagrange residual r = (H - mu) psi with mu the Rayleigh quotient;
/// returns (residual field, mu). <psi, r> = 0 by construction.
pub fn gp_gradient<T: Real>(
    psi: &Field<T>,
    params: &GpParams<T>,
    eng: &mut SpectralEngine<T>,
) -> Result<(Field<T>, T), GpError> {
    check_normalized(psi)?;
    let hpsi = apply_h(psi, params, eng);
    let mu = psi.inner(&hpsi).expect("same grid").re;
    let mut r = hpsi;
    r.axpy(C::new(-mu, T::zero()), psi).expect("same grid");
    Ok((r, mu))
}

/// Converged minimizer data.
#[derive(Debug, Clone)]
pub struct GroundState<T: Real> {
    pub field: Field<T>,
    pub energy: EnergyBreakdown<T>,
    pub mu: T,
    pub residual: T,
    pub iterations: usize,
    pub final_dtau: T,
    /// max |psi| on the wrap seam; confinement check for torus runs.
    pub boundary_density: T,
    /// Energies of the accepted steps, non-increasing up to an ulp-level
    /// allowance per step.
    pub energy_history: Vec<T>,
}

/// Projected imaginary-time flow: descent along the Euler-Lagrange residual
/// preconditioned by (1 + dtau |k|^2)^{-1}, with projection back to the
/// sphere and step-size halving on energy increase. The fixed point is the
/// exact discrete minimizer and the accepted energy sequence is
/// non-increasing by construction.
pub fn minimize_imaginary_time<T: Real>(
    params: &GpParams<T>,
    init: Field<T>,
    dtau: T,
    tol: T,
    max_iter: usize,
) -> Result<GroundState<T>, GpError> {
    let grid = init.grid().clone();
    let mut eng = SpectralEngine::for_grid(&grid);
    let mut psi = init;
    psi.normalize().map_err(|_| GpError::NotNormalized(1.0))?;

    let k2 = grid.k_squared_table();
    // constant trap shift in the preconditioner keeps the stiff wall modes
    // inside the contraction region at any step size
    let trap_shift = params
        .trap
        .as_ref()
        .map(|t| t.iter().fold(T::zero(), |a, &b| a.max(b)) * rl::<T>(0.5))
        .unwrap_or(T::zero());
    let mut dt = dtau;
    let dt_min = dtau * rl::<T>(1e-8);
    let mut energy = gp_energy_unchecked(&psi, params, &mut eng);
    let mut iterations = 0;
    let mut history = vec![energy.total];

    // gradient, its preconditioned image, the L2 residual and the
    // P-weighted residual <r, P r>^{1/2}, which is the Lyapunov quantity of
    // the preconditioned descent (the L2 residual may wiggle transiently)
    let precondition = |eng: &mut SpectralEngine<T>, field: &Field<T>, dt: T| -> Field<T> {
        let mut out = field.clone();
        let values = out.values_mut();
        eng.forward(&grid, values);
        for (v, &k2v) in values.iter_mut().zip(&k2) {
            *v = v.scale(T::one() / (T::one() + dt * (k2v + trap_shift)));
        }
        eng.inverse(&grid, values);
        out
    };
    let assess = |eng: &mut SpectralEngine<T>, state: &Field<T>, dt: T| -> (Field<T>, T, T) {
        let (grad, _) = gp_gradient_unchecked(state, params, eng);
        let step = precondition(eng, &grad, dt);
        let res = grad.norm_l2();
        let res_p = grad.inner(&step).expect("same grid").re.max(T::zero()).sqrt();
        (step, res, res_p)
    };

    let (mut step, mut residual, mut residual_p) = assess(&mut eng, &psi, dt);

    while iterations < max_iter && residual > tol {
        iterations += 1;
        let mut cand = psi.clone();
        cand.axpy(C::new(-dt, T::zero()), &step).expect("same grid");
        if cand.normalize().is_err() {
            return Err(GpError::Stagnation { residual: f64::NAN, tol: tol.to_f64().unwrap() });
        }
        let cand_energy = gp_energy_unchecked(&cand, params, &mut eng);
        let (cand_step, cand_residual, cand_residual_p) = assess(&mut eng, &cand, dt);
        // dual gate: a meaningful energy decrease, or contraction of the
        // P-residual with the energy pinned to measurement noise. The
        // energy allowance scales with the summation length (the spectral
        // energy is a sum over all sites) and the contraction allowance with
        // the residual itself, since the constraint projection perturbs the
        // linearized flow at O(r).
        let noise_scale = rl::<T>(32.0 + 8.0 * (grid.len() as f64).sqrt());
        let ulps = (energy.total.abs() + T::one()) * T::epsilon() * noise_scale;
        let energy_drops = cand_energy.total <= energy.total - ulps;
        let slack = rl::<T>(1e-12) + residual_p * rl::<T>(8.0);
        let contracts = cand_residual_p <= residual_p * (T::one() + slack)
            && cand_energy.total <= energy.total + ulps;
        if energy_drops || contracts {
            psi = cand;
            energy = cand_energy;
            step = cand_step;
            residual = cand_residual;
            residual_p = cand_residual_p;
            history.push(energy.total);
            dt = (dt * rl::<T>(1.02)).min(dtau);
        } else {
            dt = dt * rl::<T>(0.5);
            if dt < dt_min {
                break;
            }
            let refreshed = assess(&mut eng, &psi, dt);
            step = refreshed.0;
            residual = refreshed.1;
            residual_p = refreshed.2;
        }
    }

    if residual > tol {
        return Err(GpError::Stagnation {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        });
    }

    // global phase fix: rotate so the lattice sum is real positive
    let total: C<T> = psi
        .values()
        .iter()
        .fold(C::new(T::zero(), T::zero()), |acc, &v| acc + v);
    let phase = total / total.norm();
    psi.scale(phase.conj());

    let (_, mu) = gp_gradient_unchecked(&psi, params, &mut eng);
    let boundary = psi.max_abs_on_boundary();
    Ok(GroundState {
        energy: gp_energy_unchecked(&psi, params, &mut eng),
        mu,
        residual,
        iterations,
        final_dtau: dt,
        boundary_density: boundary,
        energy_history: history,
        field: psi,
    })
}

fn gp_gradient_unchecked<T: Real>(
    psi: &Field<T>,
    params: &GpParams<T>,
    eng: &mut SpectralEngine<T>,
) -> (Field<T>, T) {
    let hpsi = apply_h(psi, params, eng);
    let mu = psi.inner(&hpsi).expect("same grid").re;
    let mut r = hpsi;
    r.axpy(C::new(-mu, T::zero()), psi).expect("same grid");
    (r, mu)
}

/// Sampled trajectory of the free (trap released) evolution.
#[derive(Debug, Clone)]
pub struct GpTrajectory<T: Real> {
    pub coupling: T,
    pub dt: T,
    pub sample_every: usize,
    pub times: Vec<T>,
    pub fields: Vec<Field<T>>,
}

impl<T: Real> GpTrajectory<T> {
    pub fn sample_dt(&self) -> T {
        self.dt * rl::<T>(self.sample_every as f64)
    }

    /// Index of a sampled time, within a half-sample tolerance.
    pub fn index_of(&self, t: T) -> Result<usize, GpError> {
        let sdt = self.sample_dt();
        let idx = (t / sdt).round().to_usize().ok_or(GpError::OutsideWindow)?;
        if idx >= self.times.len() || (self.times[idx] - t).abs() > sdt * rl::<T>(0.25) {
            return Err(GpError::OutsideWindow);
        }
        Ok(idx)
    }
}

/// Strang-split spectral stepper for the trap-free equation. Records every
/// `sample_every`-th state (and always the initial one).
pub fn evolve_split_step<T: Real>(
    psi0: &Field<T>,
    params: &GpParams<T>,
    dt: T,
    n_steps: usize,
    sample_every: usize,
) -> Result<GpTrajectory<T>, GpError> {
    if params.trap.is_some() {
        return Err(GpError::TrapPresent);
    }
    check_normalized(psi0)?;
    let grid = psi0.grid().clone();
    let mut eng = SpectralEngine::for_grid(&grid);
    let g = params.coupling;
    let k2 = grid.k_squared_table();
    let half_kinetic: Vec<C<T>> = k2
        .iter()
        .map(|&k2v| C::from_polar(T::one(), -k2v * dt / rl::<T>(2.0)))
        .collect();
    let every = sample_every.max(1);

    let mut psi = psi0.clone();
    let mut traj = GpTrajectory {
        coupling: g,
        dt,
        sample_every: every,
        times: vec![T::zero()],
        fields: vec![psi.clone()],
    };

    for step in 1..=n_steps {
        {
            let values = psi.values_mut();
            eng.forward(&grid, values);
            for (v, p) in values.iter_mut().zip(&half_kinetic) {
                *v *= *p;
            }
            eng.inverse(&grid, values);
            for v in values.iter_mut() {
                let phase = C::from_polar(T::one(), -g * v.norm_sqr() * dt);
                *v *= phase;
            }
            eng.forward(&grid, values);
            for (v, p) in values.iter_mut().zip(&half_kinetic) {
                *v *= *p;
            }
            eng.inverse(&grid, values);
        }
        let drift = (psi.norm_l2() - T::one()).abs();
        if drift > rl::<T>(1e-6) {
            return Err(GpError::Instability {
                step,
                drift: drift.to_f64().unwrap_or(f64::NAN),
            });
        }
        if step % every == 0 {
            traj.times.push(dt * rl::<T>(step as f64));
            traj.fields.push(psi.clone());
        }
    }
    Ok(traj)
}

/// Spectral Sobolev norm of a field; thin convenience over [`Field`].
pub fn sobolev_norm<T: Real>(psi: &Field<T>, m: usize) -> Result<T, crate::field::FieldError> {
    let mut eng = SpectralEngine::for_grid(psi.grid());
    psi.sobolev_norm(&mut eng, m)
}

/// First time derivative from the equation of motion,
/// d/dt psi = -i (-Delta psi + g |psi|^2 psi), at a sampled time.
pub fn time_derivative_first<T: Real>(
    traj: &GpTrajectory<T>,
    t: T,
) -> Result<Field<T>, GpError> {
    let idx = traj.index_of(t)?;
    Ok(eom_derivative(&traj.fields[idx], traj.coupling))
}

/// Equation-of-motion derivative -i(-Delta psi + g |psi|^2 psi).
pub fn eom_derivative<T: Real>(psi: &Field<T>, g: T) -> Field<T> {
    let mut eng = SpectralEngine::for_grid(psi.grid());
    let mut out = psi.neg_laplacian(&mut eng);
    for (o, p) in out.values_mut().iter_mut().zip(psi.values()) {
        *o += p.scale(g * p.norm_sqr());
    }
    out.scale(-ci::<T>());
    out
}

/// Second time derivative as a centered finite difference of the first-
/// derivative route on neighbouring samples.
pub fn time_derivative_second<T: Real>(
    traj: &GpTrajectory<T>,
    t: T,
) -> Result<Field<T>, GpError> {
    let idx = traj.index_of(t)?;
    if idx == 0 || idx + 1 >= traj.fields.len() {
        return Err(GpError::OutsideWindow);
    }
    let sdt = traj.sample_dt();
    let plus = eom_derivative(&traj.fields[idx + 1], traj.coupling);
    let minus = eom_derivative(&traj.fields[idx - 1], traj.coupling);
    let mut out = plus;
    out.axpy(C::new(-T::one(), T::zero()), &minus).expect("same grid");
    out.scale(C::new(T::one() / (rl::<T>(2.0) * sdt), T::zero()));
    Ok(out)
}

/// Centered finite difference of the trajectory itself; used to cross-check
/// the analytic first derivative at order dt^2.
pub fn time_derivative_fd<T: Real>(traj: &GpTrajectory<T>, t: T) -> Result<Field<T>, GpError> {
    let idx = traj.index_of(t)?;
    if idx == 0 || idx + 1 >= traj.fields.len() {
        return Err(GpError::OutsideWindow);
    }
    let sdt = traj.sample_dt();
    let mut out = traj.fields[idx + 1].clone();
    out.axpy(C::new(-T::one(), T::zero()), &traj.fields[idx - 1]).expect("same grid");
    out.scale(C::new(T::one() / (rl::<T>(2.0) * sdt), T::zero()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_has_zero_energy_without_interaction() {
        let grid = Grid::<f64>::cubic(2, 8, 0.5).unwrap();
        let mut eng = SpectralEngine::for_grid(&grid);
        let psi = Field::constant_normalized(grid);
        let p = GpParams::new(0.0, None).unwrap();
        let e = gp_energy(&psi, &p, &mut eng).unwrap();
        assert!(e.total.abs() < 1e-12);
    }

    #[test]
    fn interaction_of_constant_field_is_g_over_two_vol() {
        let grid = Grid::<f64>::cubic(3, 4, 0.5).unwrap();
        let mut eng = SpectralEngine::for_grid(&grid);
        let psi = Field::constant_normalized(grid.clone());
        let g = 1.7;
        let p = GpParams::new(g, None).unwrap();
        let e = gp_energy(&psi, &p, &mut eng).unwrap();
        let expect = g / 2.0 / grid.volume();
        assert!((e.interaction - expect).abs() < 1e-13);
        assert!((e.total - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_input() {
        let grid = Grid::<f64>::cubic(1, 8, 0.5).unwrap();
        let mut eng = SpectralEngine::for_grid(&grid);
        let mut psi = Field::constant_normalized(grid);
        psi.scale(C::new(1.1, 0.0));
        let p = GpParams::new(0.0, None).unwrap();
        assert!(matches!(gp_energy(&psi, &p, &mut eng), Err(GpError::NotNormalized(_))));
    }

    #[test]
    fn gaussian_in_harmonic_trap_matches_oscillator_energy() {
        // (-Delta + |x|^2) e^{-|x|^2/2} = 3 e^{-|x|^2/2} in 3D
        let grid = Grid::<f64>::cubic(3, 32, 0.375).unwrap();
        let mut eng = SpectralEngine::for_grid(&grid);
        let c = grid.center();
        let psi = Field::gaussian(grid.clone(), &c, 1.0).unwrap();
        let p = GpParams::new(0.0, Some(GpParams::harmonic_trap(&grid, 1.0))).unwrap();
        let e = gp_energy(&psi, &p, &mut eng).unwrap();
        assert!((e.total - 3.0).abs() < 1e-4, "E = {}", e.total);
        let (r, mu) = gp_gradient(&psi, &p, &mut eng).unwrap();
        assert!((mu - 3.0).abs() < 1e-4);
        assert!(r.norm_l2() < 1e-6, "residual {:e}", r.norm_l2());
    }

    #[test]
    fn gradient_is_orthogonal_to_the_state() {
        let grid = Grid::<f64>::cubic(1, 32, 0.3).unwrap();
        let mut eng = SpectralEngine::for_grid(&grid);
        let mut psi = Field::from_fn(grid.clone(), |x| C::new((x[0] * 0.7).sin() + 1.0, 0.2));
        psi.normalize().unwrap();
        let p = GpParams::new(0.8, Some(GpParams::harmonic_trap(&grid, 1.0))).unwrap();
        let (r, _) = gp_gradient(&psi, &p, &mut eng).unwrap();
        assert!(psi.inner(&r).unwrap().norm() < 1e-12);
    }

    #[test]
    fn imaginary_time_reaches_oscillator_ground_state() {
        let grid = Grid::<f64>::cubic(1, 64, 0.25).unwrap();
        let trap = GpParams::harmonic_trap(&grid, 1.0);
        let p = GpParams::new(0.0, Some(trap)).unwrap();
        let c = grid.center();
        let init = Field::gaussian(grid.clone(), &c, 2.0).unwrap();
        let gs = minimize_imaginary_time(&p, init, 0.05, 1e-8, 20_000).unwrap();
        // 1D oscillator ground energy is 1
        assert!((gs.energy.total - 1.0).abs() < 1e-5, "E = {}", gs.energy.total);
        assert!((gs.mu - 1.0).abs() < 1e-5);
        assert!(gs.residual <= 1e-8);
        // positivity after phase fixing
        let min_re = gs.field.values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        let max_im = gs.field.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(min_re > -1e-10);
        assert!(max_im < 1e-10);
    }

    #[test]
    fn free_minimizer_is_the_constant_field() {
        let grid = Grid::<f64>::cubic(1, 16, 0.5).unwrap();
        let p = GpParams::new(0.0, None).unwrap();
        let mut init = Field::from_fn(grid.clone(), |x| C::new(1.0 + 0.3 * (x[0]).cos(), 0.0));
        init.normalize().unwrap();
        let gs = minimize_imaginary_time(&p, init, 0.1, 1e-10, 10_000).unwrap();
        assert!(gs.energy.total.abs() < 1e-10);
    }

    #[test]
    fn accepted_energy_sequence_is_non_increasing() {
        let grid = Grid::<f64>::cubic(1, 32, 0.5).unwrap();
        let trap = GpParams::harmonic_trap(&grid, 1.0);
        let p = GpParams::new(1.5, Some(trap)).unwrap();
        let c = grid.center();
        let init = Field::gaussian(grid.clone(), &c, 2.5).unwrap();
        let gs = minimize_imaginary_time(&p, init, 0.05, 1e-8, 20_000).unwrap();
        let mut worst: f64 = 0.0;
        for w in gs.energy_history.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
        // increases are capped at the documented noise-level allowance
        assert!(worst <= 1e-12, "worst energy increase {worst:e}");
    }

    #[test]
    fn mu_minus_energy_equals_interaction() {
        let grid = Grid::<f64>::cubic(1, 64, 0.25).unwrap();
        let trap = GpParams::harmonic_trap(&grid, 1.0);
        let p = GpParams::new(2.0, Some(trap)).unwrap();
        let c = grid.center();
        let init = Field::gaussian(grid.clone(), &c, 1.0).unwrap();
        let gs = minimize_imaginary_time(&p, init, 0.05, 1e-8, 20_000).unwrap();
        // mu = E + (g/2) int |psi|^4
        assert!((gs.mu - gs.energy.total - gs.energy.interaction).abs() < 1e-8);
    }

    #[test]
    fn plane_wave_evolves_by_pure_phase() {
        let grid = Grid::<f64>::cubic(1, 16, 0.5).unwrap();
        let psi0 = Field::plane_wave(grid.clone(), &[2]);
        let p = GpParams::new(0.0, None).unwrap();
        let dt = 1e-3;
        let traj = evolve_split_step(&psi0, &p, dt, 100, 10).unwrap();
        let k2 = grid.wavenumber(0, 2).powi(2);
        for (t, f) in traj.times.iter().zip(&traj.fields) {
            let phase = C::from_polar(1.0, -k2 * t);
            for (got, init) in f.values().iter().zip(psi0.values()) {
                assert!((got - init * phase).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_and_energy_conserved_on_nonlinear_run() {
        let grid = Grid::<f64>::cubic(1, 64, 0.25).unwrap();
        let mut psi0 = Field::from_fn(grid.clone(), |x| {
            C::new(1.0 + 0.2 * (2.0 * std::f64::consts::PI * x[0] / 16.0).cos(), 0.0)
        });
        psi0.normalize().unwrap();
        let p = GpParams::new(1.0, None).unwrap();
        let mut eng = SpectralEngine::for_grid(&grid);
        let e0 = gp_energy(&psi0, &p, &mut eng).unwrap().total;
        let traj = evolve_split_step(&psi0, &p, 5e-4, 2000, 200).unwrap();
        let last = traj.fields.last().unwrap();
        assert!((last.norm_l2() - 1.0).abs() < 1e-10);
        let e1 = gp_energy(last, &p, &mut eng).unwrap().total;
        assert!(((e1 - e0) / e0).abs() < 1e-8, "energy drift {:e}", e1 - e0);
    }

    #[test]
    fn trap_rejected_in_evolution() {
        let grid = Grid::<f64>::cubic(1, 8, 0.5).unwrap();
        let psi = Field::constant_normalized(grid.clone());
        let p = GpParams::new(0.0, Some(vec![0.0; grid.len()])).unwrap();
        assert!(matches!(
            evolve_split_step(&psi, &p, 1e-3, 1, 1),
            Err(GpError::TrapPresent)
        ));
    }

    #[test]
    fn analytic_derivative_matches_finite_difference_at_order_two() {
        let grid = Grid::<f64>::cubic(1, 32, 0.25).unwrap();
        let mut psi0 = Field::from_fn(grid.clone(), |x| {
            C::new(1.0 + 0.3 * (2.0 * std::f64::consts::PI * x[0] / 8.0).cos(), 0.0)
        });
        psi0.normalize().unwrap();
        let p = GpParams::new(1.0, None).unwrap();

        let err_at = |dt: f64| {
            let traj = evolve_split_step(&psi0, &p, dt, 4, 1).unwrap();
            let t = 2.0 * dt;
            let analytic = time_derivative_first(&traj, t).unwrap();
            let fd = time_derivative_fd(&traj, t).unwrap();
            let mut diff = analytic;
            diff.axpy(C::new(-1.0, 0.0), &fd).unwrap();
            diff.norm_l2()
        };
        let e1 = err_at(2e-3);
        let e2 = err_at(1e-3);
        let order = (e1 / e2).log2();
        assert!(order > 1.7, "observed order {order}");
    }

    #[test]
    fn mass_conservation_makes_dt_overlap_imaginary() {
        let grid = Grid::<f64>::cubic(1, 32, 0.25).unwrap();
        let mut psi0 = Field::from_fn(grid.clone(), |x| {
            C::new(1.0 + 0.25 * (x[0] * 0.785).cos(), 0.1 * (x[0] * 0.393).sin())
        });
        psi0.normalize().unwrap();
        let p = GpParams::new(0.7, None).unwrap();
        let traj = evolve_split_step(&psi0, &p, 1e-3, 10, 1).unwrap();
        let dpsi = time_derivative_first(&traj, 5e-3).unwrap();
        let overlap = dpsi.inner(&traj.fields[5]).unwrap();
        assert!(overlap.re.abs() < 1e-10, "Re<dpsi, psi> = {}", overlap.re);
    }
}
