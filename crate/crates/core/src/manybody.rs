//! Exact treatment of the N-boson lattice problem on small sectors: the
//! second-quantized Hamiltonian with GP-scaled pair interaction, Lanczos
//! ground states, Krylov time evolution, reduced one-body densities and
//! condensate depletion, and the correlated product ansatz.

use crate::dense::CMatrix;
use crate::field::Field;
use crate::fock::{
    annihilate_field, laplacian_matrix, op_quadratic, FockVector, SectorBasis, SparseOperator,
};
use crate::grid::Grid;
use crate::krylov::expm_step;
use crate::lanczos::{extremal_eigenpair, Extremal};
use crate::radial::RadialPotential;
use crate::scalar::{rl, Real, C};
use crate::scattering::ScatteringSolution;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManyBodyError {
    #[error(transparent)]
    Basis(#[from] crate::fock::BasisError),
    #[error(transparent)]
    Ops(#[from] crate::fock::OpsError),
    #[error("eigensolver failed: {0}")]
    Eigensolver(#[from] crate::lanczos::LanczosError),
    #[error("ground-state residual {residual:e} above tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("norm drift {drift:e} beyond limit at step {step}")]
    NormDrift { step: usize, drift: f64 },
    #[error("state has vanishing norm")]
    VanishingNorm,
    #[error("mean-field reference failed: {0}")]
    MeanField(String),
    #[error("trajectories are not sampled on the same times")]
    Desync,
    #[error("trap samples must match the grid")]
    BadTrap,
}

/// Configuration of one lattice N-boson problem. The pair interaction is
/// sampled at minimum-image distance as (w^d / N) V(w |x-y|), which keeps
/// the two-body integral scaling ||V||/N of the dilute regime in every
/// dimension; the width w defaults to N, reproducing N^2 V(N.) exactly in
/// three dimensions. Overriding w keeps the potential resolved on coarse
/// testbed lattices.
#[derive(Debug, Clone)]
pub struct ManyBodyConfig<T: Real> {
    pub grid: Grid<T>,
    pub particles: usize,
    pub potential: RadialPotential<T>,
    pub interaction_width: Option<T>,
    pub trap: Option<Vec<T>>,
    pub dimension_cap: usize,
}

impl<T: Real> ManyBodyConfig<T> {
    pub fn new(grid: Grid<T>, particles: usize, potential: RadialPotential<T>) -> Self {
        Self {
            grid,
            particles,
            potential,
            interaction_width: None,
            trap: None,
            dimension_cap: 2_000_000,
        }
    }

    pub fn width(&self) -> T {
        self.interaction_width
            .unwrap_or_else(|| rl::<T>(self.particles as f64))
    }

    /// Amplitude w^d / N of the sampled pair potential.
    pub fn pair_amplitude(&self) -> T {
        let w = self.width();
        w.powi(self.grid.dim() as i32) / rl::<T>(self.particles as f64)
    }

    /// The sampled pair-potential matrix used by the Hamiltonian assembly.
    pub fn pair_matrix(&self) -> CMatrix<T> {
        pair_potential_matrix(&self.grid, &self.potential, self.width(), self.pair_amplitude())
    }

    pub fn basis(&self) -> Result<Arc<SectorBasis>, ManyBodyError> {
        Ok(Arc::new(SectorBasis::new(
            self.grid.len(),
            self.particles,
            self.dimension_cap,
        )?))
    }
}

/// amplitude * V(width * d(x, y)) as a real symmetric matrix over site
/// pairs (minimum-image metric).
pub fn pair_potential_matrix<T: Real>(
    grid: &Grid<T>,
    potential: &RadialPotential<T>,
    width: T,
    amplitude: T,
) -> CMatrix<T> {
    let m = grid.len();
    CMatrix::from_fn(m, m, |i, j| {
        let d = grid.min_image_distance(i, j);
        C::new(amplitude * potential.value_at(width * d), T::zero())
    })
}

/// Diagonal of the normal-ordered pair interaction
/// (1/2) sum_xy v(x,y) a*_x a*_y a_y a_x in the occupation basis: the sum
/// of v over unordered occupied pairs.
fn interaction_diagonal<T: Real>(basis: &SectorBasis, v: &CMatrix<T>) -> Vec<T> {
    (0..basis.dim())
        .map(|s| {
            let state = basis.state(s);
            let mut acc = T::zero();
            for (p, &a) in state.iter().enumerate() {
                for &b in &state[p + 1..] {
                    acc += v[(a as usize, b as usize)].re;
                }
            }
            acc
        })
        .collect()
}

/// Assemble H = sum (-Delta + trap) + (1/2) sum N^2 V(N(x-y)) a*a*aa on the
/// configured sector. Real symmetric in the occupation basis.
pub fn build_h<T: Real>(
    cfg: &ManyBodyConfig<T>,
    basis: &SectorBasis,
) -> Result<SparseOperator<T>, ManyBodyError> {
    if let Some(t) = &cfg.trap {
        if t.len() != cfg.grid.len() {
            return Err(ManyBodyError::BadTrap);
        }
    }
    let mut one_body = laplacian_matrix(&cfg.grid);
    if let Some(trap) = &cfg.trap {
        for (i, &v) in trap.iter().enumerate() {
            one_body[(i, i)] += C::new(v, T::zero());
        }
    }
    let kinetic = op_quadratic(basis, &one_body)?;

    let v = cfg.pair_matrix();
    let diag = interaction_diagonal(basis, &v);
    let id = crate::fock::ops::basis_id(basis);
    let triplets = diag
        .iter()
        .enumerate()
        .map(|(i, &d)| (i as u32, i as u32, C::new(d, T::zero())))
        .collect();
    let interaction = SparseOperator::from_triplets(id, id, triplets);
    Ok(kinetic.add(&interaction).expect("same sector"))
}

/// Lanczos lowest eigenpair with a certified residual ||H psi - E psi||.
pub fn ground_state<T: Real>(
    h: &SparseOperator<T>,
    basis: Arc<SectorBasis>,
    tol: T,
    max_iter: usize,
) -> Result<(T, FockVector<T>), ManyBodyError> {
    let result = extremal_eigenpair(h, Extremal::Smallest, tol, max_iter, None)?;
    if result.residual > tol {
        return Err(ManyBodyError::ResidualTooLarge {
            residual: result.residual.to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((result.value, FockVector::new(basis, result.vector)))
}

/// Sampled many-body trajectory under exp(-i H t).
#[derive(Debug, Clone)]
pub struct MbTrajectory<T: Real> {
    pub dt: T,
    pub sample_every: usize,
    pub times: Vec<T>,
    pub states: Vec<FockVector<T>>,
    pub max_norm_drift: T,
}

/// Krylov propagation with per-step norm monitoring.
pub fn evolve<T: Real>(
    h: &SparseOperator<T>,
    psi0: &FockVector<T>,
    dt: T,
    n_steps: usize,
    sample_every: usize,
    krylov_dim: usize,
) -> Result<MbTrajectory<T>, ManyBodyError> {
    let every = sample_every.max(1);
    let mut psi = psi0.clone();
    let mut traj = MbTrajectory {
        dt,
        sample_every: every,
        times: vec![T::zero()],
        states: vec![psi.clone()],
        max_norm_drift: T::zero(),
    };
    for step in 1..=n_steps {
        let next =
            expm_step(h, psi.coeffs(), dt, krylov_dim).map_err(|_| ManyBodyError::VanishingNorm)?;
        psi = FockVector::new(psi.basis().clone(), next);
        let drift = (psi.norm() - T::one()).abs();
        traj.max_norm_drift = traj.max_norm_drift.max(drift);
        if drift > rl::<T>(1e-6) {
            return Err(ManyBodyError::NormDrift {
                step,
                drift: drift.to_f64().unwrap_or(f64::NAN),
            });
        }
        if step % every == 0 {
            traj.times.push(dt * rl::<T>(step as f64));
            traj.states.push(psi.clone());
        }
    }
    Ok(traj)
}

/// One-body reduced density gamma_ij = <a*_j a_i> / N as an operator matrix
/// on sample vectors: Hermitian, PSD, unit trace.
pub fn reduced_density<T: Real>(psi: &FockVector<T>) -> CMatrix<T> {
    let basis = psi.basis();
    let m = basis.modes();
    let n = basis.particles();
    if n == 0 {
        return CMatrix::zeros(m, m);
    }
    let lower = SectorBasis::new(m, n - 1, usize::MAX).expect("lower sector exists");
    let mut bank = vec![vec![C::new(T::zero(), T::zero()); lower.dim()]; m];
    let mut target = Vec::with_capacity(n.saturating_sub(1));
    for (j, &c) in psi.coeffs().iter().enumerate() {
        if c.re == T::zero() && c.im == T::zero() {
            continue;
        }
        let state = basis.state(j);
        let mut prev: Option<u16> = None;
        for (pos, &mode) in state.iter().enumerate() {
            if prev == Some(mode) {
                continue;
            }
            prev = Some(mode);
            let occ = basis.occupancy(j, mode);
            target.clear();
            target.extend_from_slice(&state[..pos]);
            target.extend_from_slice(&state[pos + 1..]);
            let i = lower.index_of(&target).expect("annihilation target");
            bank[mode as usize][i] += c.scale(rl::<T>(occ as f64).sqrt());
        }
    }
    let inv_n = T::one() / rl::<T>(n as f64);
    CMatrix::from_fn(m, m, |i, j| {
        bank[j]
            .iter()
            .zip(&bank[i])
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v)
            .scale(inv_n)
    })
}

/// Both evaluation routes for the condensate depletion
/// 1 - <phi, gamma phi> = <N_perp>/N.
#[derive(Debug, Clone, Copy)]
pub struct Depletion<T> {
    pub via_density: T,
    pub via_number: T,
}

pub fn depletion<T: Real>(
    psi: &FockVector<T>,
    phi_ref: &Field<T>,
) -> Result<Depletion<T>, ManyBodyError> {
    let basis = psi.basis();
    let n = basis.particles();
    let gamma = reduced_density(psi);
    let h_d = phi_ref.grid().cell_volume();
    let gphi = gamma.matvec(phi_ref.values());
    let overlap = phi_ref
        .values()
        .iter()
        .zip(&gphi)
        .map(|(a, b)| a.conj() * b)
        .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v)
        .scale(h_d);
    let via_density = T::one() - overlap.re;

    let lower = SectorBasis::new(basis.modes(), n - 1, usize::MAX)?;
    let aphi = annihilate_field(basis, &lower, phi_ref)?;
    let v = aphi.apply_rect(psi.coeffs());
    let cond = v.iter().map(|z| z.norm_sqr()).sum::<T>();
    let via_number = T::one() - cond / rl::<T>(n as f64);
    Ok(Depletion { via_density, via_number })
}

/// First-quantized correlated ansatz prod_{i<j} f(w(x_i - x_j)) phi^{(x) N},
/// symmetrized onto the occupation basis and normalized.
pub fn correlated_product_state<T: Real>(
    basis: Arc<SectorBasis>,
    phi: &Field<T>,
    sol: &ScatteringSolution<T>,
    width: T,
) -> Result<FockVector<T>, ManyBodyError> {
    let grid = phi.grid();
    let amp = grid.cell_volume().sqrt();
    let mut coeffs = Vec::with_capacity(basis.dim());
    for s in 0..basis.dim() {
        let state = basis.state(s);
        let mut c = C::new(rl::<T>(basis.multiplicity(s)).sqrt(), T::zero());
        for &m in state {
            c *= phi.values()[m as usize].scale(amp);
        }
        let mut jastrow = T::one();
        for (p, &a) in state.iter().enumerate() {
            for &b in &state[p + 1..] {
                let d = grid.min_image_distance(a as usize, b as usize);
                jastrow *= sol.f_at(width * d);
            }
        }
        coeffs.push(c.scale(jastrow));
    }
    let mut out = FockVector::new(basis, coeffs);
    out.normalize().map_err(|_| ManyBodyError::VanishingNorm)?;
    Ok(out)
}

/// One sample of the Gronwall monitor along synchronized trajectories.
#[derive(Debug, Clone, Copy)]
pub struct DepletionRecord<T> {
    pub t: T,
    pub depletion: T,
    pub n_perp_expect: T,
    pub gronwall_value: T,
    pub energy: T,
}

/// Output of the Gronwall monitor: the records, the measured domination
/// constant, the fitted growth rate of ln G, and the two checks.
#[derive(Debug, Clone)]
pub struct GronwallReport<T> {
    pub records: Vec<DepletionRecord<T>>,
    pub constant: T,
    pub fitted_rate: T,
    /// G(t) <= G(0) exp(e^{ct} - 1) for the fitted rate c.
    pub gronwall_bound_holds: bool,
    /// <N_perp>(t) <= G(t) at every sample (domination by the certificate).
    pub dominates_excitations: bool,
}

/// Evaluate G(t) = <cH + Q_ren + C (N_ren + 1)> along a many-body
/// trajectory against its synchronized mean-field reference. The constant
/// C is measured (smallest PSD certificate over the samples) unless given.
pub fn gronwall_monitor<T: Real>(
    mb_traj: &MbTrajectory<T>,
    gp_traj: &crate::gp::GpTrajectory<T>,
    h_bare: &SparseOperator<T>,
    sol: &ScatteringSolution<T>,
    cutoff: T,
    constant: Option<T>,
) -> Result<GronwallReport<T>, ManyBodyError> {
    use crate::renorm::{
        build_kernel, kernel_time_derivatives, measure_domination_constant, RenormSetup,
        SectorChain,
    };
    if mb_traj.times.len() != gp_traj.times.len() {
        return Err(ManyBodyError::Desync);
    }
    for (a, b) in mb_traj.times.iter().zip(&gp_traj.times) {
        if (*a - *b).abs() > rl::<T>(1e-10) {
            return Err(ManyBodyError::Desync);
        }
    }
    let basis = mb_traj.states[0].basis().clone();
    let n = basis.particles();
    let g = gp_traj.coupling;
    let scale = n;

    // per-sample operator set
    let mut ops = Vec::new();
    for phi in &gp_traj.fields {
        let chain = SectorChain::new(basis.modes(), n, usize::MAX)
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let setup = RenormSetup::new(chain, phi.clone())
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let dphi = crate::gp::eom_derivative(phi, g);
        let kernel = build_kernel(phi, sol, scale, cutoff)
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let (dkernel, _) = kernel_time_derivatives(phi, &dphi, None, sol, scale, cutoff)
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let mut eng = crate::fft::SpectralEngine::for_grid(phi.grid());
        let kin = phi.kinetic_energy(&mut eng);
        let quart = phi
            .values()
            .iter()
            .map(|z| z.norm_sqr() * z.norm_sqr())
            .sum::<T>()
            * phi.grid().cell_volume();
        let e_gp = kin + g / rl::<T>(2.0) * quart;
        let ch = setup
            .build_ch(h_bare, &dphi, e_gp)
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let n_ren = setup
            .build_n_ren(&kernel)
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let q_ren = setup
            .build_q_ren(&dkernel)
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let nperp = setup
            .excitation_number()
            .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        ops.push((ch, q_ren, n_ren, nperp));
    }

    // the measured constant: largest per-sample certificate
    let c_star = match constant {
        Some(c) => c,
        None => {
            let mut worst = T::zero();
            for (ch, q_ren, n_ren, nperp) in &ops {
                let dom = measure_domination_constant(ch, q_ren, n_ren, nperp)
                    .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
                worst = worst.max(dom.c);
            }
            worst
        }
    };

    let mut records = Vec::new();
    let mut dominates = true;
    for (i, psi) in mb_traj.states.iter().enumerate() {
        let (ch, q_ren, n_ren, nperp) = &ops[i];
        let id = SparseOperator::identity(n_ren.domain());
        let n_ren_p1 = n_ren.add(&id).expect("square");
        let g_val = psi.expectation(ch).re
            + psi.expectation(q_ren).re
            + c_star * psi.expectation(&n_ren_p1).re;
        let n_perp_expect = psi.expectation(nperp).re;
        if n_perp_expect > g_val + rl::<T>(1e-8) {
            dominates = false;
        }
        let dep = depletion(psi, &gp_traj.fields[i])?;
        records.push(DepletionRecord {
            t: mb_traj.times[i],
            depletion: dep.via_density,
            n_perp_expect,
            gronwall_value: g_val,
            energy: psi.expectation(h_bare).re,
        });
    }

    // fitted exponential rate of G and the integrated Gronwall envelope
    let g0 = records[0].gronwall_value;
    let mut fitted_rate = T::zero();
    if records.len() > 1 && g0 > T::zero() {
        let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
        let mut count = T::zero();
        for r in &records {
            if r.gronwall_value <= T::zero() {
                continue;
            }
            let x = r.t;
            let y = (r.gronwall_value / g0).ln();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            count += T::one();
        }
        let det = count * sxx - sx * sx;
        if det.abs() > T::epsilon() {
            fitted_rate = (count * sxy - sx * sy) / det;
        }
    }
    let rate = fitted_rate.abs().max(rl::<T>(1e-12));
    let mut bound_holds = true;
    for r in &records {
        let envelope = g0 * ((rate * r.t).exp() - T::one()).exp();
        if r.gronwall_value > envelope * (T::one() + rl::<T>(1e-8)) + rl::<T>(1e-10) {
            bound_holds = false;
        }
    }

    Ok(GronwallReport {
        records,
        constant: c_star,
        fitted_rate,
        gronwall_bound_holds: bound_holds,
        dominates_excitations: dominates,
    })
}

/// Row of the trapped ground-state depletion experiment.
#[derive(Debug, Clone)]
pub struct DepletionRow<T> {
    pub particles: usize,
    pub depletion: T,
    pub n_times_depletion: T,
    pub mb_energy: T,
    pub gp_energy: T,
}

/// For each N: exact trapped ground state, GP minimizer on the same lattice
/// with coupling 8 pi a, and the depletion of the exact state relative to
/// the GP condensate.
pub fn trapped_depletion_experiment<T: Real>(
    base: &ManyBodyConfig<T>,
    scattering_length: T,
    n_values: &[usize],
    gs_tol: T,
) -> Result<Vec<DepletionRow<T>>, ManyBodyError> {
    let mut rows = Vec::new();
    for &n in n_values {
        let mut cfg = base.clone();
        cfg.particles = n;
        let basis = cfg.basis()?;
        let h = build_h(&cfg, &basis)?;
        let (energy, psi) = ground_state(&h, basis.clone(), gs_tol, 600)?;

        let coupling = rl::<T>(8.0) * T::PI() * scattering_length;
        let params = crate::gp::GpParams::new(coupling, cfg.trap.clone())
            .expect("non-negative coupling");
        let center = cfg.grid.center();
        let init = Field::gaussian(cfg.grid.clone(), &center, T::one()).expect("gaussian init");
        let gs =
            crate::gp::minimize_imaginary_time(&params, init, rl::<T>(0.05), rl::<T>(1e-8), 50_000)
                .map_err(|e| ManyBodyError::MeanField(e.to_string()))?;
        let dep = depletion(&psi, &gs.field)?;
        rows.push(DepletionRow {
            particles: n,
            depletion: dep.via_density,
            n_times_depletion: rl::<T>(n as f64) * dep.via_density,
            mb_energy: energy,
            gp_energy: gs.energy.total,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn free_config(m: usize, n: usize) -> ManyBodyConfig<f64> {
        let grid = Grid::cubic(1, m, 0.5).unwrap();
        let v = RadialPotential::new(vec![0.0, 0.0], 0.5).unwrap();
        ManyBodyConfig::new(grid, n, v)
    }

    fn well_config(m: usize, n: usize, depth: f64) -> ManyBodyConfig<f64> {
        let grid = Grid::cubic(1, m, 0.5).unwrap();
        let v = RadialPotential::square_well(depth, 1.0, 0.01).unwrap();
        ManyBodyConfig::new(grid, n, v)
    }

    #[test]
    fn one_particle_free_spectrum_is_lattice_kinetic() {
        let cfg = free_config(8, 1);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let eig = crate::eigen::hermitian_eigen(&h.to_dense()).unwrap();
        let mut k2: Vec<f64> = cfg.grid.k_squared_table();
        k2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in eig.values.iter().zip(&k2) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    /// Independent first-quantized oracle: assemble H on the ordered product
    /// space (h x I + ... + pair diagonal) and project onto the symmetrized
    /// occupation vectors.
    fn first_quantized_oracle(cfg: &ManyBodyConfig<f64>, basis: &SectorBasis) -> CMatrix<f64> {
        let m = cfg.grid.len();
        let n = cfg.particles;
        let dim_prod = m.pow(n as u32);
        let mut one_body = laplacian_matrix(&cfg.grid);
        if let Some(trap) = &cfg.trap {
            for (i, &v) in trap.iter().enumerate() {
                one_body[(i, i)] += C::new(v, 0.0);
            }
        }
        let v = cfg.pair_matrix();
        let decode = |mut idx: usize| -> Vec<usize> {
            let mut tuple = vec![0; n];
            for slot in (0..n).rev() {
                tuple[slot] = idx % m;
                idx /= m;
            }
            tuple
        };
        let encode = |tuple: &[usize]| -> usize { tuple.iter().fold(0, |acc, &x| acc * m + x) };
        let mut h_prod = CMatrix::<f64>::zeros(dim_prod, dim_prod);
        for col in 0..dim_prod {
            let tuple = decode(col);
            for slot in 0..n {
                for target in 0..m {
                    let mut t2 = tuple.clone();
                    t2[slot] = target;
                    h_prod[(encode(&t2), col)] += one_body[(target, tuple[slot])];
                }
            }
            let mut pot = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    pot += v[(tuple[i], tuple[j])].re;
                }
            }
            h_prod[(col, col)] += C::new(pot, 0.0);
        }
        // symmetrizer: occupation state -> equal-weight distinct orderings
        let dim_occ = basis.dim();
        let mut s = CMatrix::<f64>::zeros(dim_prod, dim_occ);
        for occ_idx in 0..dim_occ {
            let multiset: Vec<usize> = basis.state(occ_idx).iter().map(|&x| x as usize).collect();
            let weight = (1.0 / basis.multiplicity(occ_idx)).sqrt();
            let mut tuples: Vec<Vec<usize>> = vec![vec![]];
            for _ in 0..n {
                let mut next = Vec::new();
                for t in &tuples {
                    let mut remaining = multiset.clone();
                    for &used in t.iter() {
                        let pos = remaining.iter().position(|&x| x == used).unwrap();
                        remaining.remove(pos);
                    }
                    let mut seen = Vec::new();
                    for &r in &remaining {
                        if seen.contains(&r) {
                            continue;
                        }
                        seen.push(r);
                        let mut t2 = t.clone();
                        t2.push(r);
                        next.push(t2);
                    }
                }
                tuples = next;
            }
            for t in &tuples {
                s[(encode(t), occ_idx)] = C::new(weight, 0.0);
            }
        }
        s.adjoint().matmul(&h_prod).matmul(&s)
    }

    #[test]
    fn hamiltonian_matches_first_quantized_oracle_two_sites() {
        let mut cfg = well_config(2, 2, 2.0);
        cfg.trap = Some(vec![0.3, 0.9]);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        assert_eq!(h.nrows(), 3);
        let oracle = first_quantized_oracle(&cfg, &basis);
        let diff = h.to_dense().sub(&oracle).max_abs();
        assert!(diff < 1e-12, "max diff {diff:e}");
    }

    #[test]
    fn hamiltonian_matches_first_quantized_oracle_three_particles() {
        let cfg = well_config(4, 3, 1.5);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let oracle = first_quantized_oracle(&cfg, &basis);
        let diff = h.to_dense().sub(&oracle).max_abs();
        assert!(diff < 1e-11, "max diff {diff:e}");
    }

    #[test]
    fn hamiltonian_is_real_symmetric_and_number_conserving() {
        let cfg = well_config(8, 2, 2.0);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        assert!(h.hermiticity_defect().unwrap() < 1e-11);
        for (_, _, v) in h.iter_entries() {
            assert!(v.im.abs() < 1e-12);
        }
        let n_op = crate::fock::ops::op_number::<f64>(&basis);
        assert_eq!(h.commutator(&n_op).unwrap().nnz(), 0);
    }

    #[test]
    fn free_ground_state_is_zero_momentum_condensate() {
        let cfg = free_config(8, 2);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let (e, psi) = ground_state(&h, basis.clone(), 1e-10, 400).unwrap();
        assert!(e.abs() < 1e-9, "E = {e}");
        let condensate =
            FockVector::product_state(basis, &Field::constant_normalized(cfg.grid.clone()));
        let fidelity = psi.inner(&condensate).unwrap().norm();
        assert!(fidelity > 1.0 - 1e-8, "fidelity {fidelity}");
    }

    #[test]
    fn lanczos_matches_dense_diagonalization() {
        let mut cfg = well_config(4, 2, 2.0);
        cfg.trap = Some(
            (0..cfg.grid.len())
                .map(|i| 0.5 * (i as f64 - 1.5).powi(2))
                .collect(),
        );
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let (e, psi) = ground_state(&h, basis, 1e-11, 400).unwrap();
        let dense = crate::eigen::hermitian_eigen(&h.to_dense()).unwrap();
        assert!((e - dense.values[0]).abs() < 1e-10);
        let hpsi = h.apply_rect(psi.coeffs());
        let res: f64 = hpsi
            .iter()
            .zip(psi.coeffs())
            .map(|(a, b)| (a - b.scale(e)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-11);
    }

    #[test]
    fn eigenstate_evolves_by_pure_phase() {
        let cfg = well_config(4, 2, 2.0);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let (e, psi) = ground_state(&h, basis, 1e-11, 400).unwrap();
        let traj = evolve(&h, &psi, 0.05, 20, 5, 24).unwrap();
        let t_end = *traj.times.last().unwrap();
        let overlap = psi.inner(traj.states.last().unwrap()).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-10);
        let expect = C::from_polar(1.0, -e * t_end);
        assert!((overlap - expect).norm() < 1e-9);
    }

    #[test]
    fn single_particle_evolution_matches_spectral_propagation() {
        let cfg = well_config(8, 1, 2.0);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let amp = cfg.grid.cell_volume().sqrt();
        let mut phi = Field::from_fn(cfg.grid.clone(), |x| {
            C::new(1.0 + 0.4 * (x[0] * 1.57).cos(), 0.2 * (x[0] * 0.78).sin())
        });
        phi.normalize().unwrap();
        let psi0 = FockVector::new(
            basis.clone(),
            phi.values().iter().map(|v| v.scale(amp)).collect(),
        );
        let t = 0.4;
        let traj = evolve(&h, &psi0, 0.04, 10, 10, 24).unwrap();
        let mut eng = crate::fft::SpectralEngine::for_grid(&cfg.grid);
        let grid = cfg.grid.clone();
        let mut hat = phi.values().to_vec();
        eng.forward(&grid, &mut hat);
        let k2 = grid.k_squared_table();
        for (v, &k2v) in hat.iter_mut().zip(&k2) {
            *v *= C::from_polar(1.0, -k2v * t);
        }
        eng.inverse(&grid, &mut hat);
        let final_state = traj.states.last().unwrap();
        for (got, want) in final_state.coeffs().iter().zip(&hat) {
            assert!((got - want.scale(amp)).norm() < 1e-10);
        }
    }

    #[test]
    fn reduced_density_of_product_state_is_rank_one() {
        let cfg = free_config(4, 3);
        let basis = cfg.basis().unwrap();
        let mut phi = Field::from_fn(cfg.grid.clone(), |x| C::new(1.0 + 0.3 * x[0], -0.2));
        phi.normalize().unwrap();
        let psi = FockVector::product_state(basis, &phi);
        let gamma = reduced_density(&psi);
        let h_d = cfg.grid.cell_volume();
        for i in 0..4 {
            for j in 0..4 {
                let expect = phi.values()[i].scale(h_d) * phi.values()[j].conj();
                assert!((gamma[(i, j)] - expect).norm() < 1e-12);
            }
        }
        assert!((gamma.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_density_matches_partial_trace_oracle() {
        let cfg = free_config(4, 2);
        let basis = cfg.basis().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = FockVector::<f64>::random(basis.clone(), &mut rng);
        let gamma = reduced_density(&psi);
        // dense partial trace over the ordered two-particle product space
        let m = 4;
        let mut prod = vec![C::new(0.0, 0.0); m * m];
        for s in 0..basis.dim() {
            let amp = psi.coeffs()[s].scale((1.0 / basis.multiplicity(s)).sqrt());
            let st = basis.state(s);
            let (a, b) = (st[0] as usize, st[1] as usize);
            if a == b {
                prod[a * m + b] = amp;
            } else {
                prod[a * m + b] += amp;
                prod[b * m + a] += amp;
            }
        }
        let norm: f64 = prod.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let mut oracle = CMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = C::new(0.0, 0.0);
                for rest in 0..m {
                    acc += prod[j * m + rest].conj() * prod[i * m + rest];
                }
                // gamma = N <.>/N with the first-quantized convention
                oracle[(i, j)] = acc;
            }
        }
        let diff = gamma.sub(&oracle).max_abs();
        assert!(diff < 1e-12, "partial trace mismatch {diff:e}");
    }

    #[test]
    fn depletion_routes_agree_and_one_excitation_gives_one_over_n() {
        let cfg = free_config(4, 3);
        let basis = cfg.basis().unwrap();
        let mut phi = Field::from_fn(cfg.grid.clone(), |x| C::new(1.0, 0.15 * x[0]));
        phi.normalize().unwrap();
        let prod = FockVector::product_state(basis.clone(), &phi);
        let d0 = depletion(&prod, &phi).unwrap();
        assert!(d0.via_density.abs() < 1e-12);

        let mut chi = Field::plane_wave(cfg.grid.clone(), &[1]);
        let ov = phi.inner(&chi).unwrap();
        chi.axpy(-ov, &phi).unwrap();
        chi.normalize().unwrap();
        let lower = SectorBasis::new(4, 2, 10_000).unwrap();
        let aphi = annihilate_field(&basis, &lower, &phi).unwrap();
        let cchi = crate::fock::create_field(&lower, &basis, &chi).unwrap();
        let mut excited = FockVector::new(
            basis.clone(),
            cchi.matmul(&aphi).unwrap().apply_rect(prod.coeffs()),
        );
        excited.normalize().unwrap();
        let d = depletion(&excited, &phi).unwrap();
        assert!((d.via_density - 1.0 / 3.0).abs() < 1e-10, "{}", d.via_density);
        assert!((d.via_density - d.via_number).abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let psi = FockVector::<f64>::random(basis.clone(), &mut rng);
            let d = depletion(&psi, &phi).unwrap();
            assert!((d.via_density - d.via_number).abs() < 1e-10);
        }
    }

    #[test]
    fn gamma_is_hermitian_psd_with_unit_trace_and_bounded_eigenvalues() {
        let cfg = free_config(4, 2);
        let basis = cfg.basis().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let psi = FockVector::<f64>::random(basis.clone(), &mut rng);
            let gamma = reduced_density(&psi);
            assert!(gamma.hermiticity_defect() < 1e-12);
            assert!((gamma.trace().re - 1.0).abs() < 1e-12);
            let eig = crate::eigen::hermitian_eigen(&gamma).unwrap();
            assert!(eig.values[0] > -1e-12);
            assert!(*eig.values.last().unwrap() < 1.0 + 1e-12);
        }
    }

    #[test]
    fn correlated_state_reduces_to_product_for_f_one() {
        let cfg = free_config(4, 3);
        let basis = cfg.basis().unwrap();
        let mut phi = Field::from_fn(cfg.grid.clone(), |x| C::new(1.0 + 0.2 * x[0], 0.1));
        phi.normalize().unwrap();
        let v0 = RadialPotential::<f64>::new(vec![0.0, 0.0], 0.5).unwrap();
        let sol = crate::scattering::solve_zero_energy(&v0, 8.0, 1e-10).unwrap();
        let corr = correlated_product_state(basis.clone(), &phi, &sol, 3.0).unwrap();
        let prod = FockVector::product_state(basis, &phi);
        let fidelity = corr.inner(&prod).unwrap().norm();
        assert!((fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlations_lower_the_energy_of_the_bare_product() {
        let cfg = well_config(8, 2, 4.0);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let phi = Field::constant_normalized(cfg.grid.clone());
        let prod = FockVector::product_state(basis.clone(), &phi);
        let sol = crate::scattering::solve_zero_energy(&cfg.potential, 12.0, 1e-8).unwrap();
        let corr = correlated_product_state(basis.clone(), &phi, &sol, cfg.width()).unwrap();
        let e_prod = prod.expectation(&h).re;
        let e_corr = corr.expectation(&h).re;
        assert!(e_corr < e_prod, "correlated {e_corr} should be below bare {e_prod}");
        // both sit above the exact trapped ground energy (variational bound)
        let (e0, _) = ground_state(&h, basis, 1e-9, 400).unwrap();
        assert!(e_corr >= e0 - 1e-9);
    }

    #[test]
    fn trapped_depletion_trend() {
        let grid = Grid::cubic(1, 8, 0.5).unwrap();
        let v = RadialPotential::square_well(2.0, 1.0, 0.01).unwrap();
        let mut cfg = ManyBodyConfig::new(grid.clone(), 2, v.clone());
        cfg.trap = Some(crate::gp::GpParams::harmonic_trap(&grid, 1.0));
        let a = crate::scattering::solve_zero_energy(&v, 8.0, 1e-8)
            .unwrap()
            .scattering_length();
        let rows = trapped_depletion_experiment(&cfg, a, &[2, 3], 1e-9).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(
                row.depletion > 0.0 && row.depletion < 0.5,
                "depletion {}",
                row.depletion
            );
        }
        let r = rows[0].n_times_depletion / rows[1].n_times_depletion;
        assert!(r > 0.5 && r < 2.0, "ratio {r}");
    }

    #[test]
    fn interaction_diagonal_counts_pairs() {
        let cfg = well_config(2, 2, 2.0);
        let basis = cfg.basis().unwrap();
        let v = cfg.pair_matrix();
        let d = interaction_diagonal(&basis, &v);
        // (2,0): one on-site pair; (1,1): one cross pair; (0,2): one on-site
        assert!((d[0] - v[(0, 0)].re).abs() < 1e-14);
        assert!((d[1] - v[(0, 1)].re).abs() < 1e-14);
        assert!((d[2] - v[(1, 1)].re).abs() < 1e-14);
    }

    #[test]
    fn gronwall_monitor_on_stationary_reference_is_flat() {
        // g = 0 with a plane-wave condensate: both generators stationary;
        // G(t) must be constant and dominate <N_perp>
        let grid = Grid::cubic(1, 4, 0.5).unwrap();
        let v = RadialPotential::square_well(2.0, 1.0, 0.01).unwrap();
        let sol = crate::scattering::solve_zero_energy(&v, 8.0, 1e-8).unwrap();
        let mut cfg = ManyBodyConfig::new(grid.clone(), 2, v.clone());
        cfg.interaction_width = Some(2.0);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();

        let phi = Field::constant_normalized(grid.clone());
        let gp_params = crate::gp::GpParams::new(0.0, None).unwrap();
        let dt = 0.02;
        let steps = 10;
        let gp_traj = crate::gp::evolve_split_step(&phi, &gp_params, dt, steps, 1).unwrap();
        let psi0 = FockVector::product_state(basis.clone(), &phi);
        let mb_traj = evolve(&h, &psi0, dt, steps, 1, 16).unwrap();
        let report = gronwall_monitor(&mb_traj, &gp_traj, &h, &sol, 0.45, None).unwrap();
        assert!(report.dominates_excitations);
        let g0: f64 = report.records[0].gronwall_value;
        for r in &report.records {
            assert!((r.gronwall_value - g0).abs() < 1e-8 * g0.abs().max(1.0),
                "G not constant: {} vs {}", r.gronwall_value, g0);
        }
    }

    #[test]
    fn gronwall_monitor_dominates_on_interacting_run() {
        let grid = Grid::cubic(1, 8, 0.5).unwrap();
        let v = RadialPotential::square_well(2.0, 1.0, 0.01).unwrap();
        let sol = crate::scattering::solve_zero_energy(&v, 8.0, 1e-8).unwrap();
        let a = sol.scattering_length();
        let g = 8.0 * std::f64::consts::PI * a;
        let cfg = ManyBodyConfig::new(grid.clone(), 2, v.clone());
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();

        let mut phi = Field::from_fn(grid.clone(), |x| {
            C::new(1.0 + 0.2 * (2.0 * std::f64::consts::PI * x[0] / 4.0).cos(), 0.0)
        });
        phi.normalize().unwrap();
        let gp_params = crate::gp::GpParams::new(g, None).unwrap();
        let dt = 0.01;
        let steps = 20;
        let gp_traj = crate::gp::evolve_split_step(&phi, &gp_params, dt, steps, 5).unwrap();
        let psi0 = correlated_product_state(basis.clone(), &phi, &sol, 2.0).unwrap();
        let mb_traj = evolve(&h, &psi0, dt * 5.0, 4, 1, 20).unwrap();
        let report = gronwall_monitor(&mb_traj, &gp_traj, &h, &sol, 0.9, None).unwrap();
        assert!(report.dominates_excitations, "records {:?}", report.records);
        assert!(report.gronwall_bound_holds);
        assert!(report.constant.is_finite() && report.constant >= 0.0);
        // depletion identity at every sample
        for (r, psi) in report.records.iter().zip(&mb_traj.states) {
            let idx = (r.t / (dt * 5.0)).round() as usize;
            let d = depletion(psi, &gp_traj.fields[idx]).unwrap();
            assert!((d.via_density - d.via_number).abs() < 1e-10);
        }
    }

    #[test]
    fn evolution_conserves_norm_and_energy() {
        let cfg = well_config(4, 3, 2.0);
        let basis = cfg.basis().unwrap();
        let h = build_h(&cfg, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = FockVector::<f64>::random(basis, &mut rng);
        let traj = evolve(&h, &psi, 0.02, 50, 10, 20).unwrap();
        assert!(traj.max_norm_drift < 1e-11, "drift {:e}", traj.max_norm_drift);
        let e0 = psi.expectation(&h).re;
        let e1 = traj.states.last().unwrap().expectation(&h).re;
        assert!(((e1 - e0) / e0.abs().max(1.0)).abs() < 1e-10);
    }
}
