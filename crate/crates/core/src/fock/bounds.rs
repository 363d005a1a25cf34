//! Randomized verification of the standard creation/annihilation operator
//! bounds on small sectors: field bounds against sqrt(N), projected-field
//! bounds against the excitation number, and the smeared kernel bounds.
//! Every draw is checked as an inequality with a tiny roundoff allowance.

use crate::dense::CMatrix;
use crate::field::Field;
use crate::fock::basis::{SectorBasis, TruncatedBasis};
use crate::fock::onebody::projector_q;
use crate::fock::ops::{
    annihilate_field, annihilate_site, annihilate_weighted, op_excitation_number,
};
use crate::fock::FockVector;
use crate::grid::Grid;
use crate::scalar::{rl, Real, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Outcome of the bound suite: number of draws, violations (should be
/// empty), and the largest observed ratio lhs/rhs per bound family.
#[derive(Debug, Clone)]
pub struct BoundsReport<T> {
    pub draws: usize,
    pub violations: Vec<String>,
    pub max_ratios: Vec<(&'static str, T)>,
}

impl<T: Real> BoundsReport<T> {
    pub fn all_hold(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_field<T: Real>(grid: &Grid<T>, rng: &mut impl Rng) -> Field<T> {
    Field::from_fn(grid.clone(), |_| {
        C::new(rl::<T>(rng.gen_range(-1.0..1.0)), rl::<T>(rng.gen_range(-1.0..1.0)))
    })
}

fn vec_norm<T: Real>(v: &[C<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Run all bound families for `draws` seeded random draws on the given
/// fixed-N sector (f, g, phi, psi draws) and truncated space (pair-kernel
/// draws).
pub fn lemma_bound_suite<T: Real>(
    grid: &Grid<T>,
    particles: usize,
    n_max: usize,
    draws: usize,
    seed: u64,
) -> BoundsReport<T> {
    let modes = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sector = Arc::new(SectorBasis::new(modes, particles, 2_000_000).unwrap());
    let sector_m1 = SectorBasis::new(modes, particles - 1, 2_000_000).unwrap();
    let trunc = TruncatedBasis::new(modes, n_max, 2_000_000).unwrap();
    let h_d = grid.cell_volume();
    let slack = rl::<T>(1e-10);

    let mut violations = Vec::new();
    let mut ratios: Vec<(&'static str, T)> = vec![
        ("a(f) vs sqrt(N)", T::zero()),
        ("a*(f) vs sqrt(N+1)", T::zero()),
        ("a(Qf) vs N_perp", T::zero()),
        ("a*(Qf) vs N_perp+1", T::zero()),
        ("<a*(f)a(g)> vs N", T::zero()),
        ("<a*(Qf)a(Qg)> vs <N_perp>", T::zero()),
        ("sum_x |<a*_x a(h_x)>| vs N||h||", T::zero()),
        ("sum_x |<a*(Q_x)a(Q h_x)>| vs ||h||<N_perp>", T::zero()),
        ("sum_x |<a*_x a*(h_x)>| vs N||h|| (truncated)", T::zero()),
    ];
    let mut track = |idx: usize, lhs: T, rhs: T, violations: &mut Vec<String>| {
        let ratio = if rhs > T::zero() { lhs / rhs } else { T::zero() };
        if ratio > ratios[idx].1 {
            ratios[idx].1 = ratio;
        }
        if lhs > rhs + slack {
            violations.push(format!(
                "{}: lhs {:?} > rhs {:?}",
                ratios[idx].0, lhs, rhs
            ));
        }
    };

    let n_t = rl::<T>(particles as f64);

    for _ in 0..draws {
        let f = random_field(grid, &mut rng);
        let g = random_field(grid, &mut rng);
        let mut phi = random_field(grid, &mut rng);
        phi.normalize().unwrap();
        let psi = FockVector::<T>::random(sector.clone(), &mut rng);

        let af = annihilate_field(&sector, &sector_m1, &f).unwrap();
        let ag = annihilate_field(&sector, &sector_m1, &g).unwrap();
        let nperp = op_excitation_number(&sector, &phi).unwrap();
        let q = projector_q(&phi).unwrap();

        // || a(f) psi || <= ||f|| sqrt(N)
        let afv = af.apply_rect(psi.coeffs());
        track(0, vec_norm(&afv), f.norm_l2() * n_t.sqrt(), &mut violations);

        // || a*(f) psi || <= ||f|| sqrt(N+1)
        let sector_p1 = SectorBasis::new(modes, particles + 1, 2_000_000).unwrap();
        let cf = annihilate_field(&sector_p1, &sector, &f).unwrap().adjoint();
        let cfv = cf.apply_rect(psi.coeffs());
        track(1, vec_norm(&cfv), f.norm_l2() * (n_t + T::one()).sqrt(), &mut violations);

        // projected versions against the excitation number
        let qf_vals = q.matvec(f.values());
        let qf = Field::from_values(grid.clone(), qf_vals);
        let aqf = annihilate_field(&sector, &sector_m1, &qf).unwrap();
        let aqfv = aqf.apply_rect(psi.coeffs());
        let nperp_exp = psi.expectation(&nperp).re.max(T::zero());
        track(2, vec_norm(&aqfv), f.norm_l2() * nperp_exp.sqrt(), &mut violations);

        let cqf = annihilate_field(&sector_p1, &sector, &qf).unwrap().adjoint();
        let cqfv = cqf.apply_rect(psi.coeffs());
        track(
            3,
            vec_norm(&cqfv),
            f.norm_l2() * (nperp_exp + T::one()).sqrt(),
            &mut violations,
        );

        // |<a*(f) a(g)>| <= N ||f|| ||g||
        let vg = ag.apply_rect(psi.coeffs());
        let vf = af.apply_rect(psi.coeffs());
        let pairing = vf
            .iter()
            .zip(&vg)
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v);
        track(4, pairing.norm(), n_t * f.norm_l2() * g.norm_l2(), &mut violations);

        // |<a*(Qf) a(Qg)>| <= ||Qf|| ||Qg|| <N_perp>
        let qg_vals = q.matvec(g.values());
        let qg = Field::from_values(grid.clone(), qg_vals);
        let aqg = annihilate_field(&sector, &sector_m1, &qg).unwrap();
        let vqg = aqg.apply_rect(psi.coeffs());
        let vqf = aqf.apply_rect(psi.coeffs());
        let pairing_q = vqf
            .iter()
            .zip(&vqg)
            .map(|(a, b)| a.conj() * b)
            .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v);
        track(
            5,
            pairing_q.norm(),
            qf.norm_l2() * qg.norm_l2() * nperp_exp,
            &mut violations,
        );

        // kernel bounds
        let h_kernel = CMatrix::from_fn(modes, modes, |_, _| {
            C::new(rl::<T>(rng.gen_range(-1.0..1.0)), rl::<T>(rng.gen_range(-1.0..1.0)))
        });
        let h_hs = h_kernel.frobenius() * h_d; // L2(dx dy) norm
        let amp = h_d.sqrt();

        // sum_x h^d |<a*_x a(h_x)>| with distributional a*_x
        let mut total = T::zero();
        let mut total_q = T::zero();
        for x in 0..modes {
            let ax = annihilate_site(&sector, &sector_m1, x).unwrap();
            let w: Vec<C<T>> = (0..modes).map(|y| h_kernel[(x, y)].conj().scale(amp)).collect();
            let ahx = annihilate_weighted(&sector, &sector_m1, &w).unwrap();
            let vx = ax.apply_rect(psi.coeffs());
            let vh = ahx.apply_rect(psi.coeffs());
            let pair = vx
                .iter()
                .zip(&vh)
                .map(|(a, b)| a.conj() * b)
                .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v);
            total += pair.norm() / amp; // h^{-d/2} from the distributional a*_x

            // projected version: a*(Q_x) a((Q h_x))
            let qx_w: Vec<C<T>> = (0..modes).map(|m| q[(x, m)].scale(T::one() / amp)).collect();
            let aqx = annihilate_weighted(&sector, &sector_m1, &qx_w).unwrap();
            let qh_vals = q.matvec(
                &(0..modes).map(|y| h_kernel[(x, y)]).collect::<Vec<_>>(),
            );
            let qh_w: Vec<C<T>> = qh_vals.iter().map(|v| v.conj().scale(amp)).collect();
            let aqhx = annihilate_weighted(&sector, &sector_m1, &qh_w).unwrap();
            let vqx = aqx.apply_rect(psi.coeffs());
            let vqh = aqhx.apply_rect(psi.coeffs());
            let pair_q = vqx
                .iter()
                .zip(&vqh)
                .map(|(a, b)| a.conj() * b)
                .fold(C::new(T::zero(), T::zero()), |acc, v| acc + v);
            total_q += pair_q.norm();
        }
        track(6, total * h_d, n_t * h_hs, &mut violations);
        track(7, total_q * h_d, h_hs * nperp_exp, &mut violations);

        // pair-creation kernel bound on the truncated space
        let psi_t = random_truncated(&trunc, &mut rng);
        let mut total_cc = T::zero();
        for x in 0..modes {
            let mut pairing = C::new(T::zero(), T::zero());
            for n in 0..=n_max.saturating_sub(2) {
                let lo = trunc.offset(n);
                let dim_n = trunc.sector(n).dim();
                let w: Vec<C<T>> =
                    (0..modes).map(|y| h_kernel[(x, y)].scale(amp)).collect();
                // component <psi_{n+2}, a*_x a*(h_x) psi_n>
                let c_hx = annihilate_weighted(
                    trunc.sector(n + 1),
                    trunc.sector(n),
                    &w.iter().map(|v| v.conj()).collect::<Vec<_>>(),
                )
                .unwrap()
                .adjoint();
                let mut ax_w = vec![C::new(T::zero(), T::zero()); modes];
                ax_w[x] = C::new(T::one() / amp, T::zero());
                let c_x = annihilate_weighted(trunc.sector(n + 2), trunc.sector(n + 1), &ax_w)
                    .unwrap()
                    .adjoint();
                let up = c_x
                    .matmul(&c_hx)
                    .unwrap()
                    .apply_rect(&psi_t[lo..lo + dim_n]);
                let lo2 = trunc.offset(n + 2);
                let dim2 = trunc.sector(n + 2).dim();
                for (i, v) in up.iter().enumerate() {
                    pairing += psi_t[lo2 + i].conj() * v;
                }
                let _ = dim2;
            }
            total_cc += pairing.norm();
        }
        track(8, total_cc * h_d, rl::<T>(n_max as f64) * h_hs, &mut violations);
    }

    BoundsReport { draws, violations, max_ratios: ratios }
}

fn random_truncated<T: Real>(tb: &TruncatedBasis, rng: &mut impl Rng) -> Vec<C<T>> {
    let mut v: Vec<C<T>> = (0..tb.dim())
        .map(|_| C::new(rl::<T>(rng.gen_range(-1.0..1.0)), rl::<T>(rng.gen_range(-1.0..1.0))))
        .collect();
    let n = vec_norm(&v);
    for z in &mut v {
        *z = z.scale(T::one() / n);
    }
    v
}

/// Exact operator statement 0 <= N_perp <= N on a sector: returns the
/// spectrum extrema of the excitation number.
pub fn excitation_number_extrema<T: Real>(
    grid: &Grid<T>,
    particles: usize,
    phi: &Field<T>,
) -> (T, T) {
    let basis = SectorBasis::new(grid.len(), particles, 2_000_000).unwrap();
    let nperp = op_excitation_number(&basis, phi).unwrap();
    let dense = nperp.to_dense();
    let eig = crate::eigen::hermitian_eigen(&dense).unwrap();
    (eig.values[0], *eig.values.last().unwrap())
}

/// Identity used throughout: the quadratic form of a projector kernel never
/// exceeds the total number (here checked as operators on one sector).
pub fn number_dominates_excitations<T: Real>(grid: &Grid<T>, particles: usize, phi: &Field<T>) -> T {
    let basis = SectorBasis::new(grid.len(), particles, 2_000_000).unwrap();
    let nperp = op_excitation_number::<T>(&basis, phi).unwrap();
    let ntot = crate::fock::ops::op_number::<T>(&basis);
    let diff = ntot.sub(&nperp).unwrap();
    let eig = crate::eigen::hermitian_eigen(&diff.to_dense()).unwrap();
    eig.values[0]
}
