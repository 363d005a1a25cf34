//! Second-quantized operator assembly on sector bases.
//!
//! Lattice conventions: site operators a_m obey [a_m, a*_m'] = delta_mm';
//! distributional fields are a_x = h^{-d/2} a_m, smeared ones
//! a(f) = sum_m h^{d/2} conj(f_m) a_m, so [a(f), a*(g)] = <f, g> with the
//! h^d-weighted inner product shared with the mean-field module.

use crate::dense::CMatrix;
use crate::eigen::hermitian_eigen;
use crate::field::Field;
use crate::fock::basis::{SectorBasis, TruncatedBasis};
use crate::fock::onebody::projector_q;
use crate::fock::sparse::{BasisId, SparseOperator};
use crate::scalar::{rl, Real, C};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpsError {
    #[error("bases are over different mode counts")]
    ModeMismatch,
    #[error("target sector must hold {expected} particles, has {got}")]
    SectorMismatch { expected: usize, got: usize },
    #[error("weight vector length {got} does not match mode count {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("reference field is not normalized")]
    NotNormalized,
}

pub fn basis_id(b: &SectorBasis) -> BasisId {
    BasisId::sector(b.modes(), b.particles(), b.dim())
}

fn check_pair(
    from: &SectorBasis,
    to: &SectorBasis,
    delta: isize,
) -> Result<(), OpsError> {
    if from.modes() != to.modes() {
        return Err(OpsError::ModeMismatch);
    }
    let expected = (from.particles() as isize + delta).max(0) as usize;
    if to.particles() != expected {
        return Err(OpsError::SectorMismatch { expected, got: to.particles() });
    }
    Ok(())
}

/// sum_m w_m a_m as a sparse map from `from` (n particles) to `to` (n-1).
pub fn annihilate_weighted<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    w: &[C<T>],
) -> Result<SparseOperator<T>, OpsError> {
    check_pair(from, to, -1)?;
    if w.len() != from.modes() {
        return Err(OpsError::ShapeMismatch { expected: from.modes(), got: w.len() });
    }
    let mut triplets = Vec::new();
    let mut target = Vec::with_capacity(from.particles().saturating_sub(1));
    for j in 0..from.dim() {
        let state = from.state(j);
        let mut prev: Option<u16> = None;
        for (pos, &m) in state.iter().enumerate() {
            if prev == Some(m) {
                continue; // annihilating identical modes gives the same target
            }
            prev = Some(m);
            let wm = w[m as usize];
            if wm.re == T::zero() && wm.im == T::zero() {
                continue;
            }
            let occ = from.occupancy(j, m);
            target.clear();
            target.extend_from_slice(&state[..pos]);
            target.extend_from_slice(&state[pos + 1..]);
            let i = to.index_of(&target).expect("target state exists in the smaller sector");
            let amp = rl::<T>(occ as f64).sqrt();
            triplets.push((i as u32, j as u32, wm.scale(amp)));
        }
    }
    Ok(SparseOperator::from_triplets(basis_id(from), basis_id(to), triplets))
}

/// sum_m w_m a*_m from `from` (n particles) to `to` (n+1): the exact adjoint
/// of the matching annihilator with conjugated weights.
pub fn create_weighted<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    w: &[C<T>],
) -> Result<SparseOperator<T>, OpsError> {
    check_pair(from, to, 1)?;
    let wbar: Vec<C<T>> = w.iter().map(|v| v.conj()).collect();
    Ok(annihilate_weighted(to, from, &wbar)?.adjoint())
}

fn field_weights<T: Real>(f: &Field<T>) -> Vec<C<T>> {
    let amp = f.grid().cell_volume().sqrt();
    f.values().iter().map(|v| v.conj().scale(amp)).collect()
}

/// a(f) = sum_m h^{d/2} conj(f_m) a_m, mapping the n-sector to n-1.
pub fn annihilate_field<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    f: &Field<T>,
) -> Result<SparseOperator<T>, OpsError> {
    if f.grid().len() != from.modes() {
        return Err(OpsError::ShapeMismatch { expected: from.modes(), got: f.grid().len() });
    }
    annihilate_weighted(from, to, &field_weights(f))
}

/// a*(f): adjoint of a(f), mapping the n-sector to n+1.
pub fn create_field<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    f: &Field<T>,
) -> Result<SparseOperator<T>, OpsError> {
    check_pair(from, to, 1)?;
    Ok(annihilate_field(to, from, f)?.adjoint())
}

/// Site annihilator a_m (unit weight on one site).
pub fn annihilate_site<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    site: usize,
) -> Result<SparseOperator<T>, OpsError> {
    let mut w = vec![C::new(T::zero(), T::zero()); from.modes()];
    w[site] = C::new(T::one(), T::zero());
    annihilate_weighted(from, to, &w)
}

/// Projected field a(Q_x) = h^{-1/2 d} sum_m Q[x, m] a_m for the projector
/// matrix Q = I - h^d phi phi^H.
pub fn annihilate_q_site<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    qmat: &CMatrix<T>,
    cell_volume: T,
    x: usize,
) -> Result<SparseOperator<T>, OpsError> {
    let inv = T::one() / cell_volume.sqrt();
    let w: Vec<C<T>> = (0..from.modes()).map(|m| qmat[(x, m)].scale(inv)).collect();
    annihilate_weighted(from, to, &w)
}

/// Quadratic form sum_ij K_ij a*_i a_j on a fixed sector. Hermitian K gives
/// a Hermitian operator; the identity kernel gives n times the identity.
pub fn op_quadratic<T: Real>(
    basis: &SectorBasis,
    kernel: &CMatrix<T>,
) -> Result<SparseOperator<T>, OpsError> {
    if kernel.nrows() != basis.modes() || kernel.ncols() != basis.modes() {
        return Err(OpsError::ShapeMismatch { expected: basis.modes(), got: kernel.nrows() });
    }
    let id = basis_id(basis);
    let mut triplets = Vec::new();
    let mut mid = Vec::with_capacity(basis.particles().saturating_sub(1));
    let mut tgt = Vec::with_capacity(basis.particles());
    for j in 0..basis.dim() {
        let state = basis.state(j);
        let mut prev: Option<u16> = None;
        for (pos, &m) in state.iter().enumerate() {
            if prev == Some(m) {
                continue;
            }
            prev = Some(m);
            let occ_m = basis.occupancy(j, m);
            let amp_m = rl::<T>(occ_m as f64).sqrt();
            mid.clear();
            mid.extend_from_slice(&state[..pos]);
            mid.extend_from_slice(&state[pos + 1..]);
            for i in 0..basis.modes() {
                let k = kernel[(i, m as usize)];
                if k.re == T::zero() && k.im == T::zero() {
                    continue;
                }
                // insert mode i keeping the multiset sorted
                let iu = i as u16;
                let occ_i = mid.iter().filter(|&&v| v == iu).count() as u32;
                let amp_i = rl::<T>((occ_i + 1) as f64).sqrt();
                tgt.clear();
                let ins = mid.partition_point(|&v| v < iu);
                tgt.extend_from_slice(&mid[..ins]);
                tgt.push(iu);
                tgt.extend_from_slice(&mid[ins..]);
                let row = basis.index_of(&tgt).expect("insertion stays in sector");
                triplets.push((row as u32, j as u32, k.scale(amp_m * amp_i)));
            }
        }
    }
    Ok(SparseOperator::from_triplets(id, id, triplets))
}

/// Total number operator n * Id on the sector.
pub fn op_number<T: Real>(basis: &SectorBasis) -> SparseOperator<T> {
    let id = basis_id(basis);
    let n = rl::<T>(basis.particles() as f64);
    SparseOperator::identity(id).scaled(C::new(n, T::zero()))
}

/// Excitation number N - a*(phi) a(phi) = op_quadratic(Q) for the projector
/// Q orthogonal to the condensate field.
pub fn op_excitation_number<T: Real>(
    basis: &SectorBasis,
    phi: &Field<T>,
) -> Result<SparseOperator<T>, OpsError> {
    let q = projector_q(phi).map_err(|_| OpsError::NotNormalized)?;
    op_quadratic(basis, &q)
}

/// Pair creation sum_uv W_uv a*_u a*_v from the n-sector to n+2.
pub fn pair_create_sites<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    w: &CMatrix<T>,
) -> Result<SparseOperator<T>, OpsError> {
    check_pair(from, to, 2)?;
    if w.nrows() != from.modes() || w.ncols() != from.modes() {
        return Err(OpsError::ShapeMismatch { expected: from.modes(), got: w.nrows() });
    }
    let m = from.modes();
    let mut triplets = Vec::new();
    let mut s1 = Vec::with_capacity(from.particles() + 1);
    let mut s2 = Vec::with_capacity(from.particles() + 2);
    for j in 0..from.dim() {
        let state = from.state(j);
        for v in 0..m {
            let vu = v as u16;
            let occ_v = state.iter().filter(|&&x| x == vu).count() as u32;
            let amp_v = rl::<T>((occ_v + 1) as f64).sqrt();
            s1.clear();
            let ins = state.partition_point(|&x| x < vu);
            s1.extend_from_slice(&state[..ins]);
            s1.push(vu);
            s1.extend_from_slice(&state[ins..]);
            for u in 0..m {
                let coeff = w[(u, v)];
                if coeff.re == T::zero() && coeff.im == T::zero() {
                    continue;
                }
                let uu = u as u16;
                let occ_u = s1.iter().filter(|&&x| x == uu).count() as u32;
                let amp_u = rl::<T>((occ_u + 1) as f64).sqrt();
                s2.clear();
                let ins2 = s1.partition_point(|&x| x < uu);
                s2.extend_from_slice(&s1[..ins2]);
                s2.push(uu);
                s2.extend_from_slice(&s1[ins2..]);
                let row = to.index_of(&s2).expect("pair creation stays in sector");
                triplets.push((row as u32, j as u32, coeff.scale(amp_v * amp_u)));
            }
        }
    }
    Ok(SparseOperator::from_triplets(basis_id(from), basis_id(to), triplets))
}

/// Pair annihilation sum_uv W_uv a_u a_v from the n-sector to n-2 (the
/// rightmost factor acts first).
pub fn pair_annihilate_sites<T: Real>(
    from: &SectorBasis,
    to: &SectorBasis,
    w: &CMatrix<T>,
) -> Result<SparseOperator<T>, OpsError> {
    check_pair(from, to, -2)?;
    // sum W_uv a_u a_v = (sum conj(W_uv) a*_v a*_u)^dagger = pair_create(W^H)^dagger
    let wh = w.adjoint();
    Ok(pair_create_sites(to, from, &wh)?.adjoint())
}

/// a(f) on the truncated space: block map sending sector n to n-1.
pub fn annihilate_field_truncated<T: Real>(
    tb: &TruncatedBasis,
    f: &Field<T>,
) -> Result<SparseOperator<T>, OpsError> {
    let id = BasisId::truncated(tb.modes(), tb.dim());
    let mut triplets = Vec::new();
    for n in 1..=tb.n_max() {
        let block = annihilate_field(tb.sector(n), tb.sector(n - 1), f)?;
        let (ro, co) = (tb.offset(n - 1) as u32, tb.offset(n) as u32);
        triplets.extend(block.iter_entries().map(|(r, c, v)| (r as u32 + ro, c as u32 + co, v)));
    }
    Ok(SparseOperator::from_triplets(id, id, triplets))
}

/// Report of the canonical-commutation check on a truncated space.
#[derive(Debug, Clone)]
pub struct CcrReport<T> {
    /// Operator norm of [a(f), a*(g)] - <f,g> restricted to sectors
    /// n <= n_max - 1, where the relation is exact.
    pub restricted_defect: T,
    /// Same defect on the top sector, a pure truncation artifact.
    pub top_sector_defect: T,
    /// Operator norm of [a(f), a(g)] on the restricted space.
    pub annihilator_defect: T,
}

/// Verify [a(f), a*(g)] = <f, g> on a truncated Fock space.
pub fn ccr_defect<T: Real>(
    f: &Field<T>,
    g: &Field<T>,
    tb: &TruncatedBasis,
) -> Result<CcrReport<T>, OpsError> {
    let af = annihilate_field_truncated(tb, f)?;
    let ag = annihilate_field_truncated(tb, g)?;
    let cg = ag.adjoint();
    let inner = f.inner(g).map_err(|_| OpsError::ModeMismatch)?;
    let comm = af.matmul(&cg).unwrap().sub(&cg.matmul(&af).unwrap()).unwrap();
    let scaled_id =
        SparseOperator::identity(BasisId::truncated(tb.modes(), tb.dim())).scaled(inner);
    let defect = comm.sub(&scaled_id).unwrap();

    let keep = tb.dim_through(tb.n_max() - 1);
    let keep_id = BasisId::truncated(tb.modes(), keep);
    let restricted = defect.restrict(0..keep, 0..keep, keep_id, keep_id);
    let top_lo = tb.offset(tb.n_max());
    let top_dim = tb.sector(tb.n_max()).dim();
    let top_id = BasisId::truncated(tb.modes(), top_dim);
    let top = defect.restrict(top_lo..top_lo + top_dim, top_lo..top_lo + top_dim, top_id, top_id);

    let comm_aa = af.matmul(&ag).unwrap().sub(&ag.matmul(&af).unwrap()).unwrap();
    let aa_restricted = comm_aa.restrict(0..keep, 0..keep, keep_id, keep_id);

    Ok(CcrReport {
        restricted_defect: spectral_norm_dense(&restricted.to_dense()),
        top_sector_defect: spectral_norm_dense(&top.to_dense()),
        annihilator_defect: spectral_norm_dense(&aa_restricted.to_dense()),
    })
}

/// Spectral norm via the largest eigenvalue of A^H A (dense path, small
/// matrices only).
pub fn spectral_norm_dense<T: Real>(a: &CMatrix<T>) -> T {
    if a.nrows() == 0 || a.ncols() == 0 {
        return T::zero();
    }
    let gram = a.adjoint().matmul(a);
    let eig = hermitian_eigen(&gram).expect("Gram matrix is Hermitian");
    eig.values.last().copied().unwrap_or(T::zero()).max(T::zero()).sqrt()
}
