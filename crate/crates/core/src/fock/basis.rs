//! Occupation-number bases for bosonic particle-number sectors over lattice
//! modes, plus the truncated direct sum of sectors.

use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("sector dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: u128, cap: usize },
    #[error("mode count must be positive")]
    NoModes,
}

/// C(m + n - 1, n), the bosonic sector dimension.
pub fn sector_dimension(modes: usize, particles: usize) -> u128 {
    binomial((modes + particles - 1) as u128, particles as u128)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Fixed particle-number sector basis.
///
/// States are stored as sorted multisets of occupied mode indices and
/// enumerated in ascending lexicographic order, which for occupation
/// vectors means (n, 0, ...), (n-1, 1, ...), ..., (0, ..., n).
#[derive(Debug)]
pub struct SectorBasis {
    modes: usize,
    particles: usize,
    states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, u32>,
}

impl PartialEq for SectorBasis {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes && self.particles == other.particles
    }
}

impl SectorBasis {
    pub fn new(modes: usize, particles: usize, cap: usize) -> Result<Self, BasisError> {
        if modes == 0 || modes > u16::MAX as usize {
            return Err(BasisError::NoModes);
        }
        let dim = sector_dimension(modes, particles);
        if dim > cap as u128 {
            return Err(BasisError::DimensionCap { dim, cap });
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut current = vec![0u16; particles];
        enumerate(modes as u16, &mut current, 0, 0, &mut states);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Ok(Self { modes, particles, states, index })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Sorted multiset of occupied modes for state `i`.
    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    /// Occupation-number vector of state `i`.
    pub fn occupation(&self, i: usize) -> Vec<u32> {
        let mut occ = vec![0u32; self.modes];
        for &m in &self.states[i] {
            occ[m as usize] += 1;
        }
        occ
    }

    /// Inverse of `state`: position of a sorted multiset.
    pub fn index_of(&self, multiset: &[u16]) -> Option<usize> {
        self.index.get(multiset).map(|&i| i as usize)
    }

    /// Occupancy of mode `m` in state `i`.
    pub fn occupancy(&self, i: usize, m: u16) -> u32 {
        self.states[i].iter().filter(|&&x| x == m).count() as u32
    }

    /// Multiplicity factor N!/prod(n_m!) of state `i`, as f64.
    pub fn multiplicity(&self, i: usize) -> f64 {
        let occ = self.occupation(i);
        let mut num = 1.0_f64;
        for k in 1..=self.particles {
            num *= k as f64;
        }
        let mut den = 1.0_f64;
        for n in occ {
            for k in 1..=n {
                den *= k as f64;
            }
        }
        num / den
    }
}

fn enumerate(modes: u16, current: &mut Vec<u16>, pos: usize, min_mode: u16, out: &mut Vec<Vec<u16>>) {
    if pos == current.len() {
        out.push(current.clone());
        return;
    }
    for m in min_mode..modes {
        current[pos] = m;
        enumerate(modes, current, pos + 1, m, out);
    }
}

/// Direct sum of sectors n = 0..=n_max (truncated Fock space).
#[derive(Debug)]
pub struct TruncatedBasis {
    sectors: Vec<Arc<SectorBasis>>,
    offsets: Vec<usize>,
    dim: usize,
}

impl TruncatedBasis {
    pub fn new(modes: usize, n_max: usize, cap: usize) -> Result<Self, BasisError> {
        let mut sectors = Vec::with_capacity(n_max + 1);
        let mut offsets = Vec::with_capacity(n_max + 1);
        let mut dim = 0;
        for n in 0..=n_max {
            let s = SectorBasis::new(modes, n, cap)?;
            offsets.push(dim);
            dim += s.dim();
            if dim > cap {
                return Err(BasisError::DimensionCap { dim: dim as u128, cap });
            }
            sectors.push(Arc::new(s));
        }
        Ok(Self { sectors, offsets, dim })
    }

    pub fn modes(&self) -> usize {
        self.sectors[0].modes()
    }

    pub fn n_max(&self) -> usize {
        self.sectors.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sector(&self, n: usize) -> &Arc<SectorBasis> {
        &self.sectors[n]
    }

    pub fn offset(&self, n: usize) -> usize {
        self.offsets[n]
    }

    /// Total dimension of sectors 0..=n.
    pub fn dim_through(&self, n: usize) -> usize {
        self.offsets[n] + self.sectors[n].dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_modes_two_particles_matches_stars_and_bars() {
        let b = SectorBasis::new(2, 2, 100).unwrap();
        assert_eq!(b.dim(), 3);
        assert_eq!(b.occupation(0), vec![2, 0]);
        assert_eq!(b.occupation(1), vec![1, 1]);
        assert_eq!(b.occupation(2), vec![0, 2]);
    }

    #[test]
    fn dimension_formula_matches_enumeration() {
        for (m, n) in [(3, 3), (4, 2), (5, 1), (2, 5)] {
            let b = SectorBasis::new(m, n, 1_000_000).unwrap();
            assert_eq!(b.dim() as u128, sector_dimension(m, n));
        }
        // the documented mid-size case
        assert_eq!(sector_dimension(64, 2), 2080);
    }

    #[test]
    fn index_is_inverse_of_states() {
        let b = SectorBasis::new(4, 3, 10_000).unwrap();
        for i in 0..b.dim() {
            assert_eq!(b.index_of(b.state(i)), Some(i));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let err = SectorBasis::new(64, 4, 1000).unwrap_err();
        assert!(matches!(err, BasisError::DimensionCap { .. }));
    }

    #[test]
    fn truncated_basis_has_sector_sizes() {
        let t = TruncatedBasis::new(2, 1, 100).unwrap();
        assert_eq!(t.sector(0).dim(), 1);
        assert_eq!(t.sector(1).dim(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.offset(1), 1);
    }

    #[test]
    fn vacuum_sector_is_one_dimensional() {
        let b = SectorBasis::new(5, 0, 10).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.state(0), &[] as &[u16]);
    }

    #[test]
    fn multiplicity_counts_permutations() {
        let b = SectorBasis::new(2, 3, 100).unwrap();
        // (3,0): 3!/3! = 1 ; (2,1): 3!/2! = 3
        assert_eq!(b.multiplicity(0), 1.0);
        assert_eq!(b.multiplicity(1), 3.0);
    }
}
