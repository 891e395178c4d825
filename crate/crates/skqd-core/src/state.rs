//! State vectors over the full 2^n space and over fixed-Hamming-weight
//! sectors.
//!
//! Sector vectors store amplitudes against the lexicographically ordered
//! basis of weight-k bitstrings; the index ↔ bitstring bijection is the
//! combinadic rank/unrank of [`crate::bits`].

use std::sync::Arc;

use num_complex::Complex64;

use crate::bits::{self, BinomTable};
use crate::error::{Error, Result};

/// Hard safety cap on sector dimension (allocation sanity; the configurable
/// resource caps in `analysis` are far below this).
pub const SECTOR_DIM_HARD_CAP: u64 = 1 << 24;

/// Hard cap on full-space representation (2^26 amplitudes = 1 GiB).
pub const FULL_SPACE_SITE_CAP: usize = 26;

/// Normalized amplitudes over all 2^n bitstrings; the amplitude index is the
/// numeric value of the bitstring (site 0 = most significant bit).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub n_sites: usize,
    pub amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > FULL_SPACE_SITE_CAP {
            return Err(Error::InvalidSize(format!(
                "full-space vector supports 1..={FULL_SPACE_SITE_CAP} sites, got {n_sites}"
            )));
        }
        Ok(StateVector { n_sites, amps: vec![Complex64::new(0.0, 0.0); 1usize << n_sites] })
    }

    /// Computational basis state |mask⟩.
    pub fn basis_state(n_sites: usize, mask: u64) -> Result<Self> {
        let mut s = Self::zero(n_sites)?;
        s.amps[mask as usize] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
    }

    /// ⟨self|other⟩.
    pub fn dot(&self, other: &Self) -> Result<Complex64> {
        if self.n_sites != other.n_sites {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} sites",
                self.n_sites, other.n_sites
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Probability mass outside the weight-k sector.
    pub fn sector_leakage(&self, k: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| (*idx as u64).count_ones() as usize != k)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Restrict to the weight-k sector. Errors if more than `tol` probability
    /// mass lies outside the sector; the result is renormalized.
    pub fn project_to_sector(&self, k: usize, tol: f64) -> Result<SectorVector> {
        let leakage = self.sector_leakage(k);
        if leakage > tol {
            return Err(Error::SymmetryViolation(format!(
                "state has {leakage:.3e} probability outside weight-{k} sector"
            )));
        }
        let basis = SectorBasis::shared(self.n_sites, k)?;
        let amps = basis.masks.iter().map(|&m| self.amps[m as usize]).collect();
        let mut v = SectorVector { basis, amps };
        v.normalize();
        Ok(v)
    }
}

/// Lexicographically ordered basis of weight-k bitstrings on n sites.
#[derive(Debug)]
pub struct SectorBasis {
    pub n_sites: usize,
    pub weight: usize,
    pub masks: Vec<u64>,
    binom: BinomTable,
}

impl SectorBasis {
    pub fn new(n_sites: usize, weight: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > bits::MAX_SITES {
            return Err(Error::InvalidSize(format!("bad site count {n_sites}")));
        }
        if weight > n_sites {
            return Err(Error::InvalidSector(format!(
                "weight {weight} exceeds {n_sites} sites"
            )));
        }
        let binom = BinomTable::new(n_sites);
        let dim = binom.c(n_sites, weight);
        if dim > SECTOR_DIM_HARD_CAP {
            return Err(Error::ResourceCap(format!(
                "sector dimension C({n_sites},{weight}) = {dim} exceeds hard cap {SECTOR_DIM_HARD_CAP}"
            )));
        }
        Ok(SectorBasis { n_sites, weight, masks: bits::weight_k_masks(n_sites, weight), binom })
    }

    pub fn shared(n_sites: usize, weight: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(n_sites, weight)?))
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    /// Index of a weight-k mask in this basis.
    #[inline(always)]
    pub fn rank(&self, mask: u64) -> usize {
        debug_assert_eq!(mask.count_ones() as usize, self.weight);
        bits::rank(&self.binom, mask, self.n_sites)
    }

    #[inline(always)]
    pub fn mask(&self, index: usize) -> u64 {
        self.masks[index]
    }
}

/// Normalized amplitudes over one fixed-Hamming-weight sector.
#[derive(Debug, Clone)]
pub struct SectorVector {
    pub basis: Arc<SectorBasis>,
    pub amps: Vec<Complex64>,
}

impl SectorVector {
    pub fn zero(basis: Arc<SectorBasis>) -> Self {
        let dim = basis.dim();
        SectorVector { basis, amps: vec![Complex64::new(0.0, 0.0); dim] }
    }

    pub fn basis_state(basis: Arc<SectorBasis>, mask: u64) -> Self {
        let idx = basis.rank(mask);
        let mut v = Self::zero(basis);
        v.amps[idx] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites
    }

    pub fn weight(&self) -> usize {
        self.basis.weight
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
    }

    pub fn dot(&self, other: &Self) -> Result<Complex64> {
        if self.n_sites() != other.n_sites() || self.weight() != other.weight() {
            return Err(Error::DimensionMismatch(format!(
                "sector ({}, {}) vs ({}, {})",
                self.n_sites(),
                self.weight(),
                other.n_sites(),
                other.weight()
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Embed into the full 2^n space.
    pub fn embed(&self) -> Result<StateVector> {
        let mut full = StateVector::zero(self.n_sites())?;
        for (i, &m) in self.basis.masks.iter().enumerate() {
            full.amps[m as usize] = self.amps[i];
        }
        Ok(full)
    }
}

/// A state in either representation.
#[derive(Debug, Clone)]
pub enum State {
    Full(StateVector),
    Sector(SectorVector),
}

impl State {
    pub fn n_sites(&self) -> usize {
        match self {
            State::Full(s) => s.n_sites,
            State::Sector(s) => s.n_sites(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            State::Full(s) => s.dim(),
            State::Sector(s) => s.dim(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            State::Full(s) => s.norm(),
            State::Sector(s) => s.norm(),
        }
    }

    pub fn normalize(&mut self) {
        match self {
            State::Full(s) => s.normalize(),
            State::Sector(s) => s.normalize(),
        }
    }

    /// The sector weight if this is a sector-resident state.
    pub fn sector_weight(&self) -> Option<usize> {
        match self {
            State::Full(_) => None,
            State::Sector(s) => Some(s.weight()),
        }
    }

    /// Nonzero (bitstring, probability) pairs in lexicographic bitstring
    /// order.
    pub fn support_probabilities(&self) -> Vec<(u64, f64)> {
        match self {
            State::Full(s) => s
                .amps
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm_sqr() > 0.0)
                .map(|(i, a)| (i as u64, a.norm_sqr()))
                .collect(),
            State::Sector(s) => s
                .basis
                .masks
                .iter()
                .zip(&s.amps)
                .filter(|(_, a)| a.norm_sqr() > 0.0)
                .map(|(&m, a)| (m, a.norm_sqr()))
                .collect(),
        }
    }
}

impl From<StateVector> for State {
    fn from(s: StateVector) -> Self {
        State::Full(s)
    }
}

impl From<SectorVector> for State {
    fn from(s: SectorVector) -> Self {
        State::Sector(s)
    }
}
