//! Exact-diagonalization oracle (full-space and sector-restricted) and
//! ground-state sparsity diagnostics.

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{self, EigenOptions, SymOp};
use crate::error::{Error, Result};
use crate::hamiltonian::{SectorTerms, TermList};
use crate::sparse::CsrMatrix;
use crate::state::{SectorBasis, SectorVector, State, StateVector};

/// Resource caps for the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdCaps {
    /// Full-space diagonalization allowed up to this many sites.
    pub max_full_sites: usize,
    /// Sector diagonalization allowed up to this many basis states.
    pub max_sector_dim: u64,
}

impl Default for EdCaps {
    fn default() -> Self {
        EdCaps { max_full_sites: 20, max_sector_dim: 5_000_000 }
    }
}

/// Spectral gaps below this are flagged as degenerate: at sector-crossing
/// fields two sectors tie and the ground state is convention-dependent.
pub const DEGENERACY_GAP: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EdResult {
    pub energy: f64,
    pub ground_state: State,
    /// Distance to the next (Ritz) value when available.
    pub gap: Option<f64>,
    pub degenerate: bool,
    pub residual: f64,
}

/// Full-space real symmetric matvec over compiled Pauli terms.
struct FullSpaceOp {
    dim: usize,
    terms: Vec<(u64, u64, f64)>, // (flip, sign_mask, real factor)
}

impl FullSpaceOp {
    fn new(h: &TermList) -> Result<Self> {
        let compiled = h.compile()?;
        let mut terms = Vec::with_capacity(compiled.len());
        for t in &compiled {
            if t.factor.im.abs() > 0.0 {
                return Err(Error::Domain(
                    "Hamiltonian has complex matrix elements in the computational basis".into(),
                ));
            }
            terms.push((t.flip, t.sign_mask, t.factor.re));
        }
        Ok(FullSpaceOp { dim: 1usize << h.n_sites, terms })
    }

    #[inline]
    fn row(&self, idx: usize, x: &[f64]) -> f64 {
        let idx = idx as u64;
        let mut acc = 0.0;
        for &(flip, sign, fac) in &self.terms {
            let src = idx ^ flip;
            let v = fac * x[src as usize];
            if (src & sign).count_ones() % 2 == 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc
    }
}

impl SymOp for FullSpaceOp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        if self.dim >= 8192 {
            y.par_iter_mut().enumerate().for_each(|(i, out)| *out = self.row(i, x));
        } else {
            for (i, out) in y.iter_mut().enumerate() {
                *out = self.row(i, x);
            }
        }
    }
}

/// Lowest eigenpair of H on the full 2^n space.
pub fn ed_ground(h: &TermList, caps: &EdCaps) -> Result<EdResult> {
    if h.n_sites > caps.max_full_sites {
        return Err(Error::ResourceCap(format!(
            "full-space diagonalization capped at {} sites (got {}); use the sector oracle",
            caps.max_full_sites, h.n_sites
        )));
    }
    let op = FullSpaceOp::new(h)?;
    let sol = eigen::lowest_eigenpair(&op, &EigenOptions::default())?;
    let gap = sol.second_value.map(|v| v - sol.value);
    let amps: Vec<Complex64> = sol.vector.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(EdResult {
        energy: sol.value,
        ground_state: State::Full(StateVector { n_sites: h.n_sites, amps }),
        gap,
        degenerate: gap.is_some_and(|g| g < DEGENERACY_GAP),
        residual: sol.residual,
    })
}

/// Lowest eigenpair of H restricted to the weight-k sector. Requires a
/// weight-preserving Hamiltonian (h_x = 0).
pub fn ed_ground_sector(h: &TermList, k: usize, caps: &EdCaps) -> Result<EdResult> {
    let structured = SectorTerms::from_terms(h)?;
    structured.require_weight_preserving()?;
    let table = crate::bits::BinomTable::new(h.n_sites);
    let dim = table.c(h.n_sites, k);
    if dim > caps.max_sector_dim {
        return Err(Error::ResourceCap(format!(
            "sector dimension C({}, {k}) = {dim} exceeds cap {}",
            h.n_sites, caps.max_sector_dim
        )));
    }
    let basis = SectorBasis::shared(h.n_sites, k)?;
    let csr = CsrMatrix::sector_hamiltonian(&structured, &basis);
    let sol = eigen::lowest_eigenpair(&csr, &EigenOptions::default())?;
    let gap = sol.second_value.map(|v| v - sol.value);
    let amps: Vec<Complex64> = sol.vector.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(EdResult {
        energy: sol.value,
        ground_state: State::Sector(SectorVector { basis, amps }),
        gap,
        degenerate: gap.is_some_and(|g| g < DEGENERACY_GAP),
        residual: sol.residual,
    })
}

/// ⟨s|H|s⟩ for a normalized state.
pub fn rayleigh_quotient(h: &TermList, s: &State) -> Result<f64> {
    match s {
        State::Full(sv) => {
            let hs = h.apply(sv)?;
            Ok(sv.dot(&hs)?.re)
        }
        State::Sector(sv) => {
            let hs = h.apply_sector(sv)?;
            Ok(sv.dot(&hs)?.re)
        }
    }
}

// ---------------------------------------------------------------------------
// Sparsity diagnostics
// ---------------------------------------------------------------------------

/// Descending probability profile of a state: coverage prefix sums α_L,
/// pointwise floors β_L = p_L, and the inverse participation ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsityProfile {
    /// |g_k|² sorted descending.
    pub sorted_probs: Vec<f64>,
    /// α_L = Σ_{k≤L} p_k (1-indexed: alpha[L−1]).
    pub alpha: Vec<f64>,
    /// 1 / Σ p².
    pub ipr: f64,
}

impl SparsityProfile {
    pub fn alpha_at(&self, l: usize) -> f64 {
        self.alpha[l - 1]
    }

    /// β_L = p_L.
    pub fn beta_at(&self, l: usize) -> f64 {
        self.sorted_probs[l - 1]
    }
}

fn probabilities(state: &State) -> Vec<f64> {
    match state {
        State::Full(s) => s.amps.iter().map(|a| a.norm_sqr()).collect(),
        State::Sector(s) => s.amps.iter().map(|a| a.norm_sqr()).collect(),
    }
}

pub fn sparsity_profile(state: &State) -> SparsityProfile {
    let mut probs = probabilities(state);
    probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    while probs.len() > 1 && *probs.last().unwrap() == 0.0 {
        probs.pop();
    }
    let mut alpha = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    let mut sq = 0.0;
    for &p in &probs {
        acc += p;
        sq += p * p;
        alpha.push(acc);
    }
    SparsityProfile { sorted_probs: probs, alpha, ipr: 1.0 / sq }
}

/// Inverse participation ratio without sorting.
pub fn ipr(state: &State) -> f64 {
    let sq: f64 = probabilities(state).iter().map(|p| p * p).sum();
    1.0 / sq
}

/// Probability mass a state carries on a set of bitstrings: the α value of
/// the sampled basis.
pub fn basis_alpha(state: &State, masks: &[u64]) -> f64 {
    match state {
        State::Full(s) => masks.iter().map(|&m| s.amps[m as usize].norm_sqr()).sum(),
        State::Sector(s) => masks
            .iter()
            .filter(|m| m.count_ones() as usize == s.weight())
            .map(|&m| s.amps[s.basis.rank(m)].norm_sqr())
            .sum(),
    }
}

// ---------------------------------------------------------------------------
// Oracle memoization (SKQD_LAB_CACHE)
// ---------------------------------------------------------------------------

/// Summary of a sector-oracle solve, small enough to memoize on disk.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CachedSectorSolve {
    pub energy: f64,
    pub gap: Option<f64>,
    pub degenerate: bool,
    pub log_ipr_nat: f64,
}

/// File-per-key cache in the directory named by `SKQD_LAB_CACHE`.
#[derive(Debug, Clone)]
pub struct OracleCache {
    dir: PathBuf,
}

pub const CACHE_ENV_VAR: &str = "SKQD_LAB_CACHE";

impl OracleCache {
    pub fn from_env() -> Option<Self> {
        let dir = std::env::var_os(CACHE_ENV_VAR)?;
        if dir.is_empty() {
            return None;
        }
        Some(OracleCache { dir: PathBuf::from(dir) })
    }

    pub fn new(dir: PathBuf) -> Self {
        OracleCache { dir }
    }

    fn path_for(&self, h: &TermList, k: usize) -> Result<PathBuf> {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(b"sector-ed-v1:");
        hasher.update(h.n_sites.to_le_bytes());
        hasher.update(k.to_le_bytes());
        hasher.update(h.to_json()?.as_bytes());
        let digest = hasher.finalize();
        let mut name = String::with_capacity(64);
        for byte in digest {
            name.push_str(&format!("{byte:02x}"));
        }
        Ok(self.dir.join(format!("{name}.json")))
    }

    pub fn get(&self, h: &TermList, k: usize) -> Option<CachedSectorSolve> {
        let path = self.path_for(h, k).ok()?;
        let data = std::fs::read_to_string(path).ok()?;
        serde_json::from_str(&data).ok()
    }

    pub fn put(&self, h: &TermList, k: usize, value: &CachedSectorSolve) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(h, k)?;
        std::fs::write(path, serde_json::to_string(value)?)?;
        Ok(())
    }
}

/// Sector solve summary, consulting the cache when one is supplied. Returns
/// the full `EdResult` only on a cache miss (the cached record has no state
/// vector).
pub fn sector_solve_summary(
    h: &TermList,
    k: usize,
    caps: &EdCaps,
    cache: Option<&OracleCache>,
) -> Result<(CachedSectorSolve, Option<EdResult>)> {
    if let Some(c) = cache {
        if let Some(hit) = c.get(h, k) {
            return Ok((hit, None));
        }
    }
    let ed = ed_ground_sector(h, k, caps)?;
    let summary = CachedSectorSolve {
        energy: ed.energy,
        gap: ed.gap,
        degenerate: ed.degenerate,
        log_ipr_nat: ipr(&ed.ground_state).ln(),
    };
    if let Some(c) = cache {
        c.put(h, k, &summary)?;
    }
    Ok((summary, Some(ed)))
}
