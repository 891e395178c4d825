//! Experiment orchestration: magnetization-sector sweeps, longitudinal-field
//! sweeps, and (Δ, h_z) sparsity maps, with CSV emission.
//!
//! Reference energies exploit an exact identity: inside the weight-k sector
//! the Zeeman term is the constant −h_z(N−2k), so the sector spectrum at any
//! field is the zero-field spectrum shifted by −h_z(N−2k) and the sector
//! ground state does not depend on h_z. One oracle solve per sector therefore
//! serves an entire field grid.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{sector_solve_summary, CachedSectorSolve, EdCaps, EdResult, OracleCache};
use crate::bits::BinomTable;
use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, SectorHopPairs};
use crate::hamiltonian::{build_terms, ModelParams, SectorTerms};
use crate::sampling::NoiseModel;
use crate::skqd::{skqd_run, OracleMode, ShotSpec, SkqdTask};
use crate::state::SectorBasis;
use crate::states::{InitialStateSpec, LayoutKind, StateKind};

/// Energies closer than this are treated as tied; ties break toward smaller
/// k (larger magnetization).
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Knobs shared by every SKQD invocation inside a sweep.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub evolution: EvolutionConfig,
    pub shots: ShotSpec,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub caps: EdCaps,
    pub cache: Option<OracleCache>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            evolution: EvolutionConfig::standard(),
            shots: ShotSpec::Count(300_000),
            noise: None,
            seed: 0,
            caps: EdCaps::default(),
            cache: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Sector oracle
// ---------------------------------------------------------------------------

struct SectorRef {
    summary: CachedSectorSolve,
    /// Present when solved in-process (cache hits carry no state vector).
    ed: Option<EdResult>,
}

/// Zero-field sector solves for a fixed (geometry, J, Δ), shifted exactly to
/// any longitudinal field.
pub struct SectorOracle {
    n_sites: usize,
    per_k: BTreeMap<usize, SectorRef>,
}

impl SectorOracle {
    /// Solve the listed sectors of the zero-field Hamiltonian. Fails with a
    /// resource error if any sector exceeds the caps.
    pub fn build(
        params: &ModelParams,
        sectors: &[usize],
        caps: &EdCaps,
        cache: Option<&OracleCache>,
    ) -> Result<Self> {
        let zero_field = ModelParams { h_z: 0.0, ..params.clone() };
        let terms = build_terms(&zero_field);
        let solved: Vec<(usize, SectorRef)> = sectors
            .par_iter()
            .map(|&k| {
                let (summary, ed) = sector_solve_summary(&terms, k, caps, cache)?;
                Ok((k, SectorRef { summary, ed }))
            })
            .collect::<Result<_>>()?;
        Ok(SectorOracle { n_sites: params.geometry.n_sites, per_k: solved.into_iter().collect() })
    }

    pub fn sectors(&self) -> Vec<usize> {
        self.per_k.keys().copied().collect()
    }

    /// Sector ground energy at field h_z via the exact Zeeman shift.
    pub fn energy_at(&self, k: usize, h_z: f64) -> Option<f64> {
        let m = (self.n_sites as f64) - 2.0 * (k as f64);
        Some(self.per_k.get(&k)?.summary.energy - h_z * m)
    }

    pub fn log_ipr_nat(&self, k: usize) -> Option<f64> {
        Some(self.per_k.get(&k)?.summary.log_ipr_nat)
    }

    pub fn ed_result(&self, k: usize) -> Option<&EdResult> {
        self.per_k.get(&k)?.ed.as_ref()
    }

    /// (best k, its energy, degenerate?) at field h_z over the solved
    /// sectors. Ties within [`TIE_TOLERANCE`] break toward smaller k; a tie
    /// between different sectors marks the point degenerate.
    pub fn best_at(&self, h_z: f64) -> (usize, f64, bool) {
        let energies: Vec<(usize, f64)> = self
            .per_k
            .keys()
            .map(|&k| (k, self.energy_at(k, h_z).unwrap()))
            .collect();
        let min = energies.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        let best_k = energies
            .iter()
            .filter(|(_, e)| *e <= min + TIE_TOLERANCE)
            .map(|(k, _)| *k)
            .min()
            .unwrap();
        let degenerate = energies
            .iter()
            .filter(|(k, e)| *k != best_k && *e <= min + TIE_TOLERANCE)
            .count()
            > 0;
        (best_k, min, degenerate)
    }
}

// ---------------------------------------------------------------------------
// Sector sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SectorRunDetail {
    pub k: usize,
    pub energy: f64,
    pub basis_size: usize,
    pub shots_discarded: u64,
    pub gamma0_sq: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SectorSweepResult {
    pub per_sector: Vec<SectorRunDetail>,
    pub best_k: usize,
    pub energy: f64,
    /// N − 2·best_k.
    pub magnetization: f64,
    /// (k_ref, E_ref) from the oracle when available.
    pub reference: Option<(usize, f64)>,
}

/// Shared per-sector machinery a field sweep reuses across grid points.
#[derive(Default)]
pub struct SectorWorkspace {
    pairs: BTreeMap<usize, Arc<SectorHopPairs>>,
}

impl SectorWorkspace {
    /// Precompute hop pair lists for the given sectors.
    pub fn prepare(params: &ModelParams, sectors: &[usize]) -> Result<Self> {
        let terms = build_terms(&ModelParams { h_z: 0.0, ..params.clone() });
        let structured = SectorTerms::from_terms(&terms)?;
        let pairs: Vec<(usize, Arc<SectorHopPairs>)> = sectors
            .par_iter()
            .map(|&k| {
                let basis = SectorBasis::new(params.geometry.n_sites, k)?;
                Ok((k, Arc::new(SectorHopPairs::build(&structured, &basis))))
            })
            .collect::<Result<_>>()?;
        Ok(SectorWorkspace { pairs: pairs.into_iter().collect() })
    }
}

/// Run SKQD with a W-state initialization and sector post-selection for each
/// listed sector; the smallest energy designates the ground-state
/// approximation and its magnetization.
pub fn sector_sweep(
    params: &ModelParams,
    sectors: &[usize],
    settings: &SweepSettings,
    grid_index: u64,
    oracle: Option<&SectorOracle>,
    workspace: Option<&SectorWorkspace>,
) -> Result<SectorSweepResult> {
    if params.h_x != 0.0 {
        return Err(Error::SymmetryViolation(
            "sector sweeps need h_x = 0; the transverse field breaks the sector structure".into(),
        ));
    }
    let n = params.geometry.n_sites;
    if sectors.is_empty() {
        return Err(Error::SweepFailure("no sectors to sweep".into()));
    }
    for &k in sectors {
        if k > n / 2 {
            return Err(Error::InvalidSector(format!(
                "sector sweep covers k = 0..={}, got {k}",
                n / 2
            )));
        }
    }

    let mut per_sector = Vec::with_capacity(sectors.len());
    let mut empty_failures = 0usize;
    for &k in sectors {
        let mut task = SkqdTask::new(
            params,
            InitialStateSpec { kind: StateKind::WStateProduct { k }, layout: LayoutKind::Snake },
        );
        task.evolution = settings.evolution;
        task.shots = settings.shots;
        task.noise = settings.noise;
        task.filter_k = Some(k);
        task.seed = settings.seed;
        task.grid_index = grid_index;
        task.oracle = match oracle.and_then(|o| o.ed_result(k)) {
            Some(ed) => OracleMode::Provided(ed),
            None => OracleMode::Skip,
        };
        task.hop_pairs = workspace.and_then(|w| w.pairs.get(&k).cloned());
        match skqd_run(&task) {
            Ok(r) => per_sector.push(SectorRunDetail {
                k,
                energy: r.energy,
                basis_size: r.basis_size,
                shots_discarded: r.shots_discarded,
                gamma0_sq: r.gamma0_sq,
            }),
            Err(Error::EmptySubspace(_)) => empty_failures += 1,
            Err(e) => return Err(e),
        }
    }
    if per_sector.is_empty() {
        return Err(Error::SweepFailure(format!(
            "all {empty_failures} swept sectors were empty after filtering"
        )));
    }

    let min = per_sector.iter().map(|d| d.energy).fold(f64::INFINITY, f64::min);
    let best_k = per_sector
        .iter()
        .filter(|d| d.energy <= min + TIE_TOLERANCE)
        .map(|d| d.k)
        .min()
        .unwrap();
    let energy = per_sector.iter().find(|d| d.k == best_k).unwrap().energy;
    let reference = oracle.map(|o| {
        let (k_ref, e_ref, _) = o.best_at(params.h_z);
        (k_ref, e_ref)
    });
    Ok(SectorSweepResult {
        per_sector,
        best_k,
        energy,
        magnetization: n as f64 - 2.0 * best_k as f64,
        reference,
    })
}

// ---------------------------------------------------------------------------
// Field sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FieldSweepRow {
    pub h_z: f64,
    pub best_k: usize,
    pub magnetization: f64,
    pub energy: f64,
    pub reference_energy: Option<f64>,
    pub reference_k: Option<usize>,
    pub basis_size: usize,
    pub shots_discarded: u64,
    /// Reference-side sector tie at this field value.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct SectorDetailRow {
    pub h_z: f64,
    pub k: usize,
    pub energy: f64,
    pub basis_size: usize,
    pub shots_discarded: u64,
}

#[derive(Debug)]
pub struct FieldSweepOutput {
    pub rows: Vec<FieldSweepRow>,
    pub details: Vec<SectorDetailRow>,
    /// Swept sectors per grid point (after window pruning).
    pub swept_sectors: Vec<Vec<usize>>,
}

/// Uniformly spaced grid, inclusive of both endpoints.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * (i as f64) / ((steps - 1) as f64))
        .collect()
}

/// Sweep the longitudinal field. When the oracle is affordable, grid points
/// carry reference columns and (with `sector_window = Some(w)`) only sectors
/// within w of the reference optimum are swept.
pub fn field_sweep(
    params_base: &ModelParams,
    hz_grid: &[f64],
    sectors: Option<&[usize]>,
    sector_window: Option<usize>,
    settings: &SweepSettings,
) -> Result<FieldSweepOutput> {
    if hz_grid.is_empty() {
        return Err(Error::SweepFailure("empty field grid".into()));
    }
    let n = params_base.geometry.n_sites;
    let all_sectors: Vec<usize> = match sectors {
        Some(s) => {
            let mut s = s.to_vec();
            s.sort_unstable();
            s.dedup();
            s
        }
        None => (0..=n / 2).collect(),
    };

    let table = BinomTable::new(n);
    let affordable = all_sectors
        .iter()
        .all(|&k| table.c(n, k) <= settings.caps.max_sector_dim);
    let oracle = if affordable {
        Some(SectorOracle::build(
            params_base,
            &all_sectors,
            &settings.caps,
            settings.cache.as_ref(),
        )?)
    } else {
        None
    };
    let workspace = SectorWorkspace::prepare(params_base, &all_sectors)?;

    let point_results: Vec<Result<(FieldSweepRow, Vec<SectorDetailRow>, Vec<usize>)>> = hz_grid
        .par_iter()
        .enumerate()
        .map(|(grid_index, &h_z)| {
            let params = ModelParams { h_z, ..params_base.clone() };
            let swept: Vec<usize> = match (&oracle, sector_window) {
                (Some(o), Some(w)) => {
                    let (k_ref, _, _) = o.best_at(h_z);
                    all_sectors
                        .iter()
                        .copied()
                        .filter(|&k| k + w >= k_ref && k <= k_ref + w)
                        .collect()
                }
                _ => all_sectors.clone(),
            };
            let sweep = sector_sweep(
                &params,
                &swept,
                settings,
                grid_index as u64,
                oracle.as_ref(),
                Some(&workspace),
            )?;
            let (reference_k, reference_energy, degenerate) = match &oracle {
                Some(o) => {
                    let (k_ref, e_ref, deg) = o.best_at(h_z);
                    (Some(k_ref), Some(e_ref), deg)
                }
                None => (None, None, false),
            };
            let best = sweep.per_sector.iter().find(|d| d.k == sweep.best_k).unwrap();
            let row = FieldSweepRow {
                h_z,
                best_k: sweep.best_k,
                magnetization: sweep.magnetization,
                energy: sweep.energy,
                reference_energy,
                reference_k,
                basis_size: best.basis_size,
                shots_discarded: best.shots_discarded,
                degenerate,
            };
            let details = sweep
                .per_sector
                .iter()
                .map(|d| SectorDetailRow {
                    h_z,
                    k: d.k,
                    energy: d.energy,
                    basis_size: d.basis_size,
                    shots_discarded: d.shots_discarded,
                })
                .collect();
            Ok((row, details, swept))
        })
        .collect();

    let mut rows = Vec::with_capacity(hz_grid.len());
    let mut details = Vec::new();
    let mut swept_sectors = Vec::with_capacity(hz_grid.len());
    for r in point_results {
        let (row, det, swept) = r?;
        rows.push(row);
        details.extend(det);
        swept_sectors.push(swept);
    }
    Ok(FieldSweepOutput { rows, details, swept_sectors })
}

// ---------------------------------------------------------------------------
// Sparsity map
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SparsityRow {
    pub delta: f64,
    pub h_z: f64,
    pub log_ipr_nat: f64,
    pub log_ipr_10: f64,
    pub ground_k: usize,
    pub energy: f64,
    pub degenerate: bool,
}

/// Ground-state density map over (Δ, h_z): at every grid point the ground
/// sector is found by minimizing shifted zero-field sector energies, and the
/// inverse participation ratio of the winning sector's ground state is
/// reported. Rows are ordered Δ-major, then h_z.
pub fn sparsity_map(
    n: usize,
    j: f64,
    delta_grid: &[f64],
    hz_grid: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<SparsityRow>> {
    if delta_grid.is_empty() || hz_grid.is_empty() {
        return Err(Error::SweepFailure("empty sparsity grid".into()));
    }
    let table = BinomTable::new(n);
    let widest = table.c(n, n / 2);
    if widest > settings.caps.max_sector_dim {
        return Err(Error::ResourceCap(format!(
            "half-filling sector C({n},{}) = {widest} exceeds cap {}; use a smaller n or raise the cap",
            n / 2,
            settings.caps.max_sector_dim
        )));
    }
    let geometry = crate::lattice::Geometry::chain(n)?;
    let sectors: Vec<usize> = (0..=n / 2).collect();

    let per_delta: Vec<Result<Vec<SparsityRow>>> = delta_grid
        .par_iter()
        .map(|&delta| {
            let params = ModelParams { j, delta, h_z: 0.0, h_x: 0.0, geometry: geometry.clone() };
            let oracle =
                SectorOracle::build(&params, &sectors, &settings.caps, settings.cache.as_ref())?;
            let rows = hz_grid
                .iter()
                .map(|&h_z| {
                    let (ground_k, energy, degenerate) = oracle.best_at(h_z);
                    let log_ipr_nat = oracle.log_ipr_nat(ground_k).unwrap();
                    SparsityRow {
                        delta,
                        h_z,
                        log_ipr_nat,
                        log_ipr_10: log_ipr_nat / std::f64::consts::LN_10,
                        ground_k,
                        energy,
                        degenerate,
                    }
                })
                .collect();
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::with_capacity(delta_grid.len() * hz_grid.len());
    for r in per_delta {
        rows.extend(r?);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn field_sweep_csv(rows: &[FieldSweepRow]) -> String {
    let mut out =
        String::from("h_z,best_k,magnetization,energy,reference_energy,reference_k,basis_size,shots_discarded\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.h_z,
            r.best_k,
            r.magnetization,
            r.energy,
            fmt_opt_f64(r.reference_energy),
            fmt_opt_usize(r.reference_k),
            r.basis_size,
            r.shots_discarded
        ));
    }
    out
}

pub fn sector_detail_csv(details: &[SectorDetailRow]) -> String {
    let mut out = String::from("h_z,k,energy,basis_size,shots_discarded\n");
    for d in details {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.h_z, d.k, d.energy, d.basis_size, d.shots_discarded
        ));
    }
    out
}

pub fn sparsity_map_csv(rows: &[SparsityRow]) -> String {
    let mut out = String::from("delta,h_z,log_ipr_nat,log_ipr_10,ground_k,energy,degenerate\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.delta, r.h_z, r.log_ipr_nat, r.log_ipr_10, r.ground_k, r.energy, r.degenerate
        ));
    }
    out
}
