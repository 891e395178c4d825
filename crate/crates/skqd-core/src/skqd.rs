//! The sampled-subspace diagonalization engine.
//!
//! Pipeline: prepare an initial state, generate Krylov states, sample
//! bitstrings from each, optionally corrupt with readout noise and
//! post-select on Hamming weight, merge the samples into an orthonormal
//! bitstring basis, project H onto that basis (pure Galerkin: matrix
//! elements leading outside the basis are dropped, which is what makes the
//! result a variational upper bound), and solve the small eigenproblem.
//!
//! Distinct computational bitstrings are orthonormal, so the overlap matrix
//! of the generalized eigenproblem is the identity and the solver works with
//! the standard symmetric problem.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{ed_ground, ed_ground_sector, EdCaps, EdResult};
use crate::eigen::{self, EigenOptions};
use crate::error::{Error, Result};
use crate::evolution::{krylov_states_cached, EvolutionConfig, SectorHopPairs};
use crate::hamiltonian::{build_terms, ModelParams, TermList};
use crate::sampling::{
    apply_readout_noise, filter_sector, merge_tables, sample, sample_support, task_seed,
    NoiseModel, SampleTable,
};
use crate::sparse::CsrMatrix;
use crate::state::State;
use crate::states::{overlap_sq, InitialStateSpec};

/// Sampled-bitstring basis with the projected Hamiltonian. The overlap
/// matrix S_eff is the identity (distinct bitstrings are orthonormal) and is
/// therefore not materialized.
#[derive(Debug, Clone)]
pub struct SubspaceProblem {
    pub n_sites: usize,
    /// Distinct bitstrings in lexicographic order.
    pub basis: Vec<u64>,
    /// h_eff[a][b] = ⟨b_a|H|b_b⟩, real symmetric.
    pub h_eff: CsrMatrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkqdResult {
    pub energy: f64,
    #[serde(skip)]
    pub ground_vector: Vec<f64>,
    pub basis_size: usize,
    pub gamma0_sq: Option<f64>,
    pub residual: f64,
    pub shots_discarded: u64,
}

/// Project H onto a set of distinct bitstrings: for every basis string and
/// every Pauli term, the image string is looked up in a hash index and
/// contributes a matrix element when it lands inside the basis.
pub fn project_hamiltonian(h: &TermList, basis: &[u64]) -> Result<SubspaceProblem> {
    if basis.is_empty() {
        return Err(Error::EmptySubspace("no bitstrings to project onto".into()));
    }
    let dim_limit = 1u128 << h.n_sites;
    let mut index: HashMap<u64, u32> = HashMap::with_capacity(basis.len());
    for (i, &mask) in basis.iter().enumerate() {
        if (mask as u128) >= dim_limit {
            return Err(Error::InvalidBasis(format!(
                "bitstring {mask:#b} out of range for {} sites",
                h.n_sites
            )));
        }
        if index.insert(mask, i as u32).is_some() {
            return Err(Error::InvalidBasis(format!("duplicate bitstring {mask:#b} in basis")));
        }
    }
    let compiled = h.compile()?;
    let mut real_terms = Vec::with_capacity(compiled.len());
    for t in &compiled {
        if t.factor.im.abs() > 0.0 {
            return Err(Error::Domain(
                "projection needs real matrix elements (odd Y strings unsupported)".into(),
            ));
        }
        real_terms.push((t.flip, t.sign_mask, t.factor.re));
    }

    let build_row = |a: usize| -> Vec<(u32, f64)> {
        let mask_a = basis[a];
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(8);
        for &(flip, sign, fac) in &real_terms {
            let src = mask_a ^ flip;
            if let Some(&col) = index.get(&src) {
                let val = if (src & sign).count_ones() % 2 == 0 { fac } else { -fac };
                entries.push((col, val));
            }
        }
        entries.sort_by_key(|e| e.0);
        entries.dedup_by(|later, first| {
            if later.0 == first.0 {
                first.1 += later.1;
                true
            } else {
                false
            }
        });
        entries
    };

    let rows: Vec<Vec<(u32, f64)>> = if basis.len() >= 4096 {
        (0..basis.len()).into_par_iter().map(build_row).collect()
    } else {
        (0..basis.len()).map(build_row).collect()
    };
    Ok(SubspaceProblem { n_sites: h.n_sites, basis: basis.to_vec(), h_eff: CsrMatrix::from_rows(rows) })
}

/// Lowest eigenpair of the projected problem.
pub fn solve_subspace(p: &SubspaceProblem) -> Result<SkqdResult> {
    let sol = eigen::lowest_eigenpair(&p.h_eff, &EigenOptions::default())?;
    Ok(SkqdResult {
        energy: sol.value,
        ground_vector: sol.vector,
        basis_size: p.basis.len(),
        gamma0_sq: None,
        residual: sol.residual,
        shots_discarded: 0,
    })
}

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotSpec {
    /// Multinomial sampling with this many shots per Krylov state.
    Count(u64),
    /// Enumerate the exact support of each Krylov state.
    Exhaustive,
}

/// How to obtain the reference ground state for the γ₀² diagnostic.
#[derive(Clone, Copy)]
pub enum OracleMode<'a> {
    /// Run the exact-diagonalization oracle when it fits under the caps.
    Auto(EdCaps),
    /// No diagnostic.
    Skip,
    /// Reuse a precomputed oracle result.
    Provided(&'a EdResult),
}

pub struct SkqdTask<'a> {
    pub params: &'a ModelParams,
    pub init: InitialStateSpec,
    pub evolution: EvolutionConfig,
    pub shots: ShotSpec,
    pub noise: Option<NoiseModel>,
    /// Post-select samples on this Hamming weight; the initial state must
    /// live in the same sector.
    pub filter_k: Option<usize>,
    pub seed: u64,
    /// Grid position for the seed schedule of sweeps.
    pub grid_index: u64,
    pub oracle: OracleMode<'a>,
    /// Optional reuse of sector hop pair lists across runs.
    pub hop_pairs: Option<Arc<SectorHopPairs>>,
}

impl<'a> SkqdTask<'a> {
    pub fn new(params: &'a ModelParams, init: InitialStateSpec) -> Self {
        SkqdTask {
            params,
            init,
            evolution: EvolutionConfig::standard(),
            shots: ShotSpec::Count(300_000),
            noise: None,
            filter_k: None,
            seed: 0,
            grid_index: 0,
            oracle: OracleMode::Auto(EdCaps::default()),
            hop_pairs: None,
        }
    }
}

const NOISE_SEED_SALT: u64 = 0x6e6f_6973_655f_7374;

/// Run the full pipeline, also returning the per-step sample tables (after
/// noise and filtering).
pub fn skqd_run_with_tables(task: &SkqdTask) -> Result<(SkqdResult, Vec<SampleTable>)> {
    task.params.validate()?;
    let n = task.params.geometry.n_sites;
    task.init.validate(n)?;
    if let Some(noise) = &task.noise {
        noise.validate()?;
    }
    let terms = build_terms(task.params);

    if let Some(k) = task.filter_k {
        let home = task.init.sector(n);
        if home != k {
            return Err(Error::InvalidSector(format!(
                "initial state lives in sector {home} but filter_k = {k}"
            )));
        }
    }

    // Representation: evolve inside the sector whenever the symmetry allows
    // it, which is what makes 30-site low-sector runs possible.
    let prepared = task.init.prepare(&task.params.geometry)?;
    let sector_mode = task.filter_k.is_some() && task.params.h_x == 0.0;
    let psi0: State = match (&prepared, sector_mode) {
        (State::Full(sv), true) => {
            State::Sector(sv.project_to_sector(task.filter_k.unwrap(), 1e-9)?)
        }
        (State::Sector(sv), false) => State::Full(sv.embed()?),
        _ => prepared,
    };

    let states = krylov_states_cached(&terms, &psi0, &task.evolution, task.hop_pairs.clone())?;

    let sector_tag = task.filter_k.map_or(0, |k| k as u64 + 1);
    let mut tables = Vec::with_capacity(states.len());
    for (step, state) in states.iter().enumerate() {
        let step_seed = task_seed(task.seed, step as u64, sector_tag, task.grid_index);
        let mut table = match task.shots {
            ShotSpec::Count(shots) => sample(state, shots, step_seed)?,
            ShotSpec::Exhaustive => sample_support(state)?,
        };
        table.meta.krylov_step = step as u32;
        if let Some(noise) = &task.noise {
            let noise_seed =
                task_seed(task.seed ^ NOISE_SEED_SALT, step as u64, sector_tag, task.grid_index);
            table = apply_readout_noise(&table, noise, noise_seed)?;
        }
        if let Some(k) = task.filter_k {
            table = filter_sector(&table, k);
        }
        tables.push(table);
    }
    let shots_discarded: u64 = tables.iter().map(|t| t.meta.shots_discarded).sum();

    let merged = merge_tables(&tables)?;
    if merged.masks.is_empty() {
        return Err(Error::EmptySubspace(
            "every sampled bitstring was discarded by the sector filter".into(),
        ));
    }
    let problem = project_hamiltonian(&terms, &merged.masks)?;
    let mut result = solve_subspace(&problem)?;
    result.shots_discarded = shots_discarded;
    result.gamma0_sq = gamma0_diagnostic(task, &terms, &psi0)?;
    Ok((result, tables))
}

pub fn skqd_run(task: &SkqdTask) -> Result<SkqdResult> {
    Ok(skqd_run_with_tables(task)?.0)
}

fn gamma0_diagnostic(task: &SkqdTask, terms: &TermList, psi0: &State) -> Result<Option<f64>> {
    let reference: Option<EdResult> = match task.oracle {
        OracleMode::Skip => None,
        OracleMode::Provided(ed) => return Ok(Some(overlap_sq(&ed.ground_state, psi0)?)),
        OracleMode::Auto(caps) => match psi0 {
            State::Sector(sv) => {
                let table = crate::bits::BinomTable::new(terms.n_sites);
                if table.c(terms.n_sites, sv.weight()) <= caps.max_sector_dim {
                    Some(ed_ground_sector(terms, sv.weight(), &caps)?)
                } else {
                    None
                }
            }
            State::Full(_) => {
                if terms.n_sites <= caps.max_full_sites {
                    Some(ed_ground(terms, &caps)?)
                } else {
                    None
                }
            }
        },
    };
    match reference {
        Some(ed) => Ok(Some(overlap_sq(&ed.ground_state, psi0)?)),
        None => Ok(None),
    }
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// Inputs for the sampling-cost and energy-error bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundParams {
    /// Krylov dimension d.
    pub d: usize,
    /// Retained basis components L.
    pub l: usize,
    /// Failure probability η.
    pub eta: f64,
    /// Initial-state overlap γ₀².
    pub gamma0_sq: f64,
    /// Pointwise probability floor β_L.
    pub beta_l: f64,
    /// Subspace perturbation ε̃.
    pub eps_tilde: f64,
    /// Coverage α_L.
    pub alpha_l: f64,
    /// Upper bound on ‖H‖.
    pub h_norm: f64,
}

/// ΔE₀ ≤ √8 ‖H‖ (1 − √α_L)^{1/2}.
pub fn energy_error_bound(alpha_l: f64, h_norm: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha_l) {
        return Err(Error::Domain(format!("alpha_L = {alpha_l} outside [0, 1]")));
    }
    if !(h_norm >= 0.0) {
        return Err(Error::Domain(format!("h_norm = {h_norm} must be nonnegative")));
    }
    Ok(8f64.sqrt() * h_norm * (1.0 - alpha_l.sqrt()).max(0.0).sqrt())
}

/// Shots per Krylov state needed to retain the top-L components:
/// M > d² ln(L/η) / (γ₀² (β_L − 2√ε̃)). Natural logarithm.
pub fn sample_count_bound(b: &BoundParams) -> Result<f64> {
    if b.d < 1 || b.l < 1 {
        return Err(Error::Domain("d and L must be at least 1".into()));
    }
    if !(b.eta > 0.0 && b.eta < 1.0) {
        return Err(Error::Domain(format!("eta = {} outside (0, 1)", b.eta)));
    }
    if !(b.gamma0_sq > 0.0 && b.gamma0_sq <= 1.0) {
        return Err(Error::Domain(format!("gamma0_sq = {} outside (0, 1]", b.gamma0_sq)));
    }
    if b.eps_tilde < 0.0 {
        return Err(Error::Domain(format!("eps_tilde = {} must be nonnegative", b.eps_tilde)));
    }
    if !(b.beta_l >= 0.0 && b.beta_l <= 1.0) {
        return Err(Error::Domain(format!("beta_L = {} outside [0, 1]", b.beta_l)));
    }
    let margin = b.beta_l - 2.0 * b.eps_tilde.sqrt();
    if margin <= 0.0 {
        return Err(Error::BoundUndefined(format!(
            "beta_L − 2√ε̃ = {margin} is not positive: sparsity too weak for the bound"
        )));
    }
    let d = b.d as f64;
    Ok(d * d * (b.l as f64 / b.eta).ln() / (b.gamma0_sq * margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::SymOp;
    use crate::lattice::Geometry;
    use crate::states::{LayoutKind, StateKind};

    fn chain_params(n: usize, j: f64, delta: f64, h_z: f64) -> ModelParams {
        ModelParams { j, delta, h_z, h_x: 0.0, geometry: Geometry::chain(n).unwrap() }
    }

    fn dense_of(p: &SubspaceProblem) -> Vec<Vec<f64>> {
        let dim = p.basis.len();
        let mut m = vec![vec![0.0; dim]; dim];
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            p.h_eff.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..dim {
                m[i][j] = col[i];
            }
        }
        m
    }

    #[test]
    fn projection_of_two_site_xxx() {
        let h = build_terms(&chain_params(2, 1.0, 1.0, 0.0));
        let p = project_hamiltonian(&h, &[0b01, 0b10]).unwrap();
        let m = dense_of(&p);
        assert_eq!(m[0][0], -1.0);
        assert_eq!(m[0][1], 2.0);
        assert_eq!(m[1][0], 2.0);
        assert_eq!(m[1][1], -1.0);
    }

    #[test]
    fn projection_single_diagonal_entry() {
        let h = build_terms(&chain_params(2, 1.0, 1.0, 0.0));
        let p = project_hamiltonian(&h, &[0b00]).unwrap();
        assert_eq!(dense_of(&p)[0][0], 1.0);
    }

    #[test]
    fn full_basis_projection_equals_dense_hamiltonian() {
        let h = build_terms(&chain_params(4, 1.0, 0.6, 0.3));
        let basis: Vec<u64> = (0..16).collect();
        let p = project_hamiltonian(&h, &basis).unwrap();
        let got = dense_of(&p);
        let want = h.dense_matrix_real().unwrap();
        for i in 0..16 {
            for j in 0..16 {
                assert!((got[i][j] - want[(i, j)]).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn duplicate_basis_rejected() {
        let h = build_terms(&chain_params(2, 1.0, 1.0, 0.0));
        assert!(matches!(
            project_hamiltonian(&h, &[0b01, 0b01]),
            Err(Error::InvalidBasis(_))
        ));
        assert!(project_hamiltonian(&h, &[]).is_err());
    }

    #[test]
    fn solve_small_problems() {
        let h = build_terms(&chain_params(2, 1.0, 1.0, 0.0));
        let p = project_hamiltonian(&h, &[0b00]).unwrap();
        let r = solve_subspace(&p).unwrap();
        assert_eq!(r.energy, 1.0);
        assert_eq!(r.ground_vector, vec![1.0]);

        let p = project_hamiltonian(&h, &[0b01, 0b10]).unwrap();
        let r = solve_subspace(&p).unwrap();
        assert!((r.energy + 3.0).abs() < 1e-12);
        let x = 1.0 / 2f64.sqrt();
        assert!((r.ground_vector[0].abs() - x).abs() < 1e-12);
        assert!((r.ground_vector[0] + r.ground_vector[1]).abs() < 1e-12);
    }

    #[test]
    fn full_basis_solve_matches_ed() {
        let h = build_terms(&chain_params(6, 1.0, 1.0, 0.0));
        let basis: Vec<u64> = (0..64).collect();
        let p = project_hamiltonian(&h, &basis).unwrap();
        let r = solve_subspace(&p).unwrap();
        let ed = crate::analysis::ed_ground(&h, &EdCaps::default()).unwrap();
        assert!((r.energy - ed.energy).abs() < 1e-10);
    }

    #[test]
    fn two_site_singlet_run_is_exact() {
        let params = chain_params(2, 1.0, 1.0, 0.0);
        let mut task = SkqdTask::new(&params, InitialStateSpec::singlet(LayoutKind::Identity));
        task.shots = ShotSpec::Count(64);
        task.seed = 5;
        let r = skqd_run(&task).unwrap();
        assert!((r.energy + 3.0).abs() < 1e-12);
        assert_eq!(r.basis_size, 2);
        assert!((r.gamma0_sq.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn w_state_exhaustive_run_recovers_sector_energy() {
        let params = chain_params(8, 1.0, 1.0, 0.0);
        let mut task = SkqdTask::new(
            &params,
            InitialStateSpec { kind: StateKind::WStateProduct { k: 4 }, layout: LayoutKind::Identity },
        );
        task.evolution = EvolutionConfig {
            dt: 0.3,
            krylov_dim: 5,
            method: crate::evolution::Method::Exact { tol: 1e-12 },
        };
        task.shots = ShotSpec::Exhaustive;
        task.filter_k = Some(4);
        let r = skqd_run(&task).unwrap();
        // frozen sector-4 ED value of the open 8-site XXX chain
        assert!((r.energy - (-13.499730394751559)).abs() < 1e-9, "got {}", r.energy);
        assert_eq!(r.basis_size, 70);
        assert!(r.gamma0_sq.unwrap() > 0.0);
    }

    #[test]
    fn subspace_monotone_under_basis_growth() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let h = build_terms(&chain_params(8, 1.0, 1.2, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut all: Vec<u64> = (0..256).collect();
        all.shuffle(&mut rng);
        let mut prev = f64::INFINITY;
        for take in [4usize, 16, 64, 256] {
            let mut basis: Vec<u64> = all[..take].to_vec();
            basis.sort_unstable();
            let r = solve_subspace(&project_hamiltonian(&h, &basis).unwrap()).unwrap();
            assert!(r.energy <= prev + 1e-10, "basis {take}: {} > {prev}", r.energy);
            prev = r.energy;
        }
    }

    #[test]
    fn skqd_energy_upper_bounds_sector_ed() {
        let params = chain_params(8, 1.0, 0.8, 0.7);
        let terms = build_terms(&params);
        for k in [2usize, 3, 4] {
            let mut task = SkqdTask::new(
                &params,
                InitialStateSpec { kind: StateKind::WStateProduct { k }, layout: LayoutKind::Identity },
            );
            task.shots = ShotSpec::Count(2000);
            task.filter_k = Some(k);
            task.seed = 11;
            task.oracle = OracleMode::Skip;
            let r = skqd_run(&task).unwrap();
            let ed = ed_ground_sector(&terms, k, &EdCaps::default()).unwrap();
            assert!(r.energy >= ed.energy - 1e-9, "k={k}: {} < {}", r.energy, ed.energy);
        }
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let params = chain_params(6, 1.0, 1.0, 0.4);
        let mk = || {
            let mut task = SkqdTask::new(
                &params,
                InitialStateSpec { kind: StateKind::WStateProduct { k: 3 }, layout: LayoutKind::Identity },
            );
            task.shots = ShotSpec::Count(5000);
            task.filter_k = Some(3);
            task.seed = 99;
            skqd_run(&task).unwrap()
        };
        let a = mk();
        let b = mk();
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert_eq!(a.basis_size, b.basis_size);
        let va: Vec<u64> = a.ground_vector.iter().map(|v| v.to_bits()).collect();
        let vb: Vec<u64> = b.ground_vector.iter().map(|v| v.to_bits()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn filter_requires_matching_sector() {
        let params = chain_params(4, 1.0, 1.0, 0.0);
        let mut task = SkqdTask::new(
            &params,
            InitialStateSpec { kind: StateKind::WStateProduct { k: 1 }, layout: LayoutKind::Identity },
        );
        task.filter_k = Some(2);
        assert!(matches!(skqd_run(&task), Err(Error::InvalidSector(_))));
    }

    #[test]
    fn energy_error_bound_values() {
        assert_eq!(energy_error_bound(1.0, 5.0).unwrap(), 0.0);
        let e = energy_error_bound(0.0, 3.0).unwrap();
        assert!((e - 8f64.sqrt() * 3.0).abs() < 1e-12);
        // two evaluation routes for the same expression
        let direct = energy_error_bound(0.99, 3.25).unwrap();
        let via_logs = (0.5 * 8f64.ln() + 3.25f64.ln()
            + 0.5 * (1.0 - (0.5 * 0.99f64.ln()).exp()).ln())
        .exp();
        assert!((direct - via_logs).abs() < 1e-12, "{direct} vs {via_logs}");
        assert!((direct - 0.650_816_3).abs() < 1e-6, "got {direct}");
        assert!(energy_error_bound(1.5, 1.0).is_err());
        assert!(energy_error_bound(0.5, -1.0).is_err());
    }

    #[test]
    fn sample_count_bound_values() {
        let base = BoundParams {
            d: 5,
            l: 10,
            eta: 0.01,
            gamma0_sq: 0.5,
            beta_l: 0.1,
            eps_tilde: 0.0,
            alpha_l: 1.0,
            h_norm: 0.0,
        };
        let m = sample_count_bound(&base).unwrap();
        assert!((m - 3453.9).abs() < 0.1, "got {m}");
        // halving the overlap doubles the cost exactly
        let half = BoundParams { gamma0_sq: 0.25, ..base };
        let m2 = sample_count_bound(&half).unwrap();
        assert!((m2 - 2.0 * m).abs() < 1e-9);
        // too-weak sparsity is an error
        let weak = BoundParams { eps_tilde: 0.01, ..base };
        assert!(matches!(sample_count_bound(&weak), Err(Error::BoundUndefined(_))));
        let bad = BoundParams { eta: 1.5, ..base };
        assert!(sample_count_bound(&bad).is_err());
    }
}
