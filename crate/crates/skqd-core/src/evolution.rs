//! Krylov state generation |ψ_k⟩ = e^{−ikHΔt}|ψ₀⟩ by exact matrix-exponential
//! action or second-order Trotterization, in the full space or a fixed
//! Hamming-weight sector.
//!
//! Trotter layers are mutually commuting term groups: hop (XX+YY) bonds split
//! into disjoint sets by greedy edge coloring (odd/even bonds on a chain),
//! one diagonal layer with every Z and ZZ term, and one transverse-field
//! layer when h_x ≠ 0. Each layer exponential is applied exactly through its
//! two-level kernels, so a Trotter step conserves Hamming weight to machine
//! precision whenever the transverse field vanishes.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::hamiltonian::{SectorTerms, TermList};
use crate::sparse::CsrMatrix;
use crate::state::{SectorBasis, SectorVector, State, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Time step Δt between consecutive Krylov states.
    pub dt: f64,
    /// Number of Krylov states d (k = 0..d−1).
    pub krylov_dim: usize,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Method {
    Exact { tol: f64 },
    Trotter2 { reps: usize },
}

impl EvolutionConfig {
    /// dt = 0.3, five Krylov states, second-order Trotter with three
    /// repetitions per step.
    pub fn standard() -> Self {
        EvolutionConfig { dt: 0.3, krylov_dim: 5, method: Method::Trotter2 { reps: 3 } }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.krylov_dim < 1 {
            return Err(Error::Domain("krylov_dim must be at least 1".into()));
        }
        match self.method {
            Method::Exact { tol } => {
                if !(tol > 0.0 && tol <= 1e-6) {
                    return Err(Error::Domain(format!(
                        "exact-evolution tolerance must lie in (0, 1e-6], got {tol}"
                    )));
                }
            }
            Method::Trotter2 { reps } => {
                if reps < 1 {
                    return Err(Error::Domain("Trotter reps must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self::standard()
    }
}

/// Default tolerance for exact evolution.
pub const EXACT_TOL_DEFAULT: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Trotter plan
// ---------------------------------------------------------------------------

/// Greedy edge coloring: hop indices grouped so no two hops in a group share
/// a site. Deterministic in hop order.
fn color_hops(terms: &SectorTerms) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_sites: Vec<Vec<usize>> = Vec::new();
    for (idx, hop) in terms.hops.iter().enumerate() {
        let slot = group_sites
            .iter()
            .position(|sites| !sites.contains(&hop.i) && !sites.contains(&hop.j));
        match slot {
            Some(g) => {
                groups[g].push(idx);
                group_sites[g].extend([hop.i, hop.j]);
            }
            None => {
                groups.push(vec![idx]);
                group_sites.push(vec![hop.i, hop.j]);
            }
        }
    }
    groups
}

/// Pair lists for sector-resident hop rotations: for every hop, the basis
/// index pairs (a, b) with site i unoccupied/occupied respectively. Depends
/// only on the bond set and the sector, so sweeps share it across field
/// values.
#[derive(Debug)]
pub struct SectorHopPairs {
    pub per_hop: Vec<Vec<(u32, u32)>>,
}

impl SectorHopPairs {
    pub fn build(terms: &SectorTerms, basis: &SectorBasis) -> Self {
        let n = terms.n_sites;
        let per_hop = terms
            .hops
            .iter()
            .map(|hop| {
                let bi = bits::site_bit(n, hop.i);
                let bj = bits::site_bit(n, hop.j);
                let mut pairs = Vec::new();
                for (a, &mask) in basis.masks.iter().enumerate() {
                    if mask & bi == 0 && mask & bj != 0 {
                        let b = basis.rank(mask ^ bi ^ bj);
                        pairs.push((a as u32, b as u32));
                    }
                }
                pairs
            })
            .collect();
        SectorHopPairs { per_hop }
    }
}

enum TrotterLayer {
    /// Disjoint hops; `hops` holds indices into `SectorTerms::hops`.
    Hops { hops: Vec<usize> },
    /// Single-site X rotations (full space only).
    XField,
    /// All Z and ZZ terms.
    Diagonal,
}

/// Reusable Trotter machinery for one (Hamiltonian, representation) pair.
pub struct TrotterPlan {
    terms: SectorTerms,
    layers: Vec<TrotterLayer>,
    /// Sector representation: basis, hop pair lists, diagonal values.
    sector: Option<(Arc<SectorBasis>, Arc<SectorHopPairs>, Vec<f64>)>,
}

impl TrotterPlan {
    pub fn new_full(h: &TermList) -> Result<Self> {
        let terms = SectorTerms::from_terms(h)?;
        let layers = Self::layers_of(&terms);
        Ok(TrotterPlan { terms, layers, sector: None })
    }

    pub fn new_sector(
        h: &TermList,
        basis: Arc<SectorBasis>,
        pairs: Option<Arc<SectorHopPairs>>,
    ) -> Result<Self> {
        let terms = SectorTerms::from_terms(h)?;
        terms.require_weight_preserving()?;
        let layers = Self::layers_of(&terms);
        let pairs = match pairs {
            Some(p) => p,
            None => Arc::new(SectorHopPairs::build(&terms, &basis)),
        };
        let diag: Vec<f64> = basis.masks.iter().map(|&m| terms.diagonal(m)).collect();
        Ok(TrotterPlan { terms, layers, sector: Some((basis, pairs, diag)) })
    }

    fn layers_of(terms: &SectorTerms) -> Vec<TrotterLayer> {
        let mut layers: Vec<TrotterLayer> = color_hops(terms)
            .into_iter()
            .map(|hops| TrotterLayer::Hops { hops })
            .collect();
        if !terms.x.is_empty() {
            layers.push(TrotterLayer::XField);
        }
        // innermost layer: applied once per rep at the full substep
        layers.push(TrotterLayer::Diagonal);
        layers
    }

    /// One second-order step of total time `dt` with `reps` repetitions.
    pub fn step(&self, state: &mut State, dt: f64, reps: usize) -> Result<()> {
        let tau = dt / reps as f64;
        for _ in 0..reps {
            let m = self.layers.len();
            for layer in &self.layers[..m - 1] {
                self.apply_layer(layer, state, tau / 2.0)?;
            }
            self.apply_layer(&self.layers[m - 1], state, tau)?;
            for layer in self.layers[..m - 1].iter().rev() {
                self.apply_layer(layer, state, tau / 2.0)?;
            }
        }
        Ok(())
    }

    fn apply_layer(&self, layer: &TrotterLayer, state: &mut State, t: f64) -> Result<()> {
        match (state, &self.sector) {
            (State::Full(sv), _) => self.apply_layer_full(layer, sv, t),
            (State::Sector(sv), Some(_)) => self.apply_layer_sector(layer, sv, t),
            (State::Sector(_), None) => Err(Error::DimensionMismatch(
                "plan was built for the full space but got a sector state".into(),
            )),
        }
    }

    fn apply_layer_full(&self, layer: &TrotterLayer, sv: &mut StateVector, t: f64) -> Result<()> {
        let n = sv.n_sites;
        match layer {
            TrotterLayer::Diagonal => {
                for (idx, a) in sv.amps.iter_mut().enumerate() {
                    let d = self.terms.diagonal(idx as u64);
                    *a *= Complex64::from_polar(1.0, -t * d);
                }
            }
            TrotterLayer::Hops { hops } => {
                for &h in hops {
                    let hop = self.terms.hops[h];
                    let (bi, bj) = (bits::site_bit(n, hop.i), bits::site_bit(n, hop.j));
                    let (c, s) = ((hop.amp * t).cos(), (hop.amp * t).sin());
                    let mix = Complex64::new(0.0, -s);
                    for idx in 0..sv.amps.len() {
                        let m = idx as u64;
                        if m & bi == 0 && m & bj != 0 {
                            let p = (m ^ bi ^ bj) as usize;
                            let (a0, a1) = (sv.amps[idx], sv.amps[p]);
                            sv.amps[idx] = a0 * c + a1 * mix;
                            sv.amps[p] = a0 * mix + a1 * c;
                        }
                    }
                }
            }
            TrotterLayer::XField => {
                for &(site, coeff) in &self.terms.x {
                    let bit = bits::site_bit(n, site);
                    let (c, s) = ((coeff * t).cos(), (coeff * t).sin());
                    let mix = Complex64::new(0.0, -s);
                    for idx in 0..sv.amps.len() {
                        if (idx as u64) & bit == 0 {
                            let p = (idx as u64 | bit) as usize;
                            let (a0, a1) = (sv.amps[idx], sv.amps[p]);
                            sv.amps[idx] = a0 * c + a1 * mix;
                            sv.amps[p] = a0 * mix + a1 * c;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_layer_sector(&self, layer: &TrotterLayer, sv: &mut SectorVector, t: f64) -> Result<()> {
        let (_, pairs, diag) = self.sector.as_ref().unwrap();
        match layer {
            TrotterLayer::Diagonal => {
                for (a, d) in sv.amps.iter_mut().zip(diag) {
                    *a *= Complex64::from_polar(1.0, -t * d);
                }
            }
            TrotterLayer::Hops { hops } => {
                for &h in hops {
                    let hop = self.terms.hops[h];
                    let (c, s) = ((hop.amp * t).cos(), (hop.amp * t).sin());
                    let mix = Complex64::new(0.0, -s);
                    for &(ia, ib) in &pairs.per_hop[h] {
                        let (a0, a1) = (sv.amps[ia as usize], sv.amps[ib as usize]);
                        sv.amps[ia as usize] = a0 * c + a1 * mix;
                        sv.amps[ib as usize] = a0 * mix + a1 * c;
                    }
                }
            }
            TrotterLayer::XField => {
                return Err(Error::SymmetryViolation(
                    "transverse field cannot act inside a fixed sector".into(),
                ))
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Exact evolution: Lanczos action of the matrix exponential
// ---------------------------------------------------------------------------

/// e^{−iHt}|s⟩ through a restart-free Lanczos approximation of the
/// exponential action, touching H only via matrix-vector products. Output is
/// renormalized; drift beyond 10·tol is reported as non-convergence.
pub fn evolve_exact(h: &TermList, s: &State, t: f64, tol: f64) -> Result<State> {
    let mut out = s.clone();
    let matvec = build_matvec(h, s)?;
    evolve_exact_matvec(&matvec, &mut out, t, tol, 10 * h.n_sites)?;
    Ok(out)
}

pub(crate) enum Matvec {
    Full { compiled: Vec<crate::hamiltonian::CompiledTerm> },
    Sector { csr: CsrMatrix },
}

impl Matvec {
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        match self {
            Matvec::Full { compiled } => {
                for (idx, out) in y.iter_mut().enumerate() {
                    let idx = idx as u64;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for t in compiled {
                        let src = idx ^ t.flip;
                        acc += t.element_from(src) * x[src as usize];
                    }
                    *out = acc;
                }
            }
            Matvec::Sector { csr } => csr.apply_complex(x, y),
        }
    }
}

pub(crate) fn build_matvec(h: &TermList, s: &State) -> Result<Matvec> {
    match s {
        State::Full(sv) => {
            if sv.n_sites != h.n_sites {
                return Err(Error::DimensionMismatch(format!(
                    "Hamiltonian on {} sites, state on {}",
                    h.n_sites, sv.n_sites
                )));
            }
            Ok(Matvec::Full { compiled: h.compile()? })
        }
        State::Sector(sv) => {
            if sv.n_sites() != h.n_sites {
                return Err(Error::DimensionMismatch(format!(
                    "Hamiltonian on {} sites, state on {}",
                    h.n_sites,
                    sv.n_sites()
                )));
            }
            let structured = SectorTerms::from_terms(h)?;
            structured.require_weight_preserving()?;
            Ok(Matvec::Sector { csr: CsrMatrix::sector_hamiltonian(&structured, &sv.basis) })
        }
    }
}

fn amps_mut(state: &mut State) -> &mut Vec<Complex64> {
    match state {
        State::Full(sv) => &mut sv.amps,
        State::Sector(sv) => &mut sv.amps,
    }
}

fn evolve_exact_matvec(
    matvec: &Matvec,
    state: &mut State,
    t: f64,
    tol: f64,
    max_iter: usize,
) -> Result<()> {
    if t == 0.0 {
        return Ok(());
    }
    let amps = amps_mut(state);
    let dim = amps.len();

    let mut q_basis: Vec<Vec<Complex64>> = vec![amps.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut y: Vec<Complex64> = Vec::new();

    let max_iter = max_iter.clamp(4, dim.max(4));
    let mut converged = false;
    let mut y_prev: Vec<Complex64> = Vec::new();
    for j in 0..max_iter {
        matvec.apply(&q_basis[j], &mut w);
        let alpha = cdot(&q_basis[j], &w).re;
        alphas.push(alpha);
        caxpy(&mut w, Complex64::new(-alpha, 0.0), &q_basis[j]);
        if j > 0 {
            caxpy(&mut w, Complex64::new(-betas[j - 1], 0.0), &q_basis[j - 1]);
        }
        for q in &q_basis {
            let c = cdot(q, &w);
            caxpy(&mut w, -c, q);
        }
        let beta = cnorm(&w);

        // Convergence needs both the coupling out of the current subspace
        // and the change of the assembled coefficients to be negligible;
        // the β·|y_m| bound alone lags the true error.
        y = expm_tridiag_e1(&alphas, &betas, t);
        let coupling = beta * y[y.len() - 1].norm();
        let drift: f64 = y
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let prev = y_prev.get(i).copied().unwrap_or(Complex64::new(0.0, 0.0));
                (v - prev).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        let settled = coupling <= 0.05 * tol && (j == 0 || drift <= 0.05 * tol);
        if settled || beta < 1e-14 || j + 1 == dim {
            converged = true;
            break;
        }
        y_prev = y.clone();
        betas.push(beta);
        let mut q_next = std::mem::replace(&mut w, vec![Complex64::new(0.0, 0.0); dim]);
        let inv = 1.0 / beta;
        for a in &mut q_next {
            *a *= inv;
        }
        q_basis.push(q_next);
    }
    if !converged {
        let estimate = betas.last().copied().unwrap_or(0.0) * y.last().map_or(0.0, |v| v.norm());
        return Err(Error::Convergence { residual: estimate, iterations: max_iter });
    }

    for a in amps.iter_mut() {
        *a = Complex64::new(0.0, 0.0);
    }
    for (coef, q) in y.iter().zip(&q_basis) {
        caxpy(amps, *coef, q);
    }
    let norm = cnorm(amps);
    if (norm - 1.0).abs() >= 10.0 * tol {
        return Err(Error::Convergence { residual: (norm - 1.0).abs(), iterations: alphas.len() });
    }
    let inv = 1.0 / norm;
    for a in amps.iter_mut() {
        *a *= inv;
    }
    Ok(())
}

/// exp(−i t T) e₁ for the real symmetric tridiagonal T given by
/// (alphas, betas).
fn expm_tridiag_e1(alphas: &[f64], betas: &[f64], t: f64) -> Vec<Complex64> {
    let m = alphas.len();
    if m == 1 {
        return vec![Complex64::from_polar(1.0, -t * alphas[0])];
    }
    let mut tri = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        tri[(i, i)] = alphas[i];
        if i > 0 {
            tri[(i, i - 1)] = betas[i - 1];
            tri[(i - 1, i)] = betas[i - 1];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(tri);
    // y = V exp(−itΛ) Vᵀ e₁
    let mut y = vec![Complex64::new(0.0, 0.0); m];
    for col in 0..m {
        let phase = Complex64::from_polar(1.0, -t * eig.eigenvalues[col]);
        let v0 = eig.eigenvectors[(0, col)];
        for row in 0..m {
            y[row] += phase * (v0 * eig.eigenvectors[(row, col)]);
        }
    }
    y
}

#[inline]
fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
fn caxpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Public stepping API
// ---------------------------------------------------------------------------

/// Second-order Trotter step of total time `dt` split into `reps`
/// repetitions.
pub fn trotter_step(h: &TermList, s: &State, dt: f64, reps: usize) -> Result<State> {
    let plan = match s {
        State::Full(_) => TrotterPlan::new_full(h)?,
        State::Sector(sv) => TrotterPlan::new_sector(h, sv.basis.clone(), None)?,
    };
    let mut out = s.clone();
    plan.step(&mut out, dt, reps)?;
    Ok(out)
}

/// The Krylov sequence [ψ₀, ψ₁, …, ψ_{d−1}], ψ_{k+1} obtained by evolving
/// ψ_k one further Δt. ψ₀ is returned unmodified.
pub fn krylov_states(h: &TermList, psi0: &State, cfg: &EvolutionConfig) -> Result<Vec<State>> {
    krylov_states_cached(h, psi0, cfg, None)
}

/// As [`krylov_states`], reusing prebuilt sector hop pairs when available.
pub fn krylov_states_cached(
    h: &TermList,
    psi0: &State,
    cfg: &EvolutionConfig,
    pairs: Option<Arc<SectorHopPairs>>,
) -> Result<Vec<State>> {
    cfg.validate()?;
    let mut states = Vec::with_capacity(cfg.krylov_dim);
    states.push(psi0.clone());
    if cfg.krylov_dim == 1 {
        return Ok(states);
    }
    match cfg.method {
        Method::Trotter2 { reps } => {
            let plan = match psi0 {
                State::Full(_) => TrotterPlan::new_full(h)?,
                State::Sector(sv) => TrotterPlan::new_sector(h, sv.basis.clone(), pairs)?,
            };
            for _ in 1..cfg.krylov_dim {
                let mut next = states.last().unwrap().clone();
                plan.step(&mut next, cfg.dt, reps)?;
                states.push(next);
            }
        }
        Method::Exact { tol } => {
            let matvec = build_matvec(h, psi0)?;
            for _ in 1..cfg.krylov_dim {
                let mut next = states.last().unwrap().clone();
                evolve_exact_matvec(&matvec, &mut next, cfg.dt, tol, 10 * h.n_sites)?;
                states.push(next);
            }
        }
    }
    Ok(states)
}
