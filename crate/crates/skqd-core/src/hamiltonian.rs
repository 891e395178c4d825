//! The XXZ + field Hamiltonian as a weighted Pauli-term list.
//!
//! H = J Σ_⟨i,j⟩ (X_i X_j + Y_i Y_j + Δ Z_i Z_j) − h_z Σ_i Z_i − h_x Σ_i X_i
//!
//! The spin operators are the bare Pauli matrices (no factor ½), so the
//! two-site XXX singlet energy is −3 and the magnetization of a weight-k
//! bitstring is n − 2k. Z|0⟩ = |0⟩, Z|1⟩ = −|1⟩, and Y = [[0, −i], [i, 0]].

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::lattice::Geometry;
use crate::state::{SectorVector, State, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// One weighted Pauli string. `paulis` is sorted by site and touches each
/// site at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub paulis: Vec<(usize, Axis)>,
}

impl PauliTerm {
    pub fn new(coeff: f64, mut paulis: Vec<(usize, Axis)>) -> Self {
        paulis.sort_by_key(|&(site, _)| site);
        PauliTerm { coeff, paulis }
    }
}

/// Model parameters of the XXZ Hamiltonian with longitudinal and transverse
/// fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j: f64,
    pub delta: f64,
    pub h_z: f64,
    pub h_x: f64,
    pub geometry: Geometry,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("J", self.j),
            ("delta", self.delta),
            ("h_z", self.h_z),
            ("h_x", self.h_x),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// The Hamiltonian as a list of weighted Pauli strings; the single source of
/// truth for H everywhere in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct TermList {
    pub n_sites: usize,
    pub terms: Vec<PauliTerm>,
}

/// Expand model parameters into Pauli terms. Per edge: J·XX, J·YY, JΔ·ZZ;
/// per site: −h_z·Z and −h_x·X. Terms whose coefficient is exactly zero are
/// omitted.
pub fn build_terms(p: &ModelParams) -> TermList {
    let n = p.geometry.n_sites;
    let mut terms = Vec::new();
    for &(i, j) in &p.geometry.edges {
        if p.j != 0.0 {
            terms.push(PauliTerm::new(p.j, vec![(i, Axis::X), (j, Axis::X)]));
            terms.push(PauliTerm::new(p.j, vec![(i, Axis::Y), (j, Axis::Y)]));
        }
        if p.j * p.delta != 0.0 {
            terms.push(PauliTerm::new(p.j * p.delta, vec![(i, Axis::Z), (j, Axis::Z)]));
        }
    }
    for site in 0..n {
        if p.h_z != 0.0 {
            terms.push(PauliTerm::new(-p.h_z, vec![(site, Axis::Z)]));
        }
        if p.h_x != 0.0 {
            terms.push(PauliTerm::new(-p.h_x, vec![(site, Axis::X)]));
        }
    }
    TermList { n_sites: n, terms }
}

/// A Pauli string compiled to bit masks. Acting on |b⟩ gives
/// `factor · (−1)^popcount(b & sign_mask) · |b ^ flip⟩` where
/// `factor = coeff · i^(#Y)`.
#[derive(Debug, Clone, Copy)]
pub struct CompiledTerm {
    pub flip: u64,
    pub sign_mask: u64,
    pub factor: Complex64,
}

impl CompiledTerm {
    fn from_term(term: &PauliTerm, n: usize) -> Result<Self> {
        let mut flip = 0u64;
        let mut sign_mask = 0u64;
        let mut y_count = 0u32;
        let mut seen = 0u64;
        for &(site, axis) in &term.paulis {
            if site >= n {
                return Err(Error::InvalidSize(format!("site {site} out of range for n = {n}")));
            }
            let bit = bits::site_bit(n, site);
            if seen & bit != 0 {
                return Err(Error::InvalidBasis(format!("site {site} repeated in Pauli string")));
            }
            seen |= bit;
            match axis {
                Axis::X => flip |= bit,
                Axis::Y => {
                    flip |= bit;
                    sign_mask |= bit;
                    y_count += 1;
                }
                Axis::Z => sign_mask |= bit,
            }
        }
        let unit = match y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Ok(CompiledTerm { flip, sign_mask, factor: unit * term.coeff })
    }

    /// Matrix element ⟨b ^ flip | term | b⟩.
    #[inline(always)]
    pub fn element_from(&self, source_mask: u64) -> Complex64 {
        if (source_mask & self.sign_mask).count_ones() % 2 == 0 {
            self.factor
        } else {
            -self.factor
        }
    }
}

impl TermList {
    pub fn compile(&self) -> Result<Vec<CompiledTerm>> {
        self.terms
            .iter()
            .map(|t| CompiledTerm::from_term(t, self.n_sites))
            .collect()
    }

    /// Σ|coefficients|: a certified upper bound on the spectral norm ‖H‖.
    pub fn coeff_norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Unnormalized H|s⟩ by term-by-term Pauli action.
    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        if s.n_sites != self.n_sites {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian on {} sites, state on {}",
                self.n_sites, s.n_sites
            )));
        }
        let compiled = self.compile()?;
        let mut out = StateVector::zero(self.n_sites)?;
        for (idx, o) in out.amps.iter_mut().enumerate() {
            let idx = idx as u64;
            let mut acc = Complex64::new(0.0, 0.0);
            for t in &compiled {
                let src = idx ^ t.flip;
                acc += t.element_from(src) * s.amps[src as usize];
            }
            *o = acc;
        }
        Ok(out)
    }

    /// Unnormalized H|s⟩ restricted to a fixed-weight sector. Requires every
    /// term to preserve Hamming weight (matched XX+YY pairs, Z and ZZ terms).
    pub fn apply_sector(&self, s: &SectorVector) -> Result<SectorVector> {
        if s.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian on {} sites, state on {}",
                self.n_sites,
                s.n_sites()
            )));
        }
        let structured = SectorTerms::from_terms(self)?;
        structured.require_weight_preserving()?;
        let n = self.n_sites;
        let basis = &s.basis;
        let mut out = SectorVector::zero(basis.clone());
        for (a, o) in out.amps.iter_mut().enumerate() {
            let mask = basis.mask(a);
            let mut acc = s.amps[a] * structured.diagonal(mask);
            for hop in &structured.hops {
                let bi = bits::site_bit(n, hop.i);
                let bj = bits::site_bit(n, hop.j);
                let occ = (mask & bi != 0, mask & bj != 0);
                if occ.0 != occ.1 {
                    let partner = basis.rank(mask ^ bi ^ bj);
                    acc += hop.amp * s.amps[partner];
                }
            }
            *o = acc;
        }
        Ok(out)
    }

    /// Dense matrix via Kronecker products of 2×2 Pauli matrices; the brute
    /// oracle for the bit-twiddling application paths. Capped at 12 sites.
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n_sites > 12 {
            return Err(Error::ResourceCap(format!(
                "dense matrix limited to 12 sites, got {}",
                self.n_sites
            )));
        }
        let dim = 1usize << self.n_sites;
        let mut h = DMatrix::<Complex64>::zeros(dim, dim);
        for term in &self.terms {
            let axis_of: BTreeMap<usize, Axis> = term.paulis.iter().cloned().collect();
            let mut m = DMatrix::<Complex64>::identity(1, 1);
            for site in 0..self.n_sites {
                let factor = match axis_of.get(&site) {
                    None => DMatrix::identity(2, 2),
                    Some(a) => pauli_2x2(*a),
                };
                m = m.kronecker(&factor);
            }
            h += m * Complex64::new(term.coeff, 0.0);
        }
        Ok(h)
    }

    /// Dense matrix as a real symmetric matrix; errors if any element has an
    /// imaginary part (odd number of Y factors in some term).
    pub fn dense_matrix_real(&self) -> Result<DMatrix<f64>> {
        let h = self.dense_matrix()?;
        let mut out = DMatrix::<f64>::zeros(h.nrows(), h.ncols());
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                let v = h[(i, j)];
                if v.im.abs() > 1e-14 {
                    return Err(Error::Domain(
                        "Hamiltonian is not real in the computational basis".into(),
                    ));
                }
                out[(i, j)] = v.re;
            }
        }
        Ok(out)
    }

    /// Serialize terms as `[{"coeff": c, "paulis": {"0": "X", ...}}, ...]`.
    pub fn to_json(&self) -> Result<String> {
        let wire: Vec<TermWire> = self
            .terms
            .iter()
            .map(|t| TermWire {
                coeff: t.coeff,
                paulis: t
                    .paulis
                    .iter()
                    .map(|&(site, axis)| (site.to_string(), axis))
                    .collect(),
            })
            .collect();
        Ok(serde_json::to_string(&wire)?)
    }

    pub fn from_json(json: &str, n_sites: usize) -> Result<Self> {
        let wire: Vec<TermWire> = serde_json::from_str(json)?;
        let mut terms = Vec::with_capacity(wire.len());
        for w in wire {
            let mut paulis = Vec::with_capacity(w.paulis.len());
            for (site, axis) in w.paulis {
                let site: usize = site
                    .parse()
                    .map_err(|_| Error::Config(format!("bad site key '{site}'")))?;
                if site >= n_sites {
                    return Err(Error::InvalidSize(format!(
                        "site {site} out of range for n = {n_sites}"
                    )));
                }
                paulis.push((site, axis));
            }
            terms.push(PauliTerm::new(w.coeff, paulis));
        }
        Ok(TermList { n_sites, terms })
    }
}

#[derive(Serialize, Deserialize)]
struct TermWire {
    coeff: f64,
    paulis: BTreeMap<String, Axis>,
}

fn pauli_2x2(axis: Axis) -> DMatrix<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

/// XX+YY hop with matrix element `amp` between |…0_i…1_j…⟩ and |…1_i…0_j…⟩.
#[derive(Debug, Clone, Copy)]
pub struct HopTerm {
    pub i: usize,
    pub j: usize,
    pub amp: f64,
}

/// A term list decomposed into structure the sector and Trotter kernels can
/// exploit: hops (fused XX+YY pairs), diagonal ZZ and Z terms, and single-site
/// X terms.
#[derive(Debug, Clone)]
pub struct SectorTerms {
    pub n_sites: usize,
    pub hops: Vec<HopTerm>,
    pub zz: Vec<(usize, usize, f64)>,
    pub z: Vec<(usize, f64)>,
    pub x: Vec<(usize, f64)>,
}

impl SectorTerms {
    /// Decompose a term list. XX and YY terms must come in same-coefficient
    /// pairs on the same bond; anything else that changes Hamming weight in
    /// an unpaired way is rejected.
    pub fn from_terms(list: &TermList) -> Result<Self> {
        let mut hops: BTreeMap<(usize, usize), (Option<f64>, Option<f64>)> = BTreeMap::new();
        let mut zz = Vec::new();
        let mut z = Vec::new();
        let mut x = Vec::new();
        for term in &list.terms {
            match term.paulis.as_slice() {
                [(i, Axis::Z)] => z.push((*i, term.coeff)),
                [(i, Axis::X)] => x.push((*i, term.coeff)),
                [(i, Axis::Z), (j, Axis::Z)] => zz.push((*i, *j, term.coeff)),
                [(i, Axis::X), (j, Axis::X)] => {
                    hops.entry((*i, *j)).or_default().0 = Some(term.coeff);
                }
                [(i, Axis::Y), (j, Axis::Y)] => {
                    hops.entry((*i, *j)).or_default().1 = Some(term.coeff);
                }
                other => {
                    return Err(Error::SymmetryViolation(format!(
                        "unsupported Pauli string {other:?} for structured application"
                    )));
                }
            }
        }
        let mut hop_terms = Vec::with_capacity(hops.len());
        for ((i, j), pair) in hops {
            match pair {
                (Some(cx), Some(cy)) if cx == cy => {
                    hop_terms.push(HopTerm { i, j, amp: 2.0 * cx })
                }
                _ => {
                    return Err(Error::SymmetryViolation(format!(
                        "bond ({i},{j}) has unmatched XX/YY coefficients {pair:?}"
                    )));
                }
            }
        }
        Ok(SectorTerms { n_sites: list.n_sites, hops: hop_terms, zz, z, x })
    }

    /// Error if any term changes Hamming weight (i.e. a transverse field is
    /// present).
    pub fn require_weight_preserving(&self) -> Result<()> {
        if self.x.is_empty() {
            Ok(())
        } else {
            Err(Error::SymmetryViolation(
                "transverse-field X terms do not preserve Hamming weight".into(),
            ))
        }
    }

    /// Diagonal matrix element ⟨mask|H_diag|mask⟩ from ZZ and Z terms.
    #[inline]
    pub fn diagonal(&self, mask: u64) -> f64 {
        let n = self.n_sites;
        let mut d = 0.0;
        for &(i, j, c) in &self.zz {
            d += c * bits::z_value(mask, n, i) * bits::z_value(mask, n, j);
        }
        for &(i, c) in &self.z {
            d += c * bits::z_value(mask, n, i);
        }
        d
    }
}

/// ⟨s| Σ_j Z_j |s⟩. Exactly n − 2k for a sector-resident state.
pub fn magnetization_expect(state: &State) -> f64 {
    match state {
        State::Sector(s) => (s.n_sites() as f64) - 2.0 * (s.weight() as f64),
        State::Full(s) => {
            let n = s.n_sites as f64;
            s.amps
                .iter()
                .enumerate()
                .map(|(idx, a)| a.norm_sqr() * (n - 2.0 * (idx as u64).count_ones() as f64))
                .sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::SectorBasis;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn chain_params(n: usize, j: f64, delta: f64, h_z: f64, h_x: f64) -> ModelParams {
        ModelParams { j, delta, h_z, h_x, geometry: Geometry::chain(n).unwrap() }
    }

    pub(crate) fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = StateVector::zero(n).unwrap();
        for a in &mut s.amps {
            *a = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
        s.normalize();
        s
    }

    #[test]
    fn build_terms_two_site_xxx() {
        let h = build_terms(&chain_params(2, 1.0, 1.0, 0.0, 0.0));
        assert_eq!(h.terms.len(), 3);
        let coeffs: Vec<f64> = h.terms.iter().map(|t| t.coeff).collect();
        assert_eq!(coeffs, vec![1.0, 1.0, 1.0]);
        assert_eq!(h.coeff_norm_bound(), 3.0);
    }

    #[test]
    fn build_terms_with_fields_and_anisotropy() {
        let h = build_terms(&chain_params(2, 1.0, 0.25, 0.5, 0.0));
        // XX, YY, 0.25 ZZ, -0.5 Z0, -0.5 Z1
        assert_eq!(h.terms.len(), 5);
        assert!((h.coeff_norm_bound() - 3.25).abs() < 1e-15);
        let zz = h
            .terms
            .iter()
            .find(|t| t.paulis == vec![(0, Axis::Z), (1, Axis::Z)])
            .unwrap();
        assert_eq!(zz.coeff, 0.25);
        let z0 = h.terms.iter().find(|t| t.paulis == vec![(0, Axis::Z)]).unwrap();
        assert_eq!(z0.coeff, -0.5);
    }

    #[test]
    fn build_terms_rectangle_count() {
        let p = ModelParams {
            j: 1.0,
            delta: 1.0,
            h_z: 0.0,
            h_x: 0.0,
            geometry: Geometry::rectangle(24).unwrap(),
        };
        let h = build_terms(&p);
        assert_eq!(p.geometry.edges.len(), 38);
        assert_eq!(h.terms.len(), 114);
    }

    #[test]
    fn empty_term_list_norm_bound() {
        let h = TermList { n_sites: 2, terms: vec![] };
        assert_eq!(h.coeff_norm_bound(), 0.0);
    }

    #[test]
    fn z_action_signs() {
        let h = TermList { n_sites: 1, terms: vec![PauliTerm::new(1.0, vec![(0, Axis::Z)])] };
        let s0 = StateVector::basis_state(1, 0).unwrap();
        let s1 = StateVector::basis_state(1, 1).unwrap();
        assert_eq!(h.apply(&s0).unwrap().amps[0], Complex64::new(1.0, 0.0));
        assert_eq!(h.apply(&s1).unwrap().amps[1], Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn singlet_is_eigenstate_with_energy_minus_three() {
        let h = build_terms(&chain_params(2, 1.0, 1.0, 0.0, 0.0));
        let mut s = StateVector::zero(2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        s.amps[0b01] = Complex64::new(r, 0.0);
        s.amps[0b10] = Complex64::new(-r, 0.0);
        let hs = h.apply(&s).unwrap();
        for (a, b) in hs.amps.iter().zip(&s.amps) {
            assert!((a - b * (-3.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let h = build_terms(&chain_params(8, 1.0, 0.7, 0.3, 0.2));
        let dense = h.dense_matrix().unwrap();
        let s = random_state(8, 7);
        let fast = h.apply(&s).unwrap();
        let sv = nalgebra::DVector::from_vec(s.amps.clone());
        let want = &dense * sv;
        for (i, a) in fast.amps.iter().enumerate() {
            assert!((a - want[i]).norm() < 1e-12, "index {i}");
        }
    }

    #[test]
    fn apply_rejects_size_mismatch() {
        let h = build_terms(&chain_params(3, 1.0, 1.0, 0.0, 0.0));
        let s = StateVector::basis_state(2, 0).unwrap();
        assert!(h.apply(&s).is_err());
    }

    #[test]
    fn sector_matrix_two_site() {
        // basis {01, 10}: ZZ gives -1 on the diagonal, XX+YY hops with 2
        let h = build_terms(&chain_params(2, 1.0, 1.0, 0.0, 0.0));
        let basis = SectorBasis::shared(2, 1).unwrap();
        for (col, want) in [(0usize, [-1.0, 2.0]), (1usize, [2.0, -1.0])] {
            let e = SectorVector::basis_state(basis.clone(), basis.mask(col));
            let he = h.apply_sector(&e).unwrap();
            for (row, w) in want.iter().enumerate() {
                assert!((he.amps[row] - Complex64::new(*w, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn diagonal_only_sector_apply_is_elementwise() {
        let h = TermList {
            n_sites: 4,
            terms: vec![
                PauliTerm::new(0.8, vec![(0, Axis::Z), (1, Axis::Z)]),
                PauliTerm::new(-0.3, vec![(2, Axis::Z), (3, Axis::Z)]),
                PauliTerm::new(-0.4, vec![(1, Axis::Z)]),
            ],
        };
        let basis = SectorBasis::shared(4, 2).unwrap();
        let mut v = SectorVector::zero(basis.clone());
        for (i, a) in v.amps.iter_mut().enumerate() {
            *a = Complex64::new(i as f64 + 1.0, -(i as f64));
        }
        v.normalize();
        let hv = h.apply_sector(&v).unwrap();
        let structured = SectorTerms::from_terms(&h).unwrap();
        for (i, a) in hv.amps.iter().enumerate() {
            let d = structured.diagonal(basis.mask(i));
            assert!((a - v.amps[i] * d).norm() < 1e-14);
        }
    }

    #[test]
    fn sector_apply_matches_embed_apply_project() {
        let h = build_terms(&chain_params(8, 1.0, 1.3, 0.6, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..=8usize {
            let basis = SectorBasis::shared(8, k).unwrap();
            let mut v = SectorVector::zero(basis);
            for a in &mut v.amps {
                *a = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
            v.normalize();
            let fast = h.apply_sector(&v).unwrap();
            let full = h.apply(&v.embed().unwrap()).unwrap();
            for (i, &m) in fast.basis.masks.iter().enumerate() {
                assert!((fast.amps[i] - full.amps[m as usize]).norm() < 1e-12);
            }
            // no leakage outside the sector
            for (idx, a) in full.amps.iter().enumerate() {
                if (idx as u64).count_ones() as usize != k {
                    assert_eq!(a.norm_sqr(), 0.0);
                }
            }
        }
    }

    #[test]
    fn sector_apply_rejects_transverse_field() {
        let h = build_terms(&chain_params(4, 1.0, 1.0, 0.0, 0.5));
        let basis = SectorBasis::shared(4, 2).unwrap();
        let v = SectorVector::basis_state(basis.clone(), basis.mask(0));
        assert!(matches!(h.apply_sector(&v), Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn hermiticity_random_states() {
        let h = build_terms(&chain_params(6, 0.9, 1.7, 0.8, 0.4));
        for seed in 0..5u64 {
            let x = random_state(6, seed);
            let y = random_state(6, seed + 100);
            let hy = h.apply(&y).unwrap();
            let hx = h.apply(&x).unwrap();
            let lhs = x.dot(&hy).unwrap();
            let rhs = y.dot(&hx).unwrap().conj();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_bound_dominates_spectrum() {
        for (n, j, delta, hz) in [(4usize, 1.0, 1.0, 0.0), (6, 0.7, 2.5, 1.1), (8, 1.0, 0.3, 0.4)]
        {
            let h = build_terms(&chain_params(n, j, delta, hz, 0.0));
            let dense = h.dense_matrix_real().unwrap();
            let eig = nalgebra::SymmetricEigen::new(dense);
            let bound = h.coeff_norm_bound();
            for ev in eig.eigenvalues.iter() {
                assert!(ev.abs() <= bound + 1e-10, "|{ev}| > {bound}");
            }
        }
    }

    #[test]
    fn magnetization_values() {
        let all_up = State::Full(StateVector::basis_state(5, 0).unwrap());
        assert_eq!(magnetization_expect(&all_up), 5.0);
        let basis = SectorBasis::shared(6, 2).unwrap();
        let w = State::Sector(SectorVector::basis_state(basis.clone(), basis.mask(0)));
        assert_eq!(magnetization_expect(&w), 2.0);
    }

    #[test]
    fn term_list_json_round_trip() {
        let h = build_terms(&chain_params(3, 1.0, 0.5, 0.25, 0.0));
        let json = h.to_json().unwrap();
        assert!(json.contains("\"coeff\""));
        assert!(json.contains("\"paulis\""));
        let back = TermList::from_json(&json, 3).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn u1_conservation_without_transverse_field() {
        let h = build_terms(&chain_params(6, 1.0, 1.5, 0.7, 0.0));
        for k in 0..=6usize {
            let basis = SectorBasis::shared(6, k).unwrap();
            let mut v = SectorVector::zero(basis);
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            for a in &mut v.amps {
                *a = Complex64::new(rng.gen(), rng.gen());
            }
            v.normalize();
            let full = h.apply(&v.embed().unwrap()).unwrap();
            let leak: f64 = full
                .amps
                .iter()
                .enumerate()
                .filter(|(idx, _)| (*idx as u64).count_ones() as usize != k)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            assert_eq!(leak, 0.0);
        }
    }
}
