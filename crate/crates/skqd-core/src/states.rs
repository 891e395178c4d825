//! Initial-state preparation: singlet products, Néel states, and per-sector
//! W-state products, plus overlap diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::lattice::Geometry;
use crate::state::{SectorBasis, SectorVector, State, StateVector};

/// Which reference state to prepare and along which site ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub kind: StateKind,
    pub layout: LayoutKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StateKind {
    SingletProduct,
    Neel,
    WStateProduct { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    Identity,
    Snake,
}

impl InitialStateSpec {
    pub fn singlet(layout: LayoutKind) -> Self {
        InitialStateSpec { kind: StateKind::SingletProduct, layout }
    }

    pub fn w_state(k: usize) -> Self {
        InitialStateSpec { kind: StateKind::WStateProduct { k }, layout: LayoutKind::Snake }
    }

    /// The Hamming-weight sector this state occupies.
    pub fn sector(&self, n: usize) -> usize {
        match self.kind {
            StateKind::SingletProduct => n / 2,
            StateKind::Neel => n / 2,
            StateKind::WStateProduct { k } => k,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.kind {
            StateKind::SingletProduct => {
                if n % 2 != 0 {
                    return Err(Error::InvalidSize(format!(
                        "singlet product needs an even site count, got {n}"
                    )));
                }
            }
            StateKind::Neel => {}
            StateKind::WStateProduct { k } => {
                if k > n / 2 {
                    return Err(Error::InvalidSector(format!(
                        "sector sweep covers k = 0..={}, got k = {k}",
                        n / 2
                    )));
                }
            }
        }
        Ok(())
    }

    fn layout_order(&self, geometry: &Geometry) -> Vec<usize> {
        match self.layout {
            LayoutKind::Identity => (0..geometry.n_sites).collect(),
            LayoutKind::Snake => geometry.snake_order(),
        }
    }

    /// Prepare the state. W-state products come back sector-resident, the
    /// half-filling product states in the full space.
    pub fn prepare(&self, geometry: &Geometry) -> Result<State> {
        self.validate(geometry.n_sites)?;
        let order = self.layout_order(geometry);
        match self.kind {
            StateKind::SingletProduct => Ok(State::Full(singlet_product(geometry.n_sites, &order)?)),
            StateKind::Neel => Ok(State::Full(neel(geometry.n_sites)?)),
            StateKind::WStateProduct { k } => {
                Ok(State::Sector(w_state_product_layout(geometry.n_sites, k, &order)?))
            }
        }
    }
}

/// Tensor product of two-site singlets (|01⟩ − |10⟩)/√2 placed on consecutive
/// layout pairs. The ground state of the odd-bond Hamiltonian.
pub fn singlet_product(n: usize, layout: &[usize]) -> Result<StateVector> {
    if n % 2 != 0 {
        return Err(Error::InvalidSize(format!(
            "singlet product needs an even site count, got {n}"
        )));
    }
    if layout.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "layout has {} entries for {n} sites",
            layout.len()
        )));
    }
    let pairs = n / 2;
    let mut out = StateVector::zero(n)?;
    let amp = 0.5f64.powi(pairs as i32 / 2)
        * if pairs % 2 == 1 { 1.0 / 2f64.sqrt() } else { 1.0 };
    for choice in 0u64..(1u64 << pairs) {
        let mut mask = 0u64;
        let mut sign = 1.0;
        for m in 0..pairs {
            let (a, b) = (layout[2 * m], layout[2 * m + 1]);
            if (choice >> m) & 1 == 0 {
                mask |= bits::site_bit(n, b); // |0_a 1_b⟩ branch, +
            } else {
                mask |= bits::site_bit(n, a); // |1_a 0_b⟩ branch, −
                sign = -sign;
            }
        }
        out.amps[mask as usize] = Complex64::new(sign * amp, 0.0);
    }
    Ok(out)
}

/// Computational basis state |0101…⟩.
pub fn neel(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::InvalidSize("need at least one site".into()));
    }
    let mut mask = 0u64;
    for site in (1..n).step_by(2) {
        mask |= bits::site_bit(n, site);
    }
    StateVector::basis_state(n, mask)
}

/// W-state product in the weight-k sector with identity layout.
///
/// Sites are split into k contiguous groups with boundaries ⌊mN/k⌉
/// (round-half-to-even); each group carries a uniform single-excitation
/// W-state, so every branch has exactly one excitation per group.
pub fn w_state_product(n: usize, k: usize) -> Result<SectorVector> {
    let order: Vec<usize> = (0..n).collect();
    w_state_product_layout(n, k, &order)
}

/// W-state product with groups contiguous along `layout`.
pub fn w_state_product_layout(n: usize, k: usize, layout: &[usize]) -> Result<SectorVector> {
    if k > n {
        return Err(Error::InvalidSector(format!("k = {k} exceeds n = {n}")));
    }
    if layout.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "layout has {} entries for {n} sites",
            layout.len()
        )));
    }
    let basis = SectorBasis::shared(n, k)?;
    if k == 0 {
        return Ok(SectorVector::basis_state(basis, 0));
    }
    let boundaries: Vec<usize> = (0..=k)
        .map(|m| ((m * n) as f64 / k as f64).round_ties_even() as usize)
        .collect();
    let groups: Vec<&[usize]> = (0..k).map(|m| &layout[boundaries[m]..boundaries[m + 1]]).collect();
    let amp: f64 = groups.iter().map(|g| 1.0 / (g.len() as f64).sqrt()).product();

    let mut v = SectorVector::zero(basis.clone());
    // one excitation choice per group, odometer-style
    let mut choice = vec![0usize; k];
    loop {
        let mut mask = 0u64;
        for (m, group) in groups.iter().enumerate() {
            mask |= bits::site_bit(n, group[choice[m]]);
        }
        v.amps[basis.rank(mask)] = Complex64::new(amp, 0.0);
        let mut m = k;
        loop {
            if m == 0 {
                return Ok(v);
            }
            m -= 1;
            choice[m] += 1;
            if choice[m] < groups[m].len() {
                break;
            }
            choice[m] = 0;
        }
    }
}

/// |⟨a|b⟩|². Mixed representations are compared by embedding the sector
/// state into the full space.
pub fn overlap_sq(a: &State, b: &State) -> Result<f64> {
    let d = match (a, b) {
        (State::Full(x), State::Full(y)) => x.dot(y)?,
        (State::Sector(x), State::Sector(y)) => x.dot(y)?,
        (State::Full(x), State::Sector(y)) => x.dot(&y.embed()?)?,
        (State::Sector(x), State::Full(y)) => x.embed()?.dot(y)?,
    };
    Ok(d.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{Axis, PauliTerm, TermList};

    fn identity_layout(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn two_site_singlet_amplitudes() {
        let s = singlet_product(2, &identity_layout(2)).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((s.amps[0b01].re - r).abs() < 1e-15);
        assert!((s.amps[0b10].re + r).abs() < 1e-15);
        assert_eq!(s.amps[0b00], Complex64::new(0.0, 0.0));
        assert_eq!(s.amps[0b11], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn four_site_singlet_amplitudes() {
        let s = singlet_product(4, &identity_layout(4)).unwrap();
        assert!((s.amps[0b0101].re - 0.5).abs() < 1e-15);
        assert!((s.amps[0b0110].re + 0.5).abs() < 1e-15);
        assert!((s.amps[0b1001].re + 0.5).abs() < 1e-15);
        assert!((s.amps[0b1010].re - 0.5).abs() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert!(singlet_product(3, &identity_layout(3)).is_err());
    }

    #[test]
    fn singlet_matches_preparation_circuit() {
        // X⊗X, then H on qubit 0, then CNOT(0→1), applied to |00⟩
        let r = 1.0 / 2f64.sqrt();
        let mut amps = [Complex64::new(0.0, 0.0); 4];
        amps[0b00] = Complex64::new(1.0, 0.0);
        // X⊗X
        amps.swap(0b00, 0b11);
        amps.swap(0b01, 0b10);
        // H on qubit 0 (most significant bit)
        let (a0, a2) = (amps[0b00], amps[0b10]);
        amps[0b00] = (a0 + a2) * r;
        amps[0b10] = (a0 - a2) * r;
        let (a1, a3) = (amps[0b01], amps[0b11]);
        amps[0b01] = (a1 + a3) * r;
        amps[0b11] = (a1 - a3) * r;
        // CNOT control qubit 0, target qubit 1
        amps.swap(0b10, 0b11);

        let s = singlet_product(2, &identity_layout(2)).unwrap();
        for (i, want) in amps.iter().enumerate() {
            assert!((s.amps[i] - want).norm() < 1e-15, "amplitude {i}");
        }
    }

    #[test]
    fn singlet_is_ground_state_of_odd_bond_hamiltonian() {
        // bonds (0,1) and (2,3) only; ground energy 2 × (−3)
        let mut terms = Vec::new();
        for (i, j) in [(0usize, 1usize), (2, 3)] {
            terms.push(PauliTerm::new(1.0, vec![(i, Axis::X), (j, Axis::X)]));
            terms.push(PauliTerm::new(1.0, vec![(i, Axis::Y), (j, Axis::Y)]));
            terms.push(PauliTerm::new(1.0, vec![(i, Axis::Z), (j, Axis::Z)]));
        }
        let h_odd = TermList { n_sites: 4, terms };
        let s = singlet_product(4, &identity_layout(4)).unwrap();
        let hs = h_odd.apply(&s).unwrap();
        for (a, b) in hs.amps.iter().zip(&s.amps) {
            assert!((a - b * (-6.0)).norm() < 1e-13);
        }
        // and −6 is the bottom of the spectrum
        let dense = h_odd.dense_matrix_real().unwrap();
        let eig = nalgebra::SymmetricEigen::new(dense);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min + 6.0).abs() < 1e-12);
    }

    #[test]
    fn neel_patterns() {
        assert_eq!(neel(2).unwrap().amps[0b01], Complex64::new(1.0, 0.0));
        assert_eq!(neel(3).unwrap().amps[0b010], Complex64::new(1.0, 0.0));
        let s = neel(4).unwrap();
        let hot = s.amps.iter().position(|a| a.norm_sqr() > 0.5).unwrap();
        assert_eq!((hot as u64).count_ones(), 2);
    }

    #[test]
    fn w2_state() {
        let v = w_state_product(2, 1).unwrap();
        let r = 1.0 / 2f64.sqrt();
        // basis for (2, 1) is [01, 10]
        assert!((v.amps[0].re - r).abs() < 1e-15);
        assert!((v.amps[1].re - r).abs() < 1e-15);
    }

    #[test]
    fn w_product_4_2_magnetization() {
        let v = w_state_product(4, 2).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        let full = v.embed().unwrap();
        // (|10⟩+|01⟩)/√2 ⊗ (|10⟩+|01⟩)/√2
        for mask in [0b1010usize, 0b1001, 0b0110, 0b0101] {
            assert!((full.amps[mask].re - 0.5).abs() < 1e-14, "mask {mask:04b}");
        }
        let m = crate::hamiltonian::magnetization_expect(&State::Sector(v));
        assert_eq!(m, 0.0);
    }

    #[test]
    fn w_product_5_2_group_structure() {
        // boundaries at round_ties_even(0, 2.5, 5) = [0, 2, 5]
        let v = w_state_product(5, 2).unwrap();
        let support: Vec<u64> = v
            .basis
            .masks
            .iter()
            .zip(&v.amps)
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(&m, _)| m)
            .collect();
        assert_eq!(support.len(), 2 * 3);
        for &mask in &support {
            assert_eq!(mask.count_ones(), 2);
            let g0: u32 = (0..2).map(|s| bits::site_value(mask, 5, s) as u32).sum();
            let g1: u32 = (2..5).map(|s| bits::site_value(mask, 5, s) as u32).sum();
            assert_eq!((g0, g1), (1, 1), "mask {mask:05b}");
        }
    }

    #[test]
    fn w_product_edge_sectors() {
        let v = w_state_product(4, 0).unwrap();
        assert_eq!(v.dim(), 1);
        assert_eq!(v.amps[0], Complex64::new(1.0, 0.0));
        let v = w_state_product(3, 3).unwrap();
        assert_eq!(v.dim(), 1); // |111⟩
        assert!(w_state_product(3, 4).is_err());
    }

    #[test]
    fn prepared_states_are_normalized() {
        for n in [2usize, 4, 6, 8, 10] {
            let s = singlet_product(n, &identity_layout(n)).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12, "singlet n={n}");
            for k in 0..=n {
                let v = w_state_product(n, k).unwrap();
                assert!((v.norm() - 1.0).abs() < 1e-12, "w n={n} k={k}");
            }
        }
    }

    #[test]
    fn overlap_examples() {
        let a = State::Full(neel(4).unwrap());
        assert!((overlap_sq(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = State::Full(StateVector::basis_state(4, 0).unwrap());
        assert_eq!(overlap_sq(&a, &b).unwrap(), 0.0);
        let c = State::Sector(w_state_product(4, 2).unwrap());
        let d = State::Full(w_state_product(4, 2).unwrap().embed().unwrap());
        assert!((overlap_sq(&c, &d).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snake_layout_singlet_stays_in_half_filling_sector() {
        let g = crate::lattice::Geometry::rectangle(8).unwrap();
        let spec = InitialStateSpec::singlet(LayoutKind::Snake);
        let State::Full(s) = spec.prepare(&g).unwrap() else { panic!() };
        assert_eq!(s.sector_leakage(4), 0.0);
    }
}
