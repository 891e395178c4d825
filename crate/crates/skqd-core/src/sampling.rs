//! Projective measurement simulation: multinomial bitstring sampling,
//! readout-flip noise injection, Hamming-weight post-selection, and sample
//! merging into a subspace basis.
//!
//! Sampling draws shots by inverse CDF over the nonzero amplitudes with a
//! counter-based PRNG (ChaCha8) seeded per task, so identical
//! (state, shots, seed) always reproduce the same table regardless of thread
//! count.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::error::{Error, Result};
use crate::state::State;

/// Single-parameter readout error: each bit of each recorded shot flips
/// independently with probability `readout_flip_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub readout_flip_prob: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let p = self.readout_flip_prob;
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("readout flip probability {p} outside [0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub krylov_step: u32,
    pub shots_requested: u64,
    pub shots_discarded: u64,
    pub filtered: bool,
    pub seed: u64,
}

/// Bitstring → shot-count map with provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTable {
    pub n_sites: usize,
    pub counts: BTreeMap<u64, u64>,
    pub meta: SampleMeta,
}

impl SampleTable {
    pub fn total_counts(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Serialize as JSON lines: a meta header followed by one
    /// `{"bitstring": ..., "count": ...}` object per key in lexicographic
    /// order. This is also the ingestion format for externally produced
    /// counts.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            n_sites: usize,
            #[serde(flatten)]
            meta: &'a SampleMeta,
        }
        serde_json::to_writer(&mut w, &Header { n_sites: self.n_sites, meta: &self.meta })?;
        writeln!(w)?;
        for (&mask, &count) in &self.counts {
            #[derive(Serialize)]
            struct Line {
                bitstring: String,
                count: u64,
            }
            serde_json::to_writer(
                &mut w,
                &Line { bitstring: bits::format_mask(mask, self.n_sites), count },
            )?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            n_sites: usize,
            #[serde(flatten)]
            meta: SampleMeta,
        }
        #[derive(Deserialize)]
        struct Line {
            bitstring: String,
            count: u64,
        }
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Config("empty sample file".into()))??;
        let header: Header = serde_json::from_str(&header_line)?;
        let mut counts = BTreeMap::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)?;
            let mask = bits::parse_mask(&parsed.bitstring, header.n_sites)?;
            *counts.entry(mask).or_insert(0) += parsed.count;
        }
        Ok(SampleTable { n_sites: header.n_sites, counts, meta: header.meta })
    }
}

/// Seed schedule for reproducible parallel sweeps:
/// `base ⊕ hash(krylov_step, sector, grid_index)` with a splitmix64 chain.
pub fn task_seed(base: u64, krylov_step: u64, sector: u64, grid_index: u64) -> u64 {
    let h = bits::mix64(bits::mix64(bits::mix64(krylov_step) ^ sector) ^ grid_index);
    base ^ h
}

/// Multinomial draw of `shots` bitstrings from |amplitude|².
pub fn sample(state: &State, shots: u64, seed: u64) -> Result<SampleTable> {
    if shots == 0 {
        return Err(Error::InvalidSize("cannot sample zero shots".into()));
    }
    let support = state.support_probabilities();
    if support.is_empty() {
        return Err(Error::InvalidSize("state has empty support".into()));
    }
    let mut cdf = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for &(_, p) in &support {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * total;
        let pos = cdf.partition_point(|&c| c <= u).min(support.len() - 1);
        *counts.entry(support[pos].0).or_insert(0) += 1;
    }
    Ok(SampleTable {
        n_sites: state.n_sites(),
        counts,
        meta: SampleMeta {
            krylov_step: 0,
            shots_requested: shots,
            shots_discarded: 0,
            filtered: false,
            seed,
        },
    })
}

/// Exhaustive "sampling": every support bitstring once. Deterministic and
/// RNG-free; used when the support is small enough to enumerate.
pub fn sample_support(state: &State) -> Result<SampleTable> {
    let support = state.support_probabilities();
    if support.is_empty() {
        return Err(Error::InvalidSize("state has empty support".into()));
    }
    let counts: BTreeMap<u64, u64> = support.iter().map(|&(m, _)| (m, 1)).collect();
    let total = counts.len() as u64;
    Ok(SampleTable {
        n_sites: state.n_sites(),
        counts,
        meta: SampleMeta {
            krylov_step: 0,
            shots_requested: total,
            shots_discarded: 0,
            filtered: false,
            seed: 0,
        },
    })
}

/// Flip each bit of each recorded shot independently with the model's
/// probability; count mass is preserved.
pub fn apply_readout_noise(table: &SampleTable, model: &NoiseModel, seed: u64) -> Result<SampleTable> {
    model.validate()?;
    let p = model.readout_flip_prob;
    if p == 0.0 {
        return Ok(table.clone());
    }
    let n = table.n_sites;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for (&mask, &count) in &table.counts {
        for _ in 0..count {
            let mut flipped = mask;
            for site in 0..n {
                if rng.gen::<f64>() < p {
                    flipped ^= bits::site_bit(n, site);
                }
            }
            *counts.entry(flipped).or_insert(0) += 1;
        }
    }
    Ok(SampleTable { n_sites: n, counts, meta: table.meta })
}

/// Keep exactly the keys with Hamming weight `k`; everything else moves into
/// `shots_discarded`. An empty result is returned as-is — the caller decides
/// whether that is fatal.
pub fn filter_sector(table: &SampleTable, k: usize) -> SampleTable {
    let mut counts = BTreeMap::new();
    let mut dropped = 0u64;
    for (&mask, &count) in &table.counts {
        if mask.count_ones() as usize == k {
            counts.insert(mask, count);
        } else {
            dropped += count;
        }
    }
    let mut meta = table.meta;
    meta.shots_discarded += dropped;
    meta.filtered = true;
    SampleTable { n_sites: table.n_sites, counts, meta }
}

/// Deduplicated union of sampled bitstrings in lexicographic order, with
/// total multiplicities retained for diagnostics.
#[derive(Debug, Clone)]
pub struct MergedBasis {
    pub n_sites: usize,
    pub masks: Vec<u64>,
    pub multiplicities: Vec<u64>,
}

pub fn merge_tables(tables: &[SampleTable]) -> Result<MergedBasis> {
    let Some(first) = tables.first() else {
        return Err(Error::InvalidSize("no tables to merge".into()));
    };
    let n = first.n_sites;
    let mut union: BTreeMap<u64, u64> = BTreeMap::new();
    for t in tables {
        if t.n_sites != n {
            return Err(Error::DimensionMismatch(format!(
                "mixed site counts {} and {n} in merge",
                t.n_sites
            )));
        }
        for (&mask, &count) in &t.counts {
            *union.entry(mask).or_insert(0) += count;
        }
    }
    let masks: Vec<u64> = union.keys().copied().collect();
    let multiplicities: Vec<u64> = union.values().copied().collect();
    Ok(MergedBasis { n_sites: n, masks, multiplicities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{SectorBasis, SectorVector, StateVector};
    use crate::states::{singlet_product, w_state_product};

    #[test]
    fn basis_state_sampling_is_deterministic() {
        let s = State::Full(StateVector::basis_state(4, 0b0110).unwrap());
        let t = sample(&s, 50, 7).unwrap();
        assert_eq!(t.counts.len(), 1);
        assert_eq!(t.counts[&0b0110], 50);
        assert_eq!(t.total_counts() + t.meta.shots_discarded, t.meta.shots_requested);
    }

    #[test]
    fn zero_shots_is_an_error() {
        let s = State::Full(StateVector::basis_state(2, 0).unwrap());
        assert!(sample(&s, 0, 1).is_err());
    }

    #[test]
    fn w2_counts_concentrate() {
        let s = State::Sector(w_state_product(2, 1).unwrap());
        let t = sample(&s, 1_000_000, 42).unwrap();
        // Bernoulli(1/2): 5σ with σ = 500
        for mask in [0b01u64, 0b10] {
            let c = t.counts[&mask] as f64;
            assert!((c - 500_000.0).abs() < 2500.0, "count {c}");
        }
    }

    #[test]
    fn zero_amplitude_outcomes_never_appear() {
        let s = State::Full(singlet_product(4, &[0, 1, 2, 3]).unwrap());
        let t = sample(&s, 4000, 3).unwrap();
        assert_eq!(t.counts.len(), 4);
        for mask in t.counts.keys() {
            assert_eq!(mask.count_ones(), 2);
        }
    }

    #[test]
    fn identical_seeds_reproduce_tables() {
        let s = State::Sector(w_state_product(6, 3).unwrap());
        let a = sample(&s, 5000, 99).unwrap();
        let b = sample(&s, 5000, 99).unwrap();
        assert_eq!(a, b);
        let c = sample(&s, 5000, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_p_zero_is_identity() {
        let s = State::Full(StateVector::basis_state(3, 0b101).unwrap());
        let t = sample(&s, 100, 1).unwrap();
        let noisy = apply_readout_noise(&t, &NoiseModel { readout_flip_prob: 0.0 }, 5).unwrap();
        assert_eq!(t, noisy);
    }

    #[test]
    fn noise_half_on_single_bit_is_roughly_uniform() {
        let s = State::Full(StateVector::basis_state(1, 0).unwrap());
        let t = sample(&s, 100_000, 1).unwrap();
        let noisy = apply_readout_noise(&t, &NoiseModel { readout_flip_prob: 0.5 }, 11).unwrap();
        let ones = *noisy.counts.get(&1).unwrap_or(&0) as f64;
        // 5σ with σ = √(0.25 · 100000) ≈ 158
        assert!((ones - 50_000.0).abs() < 791.0, "ones {ones}");
        assert_eq!(noisy.total_counts(), 100_000);
    }

    #[test]
    fn noise_escape_rate_matches_binomial() {
        // weight-4 key on 18 sites, p = 0.01: per-shot escape 1 − 0.99^18
        let n = 18;
        let mask = bits::parse_mask("111100000000000000", n).unwrap();
        let mut counts = BTreeMap::new();
        let shots = 200_000u64;
        counts.insert(mask, shots);
        let table = SampleTable {
            n_sites: n,
            counts,
            meta: SampleMeta {
                krylov_step: 0,
                shots_requested: shots,
                shots_discarded: 0,
                filtered: false,
                seed: 0,
            },
        };
        let noisy =
            apply_readout_noise(&table, &NoiseModel { readout_flip_prob: 0.01 }, 17).unwrap();
        let escaped: u64 = noisy
            .counts
            .iter()
            .filter(|(m, _)| m.count_ones() != 4)
            .map(|(_, c)| c)
            .sum();
        // Weight is preserved iff equally many 1→0 and 0→1 flips occur:
        // P(keep) = Σ_j C(4,j) p^j q^{4−j} · C(14,j) p^j q^{14−j}.
        let (p, q) = (0.01f64, 0.99f64);
        let keep: f64 = (0..=4)
            .map(|j| {
                let ones = bits::binomial(4, j) as f64 * p.powi(j as i32) * q.powi(4 - j as i32);
                let zeros =
                    bits::binomial(14, j) as f64 * p.powi(j as i32) * q.powi(14 - j as i32);
                ones * zeros
            })
            .sum();
        let esc = 1.0 - keep;
        let sigma = (esc * keep * shots as f64).sqrt();
        let expected = esc * shots as f64;
        assert!(
            (escaped as f64 - expected).abs() < 5.0 * sigma,
            "escaped {escaped}, expected {expected:.0} ± {:.0}",
            5.0 * sigma
        );
        // the any-flip rate 1 − 0.99^18 ≈ 0.165 is the loose upper reading
        let naive = 1.0 - 0.99f64.powi(18);
        assert!(naive > esc && naive - esc < 0.006);
    }

    #[test]
    fn filter_drops_wrong_weights() {
        let mut counts = BTreeMap::new();
        counts.insert(bits::parse_mask("0011", 4).unwrap(), 10);
        counts.insert(bits::parse_mask("0001", 4).unwrap(), 2);
        counts.insert(bits::parse_mask("0111", 4).unwrap(), 1);
        let table = SampleTable {
            n_sites: 4,
            counts,
            meta: SampleMeta {
                krylov_step: 0,
                shots_requested: 13,
                shots_discarded: 0,
                filtered: false,
                seed: 0,
            },
        };
        let filtered = filter_sector(&table, 2);
        assert_eq!(filtered.counts.len(), 1);
        assert_eq!(filtered.counts[&0b0011], 10);
        assert_eq!(filtered.meta.shots_discarded, 3);
        assert!(filtered.meta.filtered);
        assert_eq!(filtered.total_counts() + filtered.meta.shots_discarded, 13);
        // idempotent
        let again = filter_sector(&filtered, 2);
        assert_eq!(again, filtered);
    }

    #[test]
    fn clean_sector_sampling_discards_nothing() {
        let basis = SectorBasis::shared(8, 3).unwrap();
        let v = SectorVector::basis_state(basis.clone(), basis.mask(17));
        let t = sample(&State::Sector(v), 1000, 5).unwrap();
        let filtered = filter_sector(&t, 3);
        assert_eq!(filtered.meta.shots_discarded, 0);
    }

    #[test]
    fn merge_unions_and_sorts() {
        let mk = |entries: &[(u64, u64)]| SampleTable {
            n_sites: 2,
            counts: entries.iter().copied().collect(),
            meta: SampleMeta {
                krylov_step: 0,
                shots_requested: entries.iter().map(|e| e.1).sum(),
                shots_discarded: 0,
                filtered: false,
                seed: 0,
            },
        };
        let merged = merge_tables(&[mk(&[(0b00, 5)]), mk(&[(0b00, 1), (0b11, 2)])]).unwrap();
        assert_eq!(merged.masks, vec![0b00, 0b11]);
        assert_eq!(merged.multiplicities, vec![6, 2]);
        let bad = SampleTable { n_sites: 3, ..mk(&[(0b0, 1)]) };
        assert!(merge_tables(&[mk(&[(0b00, 1)]), bad]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let s = State::Sector(w_state_product(5, 2).unwrap());
        let t = sample(&s, 500, 23).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let back = SampleTable::read_jsonl(&buf[..]).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn support_sampling_enumerates_support() {
        let s = State::Full(singlet_product(6, &[0, 1, 2, 3, 4, 5]).unwrap());
        let t = sample_support(&s).unwrap();
        assert_eq!(t.counts.len(), 8);
        assert!(t.counts.values().all(|&c| c == 1));
    }

    #[test]
    fn task_seed_mixes_all_inputs() {
        let base = 12345;
        let s0 = task_seed(base, 0, 0, 0);
        assert_ne!(s0, task_seed(base, 1, 0, 0));
        assert_ne!(s0, task_seed(base, 0, 1, 0));
        assert_ne!(s0, task_seed(base, 0, 0, 1));
        assert_eq!(s0, task_seed(base, 0, 0, 0));
    }
}
