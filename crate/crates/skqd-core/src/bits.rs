//! Bitstring conventions and combinatorics for fixed-Hamming-weight bases.
//!
//! A computational basis state on `n` sites is stored as a `u64` mask whose
//! numeric value equals the binary value of the serialized bitstring: site 0
//! is the leftmost character, i.e. site `i` occupies bit `n - 1 - i`. With
//! this layout the lexicographic order of bitstrings coincides with numeric
//! order of masks, and bit value 1 marks an excitation (Z eigenvalue −1).

use crate::error::{Error, Result};

/// Maximum number of sites representable in a `u64` mask.
pub const MAX_SITES: usize = 60;

/// Bit position of `site` inside a mask over `n` sites.
#[inline(always)]
pub fn site_bit(n: usize, site: usize) -> u64 {
    debug_assert!(site < n);
    1u64 << (n - 1 - site)
}

/// Value (0 or 1) of `site` in `mask`.
#[inline(always)]
pub fn site_value(mask: u64, n: usize, site: usize) -> u64 {
    (mask >> (n - 1 - site)) & 1
}

/// Z eigenvalue (+1.0 or −1.0) of `site` in `mask`.
#[inline(always)]
pub fn z_value(mask: u64, n: usize, site: usize) -> f64 {
    if site_value(mask, n, site) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Serialize a mask as a bitstring with site 0 leftmost.
pub fn format_mask(mask: u64, n: usize) -> String {
    (0..n)
        .map(|site| if site_value(mask, n, site) == 1 { '1' } else { '0' })
        .collect()
}

/// Parse a bitstring (site 0 leftmost) into a mask.
pub fn parse_mask(s: &str, n: usize) -> Result<u64> {
    if s.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "bitstring '{s}' has {} characters, expected {n}",
            s.len()
        )));
    }
    let mut mask = 0u64;
    for (site, ch) in s.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => mask |= site_bit(n, site),
            _ => {
                return Err(Error::Domain(format!(
                    "bitstring '{s}' contains non-binary character '{ch}'"
                )))
            }
        }
    }
    Ok(mask)
}

/// Table of binomial coefficients C(n, k) for n ≤ MAX_SITES, saturating at
/// u64::MAX (never reached for the system sizes this crate supports).
#[derive(Debug, Clone)]
pub struct BinomTable {
    rows: Vec<Vec<u64>>,
}

impl BinomTable {
    pub fn new(max_n: usize) -> Self {
        let mut rows = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![0u64; n + 1];
            row[0] = 1;
            for k in 1..=n {
                let a = rows.get(n - 1).map_or(0, |r: &Vec<u64>| *r.get(k - 1).unwrap_or(&0));
                let b = rows.get(n - 1).map_or(0, |r: &Vec<u64>| *r.get(k).unwrap_or(&0));
                row[k] = a.saturating_add(b);
            }
            rows.push(row);
        }
        BinomTable { rows }
    }

    #[inline(always)]
    pub fn c(&self, n: usize, k: usize) -> u64 {
        if k > n {
            0
        } else {
            self.rows[n][k]
        }
    }
}

/// Binomial coefficient without a shared table (small inputs only).
pub fn binomial(n: usize, k: usize) -> u64 {
    BinomTable::new(n).c(n, k)
}

/// Enumerate all weight-`k` masks over `n` sites in increasing numeric order
/// (= lexicographic order of serialized bitstrings) via Gosper's hack.
pub fn weight_k_masks(n: usize, k: usize) -> Vec<u64> {
    assert!(n <= MAX_SITES && k <= n);
    if k == 0 {
        return vec![0];
    }
    let count = BinomTable::new(n).c(n, k) as usize;
    let mut out = Vec::with_capacity(count);
    let limit = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut v = (1u64 << k) - 1;
    loop {
        out.push(v);
        if out.len() == count {
            break;
        }
        // next higher integer with the same popcount
        let t = v | (v - 1);
        v = (t + 1) | (((!t & t.wrapping_add(1)) - 1) >> (v.trailing_zeros() + 1));
        if v > limit {
            break;
        }
    }
    out
}

/// Lexicographic rank of a weight-`k` mask among all weight-`k` masks on `n`
/// sites. Inverse of [`unrank`].
#[inline]
pub fn rank(table: &BinomTable, mask: u64, n: usize) -> usize {
    let mut ones_left = mask.count_ones() as usize;
    let mut r = 0u64;
    let mut m = mask;
    while m != 0 {
        let pos = 63 - m.leading_zeros() as usize; // highest set bit
        debug_assert!(pos < n);
        r += table.c(pos, ones_left);
        ones_left -= 1;
        m &= !(1u64 << pos);
    }
    r as usize
}

/// Weight-`k` mask on `n` sites with lexicographic rank `r`.
pub fn unrank(table: &BinomTable, mut r: u64, n: usize, k: usize) -> u64 {
    let mut mask = 0u64;
    let mut ones_left = k;
    for pos in (0..n).rev() {
        if ones_left == 0 {
            break;
        }
        let c = table.c(pos, ones_left);
        if r >= c {
            r -= c;
            mask |= 1u64 << pos;
            ones_left -= 1;
        }
    }
    debug_assert_eq!(r, 0);
    mask
}

/// splitmix64 finalizer; stable across platforms.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
