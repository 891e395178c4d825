//! Compressed sparse row storage for the symmetric matrices this crate
//! diagonalizes: sector-restricted Hamiltonians and sampled-subspace
//! projections.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bits;
use crate::eigen::SymOp;
use crate::hamiltonian::SectorTerms;
use crate::state::SectorBasis;

/// Row-major sparse symmetric matrix. Both triangles are stored, so a
/// matrix-vector product is a plain row gather.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub vals: Vec<f64>,
}

/// Row-parallel products stay deterministic: each output element is one
/// sequential sum regardless of thread count.
const PAR_ROW_THRESHOLD: usize = 8192;

impl CsrMatrix {
    /// Sector-restricted Hamiltonian: one diagonal entry per row plus one
    /// entry per hop whose endpoints differ in the row's bitstring.
    pub fn sector_hamiltonian(terms: &SectorTerms, basis: &SectorBasis) -> Self {
        let n = terms.n_sites;
        let dim = basis.dim();
        let hop_bits: Vec<(u64, u64, f64)> = terms
            .hops
            .iter()
            .map(|h| (bits::site_bit(n, h.i), bits::site_bit(n, h.j), h.amp))
            .collect();

        let counts: Vec<usize> = basis
            .masks
            .par_iter()
            .map(|&mask| {
                1 + hop_bits
                    .iter()
                    .filter(|(bi, bj, _)| (mask & bi != 0) != (mask & bj != 0))
                    .count()
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0usize);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = *row_ptr.last().unwrap();
        let mut col_idx = vec![0u32; nnz];
        let mut vals = vec![0.0f64; nnz];

        // Fill rows independently; each slice belongs to exactly one row.
        let fill_row = |row: usize, cols: &mut [u32], vs: &mut [f64]| {
            let mask = basis.mask(row);
            cols[0] = row as u32;
            vs[0] = terms.diagonal(mask);
            let mut p = 1;
            for (bi, bj, amp) in &hop_bits {
                if (mask & bi != 0) != (mask & bj != 0) {
                    cols[p] = basis.rank(mask ^ bi ^ bj) as u32;
                    vs[p] = *amp;
                    p += 1;
                }
            }
        };

        if dim >= PAR_ROW_THRESHOLD {
            // Split the value arrays at row boundaries for parallel fill.
            let mut col_slices: Vec<&mut [u32]> = Vec::with_capacity(dim);
            let mut val_slices: Vec<&mut [f64]> = Vec::with_capacity(dim);
            let mut rest_c: &mut [u32] = &mut col_idx;
            let mut rest_v: &mut [f64] = &mut vals;
            for row in 0..dim {
                let len = row_ptr[row + 1] - row_ptr[row];
                let (c, rc) = rest_c.split_at_mut(len);
                let (v, rv) = rest_v.split_at_mut(len);
                col_slices.push(c);
                val_slices.push(v);
                rest_c = rc;
                rest_v = rv;
            }
            col_slices
                .par_iter_mut()
                .zip(val_slices.par_iter_mut())
                .enumerate()
                .for_each(|(row, (c, v))| fill_row(row, c, v));
        } else {
            for row in 0..dim {
                fill_row(row, &mut col_idx[row_ptr[row]..row_ptr[row + 1]], &mut vals[row_ptr[row]..row_ptr[row + 1]]);
            }
        }

        CsrMatrix { dim, row_ptr, col_idx, vals }
    }

    /// Build from per-row (column, value) lists.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0usize);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { dim, row_ptr, col_idx, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    fn row_product(&self, row: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for p in self.row_ptr[row]..self.row_ptr[row + 1] {
            acc += self.vals[p] * x[self.col_idx[p] as usize];
        }
        acc
    }

    /// y = A x over complex amplitudes (the matrix is real).
    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        let kernel = |row: usize| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += x[self.col_idx[p] as usize] * self.vals[p];
            }
            acc
        };
        if self.dim >= PAR_ROW_THRESHOLD {
            y.par_iter_mut().enumerate().for_each(|(row, out)| *out = kernel(row));
        } else {
            for (row, out) in y.iter_mut().enumerate() {
                *out = kernel(row);
            }
        }
    }

    /// Largest off-diagonal asymmetry |A − Aᵀ|; diagnostic for tests.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for row in 0..self.dim {
            for p in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[p] as usize;
                let v = self.vals[p];
                let mut mirror = 0.0;
                for q in self.row_ptr[col]..self.row_ptr[col + 1] {
                    if self.col_idx[q] as usize == row {
                        mirror += self.vals[q];
                    }
                }
                defect = defect.max((v - mirror).abs());
            }
        }
        defect
    }
}

impl SymOp for CsrMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        if self.dim >= PAR_ROW_THRESHOLD {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(row, out)| *out = self.row_product(row, x));
        } else {
            for (row, out) in y.iter_mut().enumerate() {
                *out = self.row_product(row, x);
            }
        }
    }
}
