//! Lowest eigenpair of a real symmetric operator.
//!
//! Small problems are handled densely; everything else runs Lanczos with
//! full reorthogonalization, restarting from the current Ritz vector until
//! the explicit residual ‖Av − θv‖ meets the tolerance. The operator is only
//! touched through matrix-vector products.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Matrix-free real symmetric operator.
pub trait SymOp: Sync {
    fn dim(&self) -> usize;
    /// y = A x (overwrites y).
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Lowest eigenvalue.
    pub value: f64,
    /// Second-lowest Ritz value, when the solve produced one; used for gap
    /// flagging. Exact on the dense path, an upper estimate from Lanczos.
    pub second_value: Option<f64>,
    /// Normalized eigenvector for `value`.
    pub vector: Vec<f64>,
    /// Explicit residual ‖Av − θv‖.
    pub residual: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Convergence: residual ≤ tol · max(1, |θ|).
    pub tol: f64,
    /// Problems of at most this dimension go through the dense path.
    pub dense_cutoff: usize,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-10, dense_cutoff: 512, max_restarts: 60 }
    }
}

/// Floats of Lanczos basis storage to budget per solve (~320 MB).
const BASIS_BUDGET_F64: usize = 40_000_000;
const M_MIN: usize = 24;
const M_CAP: usize = 300;
const CHECK_EVERY: usize = 8;

pub fn lowest_eigenpair(op: &dyn SymOp, opts: &EigenOptions) -> Result<EigenSolution> {
    let dim = op.dim();
    if dim == 0 {
        return Err(Error::InvalidSize("zero-dimensional operator".into()));
    }
    if dim <= opts.dense_cutoff {
        return Ok(dense_lowest(&dense_from_op(op), op));
    }
    lanczos_lowest(op, opts)
}

/// Materialize the operator column by column (small dimensions only).
pub fn dense_from_op(op: &dyn SymOp) -> DMatrix<f64> {
    let dim = op.dim();
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut col = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..dim {
            m[(i, j)] = col[i];
        }
    }
    m
}

fn dense_lowest(mat: &DMatrix<f64>, op: &dyn SymOp) -> EigenSolution {
    let dim = mat.nrows();
    if dim == 1 {
        return EigenSolution {
            value: mat[(0, 0)],
            second_value: None,
            vector: vec![1.0],
            residual: 0.0,
            matvecs: 1,
        };
    }
    let eig = SymmetricEigen::new(mat.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let lo = order[0];
    let value = eig.eigenvalues[lo];
    let second_value = Some(eig.eigenvalues[order[1]]);
    let mut vector: Vec<f64> = eig.eigenvectors.column(lo).iter().copied().collect();
    canonicalize_sign(&mut vector);
    let mut av = vec![0.0; dim];
    op.apply(&vector, &mut av);
    let residual = vector
        .iter()
        .zip(&av)
        .map(|(v, a)| (a - value * v) * (a - value * v))
        .sum::<f64>()
        .sqrt();
    EigenSolution { value, second_value, vector, residual, matvecs: dim + 1 }
}

fn lanczos_lowest(op: &dyn SymOp, opts: &EigenOptions) -> Result<EigenSolution> {
    let dim = op.dim();
    let m_max = (BASIS_BUDGET_F64 / dim).clamp(M_MIN, M_CAP).min(dim);

    // Deterministic quasi-random start.
    let mut start: Vec<f64> = (0..dim)
        .map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5)
        .collect();
    normalize(&mut start);

    let mut total_matvecs = 0usize;
    let mut best: Option<(f64, Option<f64>, Vec<f64>)> = None;

    for _restart in 0..opts.max_restarts {
        let cycle = lanczos_cycle(op, &start, m_max, opts.tol);
        total_matvecs += cycle.matvecs;
        let (theta, theta2, vector) = (cycle.theta, cycle.theta2, cycle.vector);

        let mut av = vec![0.0; dim];
        op.apply(&vector, &mut av);
        total_matvecs += 1;
        let residual = vector
            .iter()
            .zip(&av)
            .map(|(v, a)| (a - theta * v) * (a - theta * v))
            .sum::<f64>()
            .sqrt();

        let improved = best.as_ref().map_or(true, |(bt, _, _)| theta <= *bt);
        if improved {
            best = Some((theta, theta2, vector.clone()));
        }

        if residual <= opts.tol * theta.abs().max(1.0) {
            let mut vector = vector;
            canonicalize_sign(&mut vector);
            return Ok(EigenSolution {
                value: theta,
                second_value: theta2,
                vector,
                residual,
                matvecs: total_matvecs,
            });
        }
        start = vector;
    }

    let (theta, _, vector) = best.unwrap();
    let mut av = vec![0.0; dim];
    op.apply(&vector, &mut av);
    let residual = vector
        .iter()
        .zip(&av)
        .map(|(v, a)| (a - theta * v) * (a - theta * v))
        .sum::<f64>()
        .sqrt();
    Err(Error::Convergence { residual, iterations: total_matvecs })
}

struct CycleResult {
    theta: f64,
    theta2: Option<f64>,
    vector: Vec<f64>,
    matvecs: usize,
}

/// One Lanczos sweep with full reorthogonalization, stopping early when the
/// cheap residual bound β·|s_m| clears the tolerance.
fn lanczos_cycle(op: &dyn SymOp, start: &[f64], m_max: usize, tol: f64) -> CycleResult {
    let dim = op.dim();
    let mut q_basis: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
    let mut betas: Vec<f64> = Vec::with_capacity(m_max);
    let mut matvecs = 0usize;
    let mut w = vec![0.0; dim];

    for j in 0..m_max {
        op.apply(&q_basis[j], &mut w);
        matvecs += 1;
        let alpha = dot(&q_basis[j], &w);
        alphas.push(alpha);
        axpy(&mut w, -alpha, &q_basis[j]);
        if j > 0 {
            let b = betas[j - 1];
            axpy(&mut w, -b, &q_basis[j - 1]);
        }
        // Full reorthogonalization; repeat once if cancellation was severe.
        for _pass in 0..2 {
            let before = norm(&w);
            for q in &q_basis {
                let c = dot(q, &w);
                axpy(&mut w, -c, q);
            }
            if norm(&w) > 0.5 * before {
                break;
            }
        }
        let beta = norm(&w);

        let last = j + 1 == m_max;
        if (j + 1) % CHECK_EVERY == 0 || last || beta < 1e-13 {
            let (theta, _, s) = tridiag_lowest(&alphas, &betas);
            let bound = beta * s[s.len() - 1].abs();
            if bound <= 0.1 * tol * theta.abs().max(1.0) || last || beta < 1e-13 {
                let (theta, theta2, s) = tridiag_lowest(&alphas, &betas);
                let mut vector = vec![0.0; dim];
                for (coef, q) in s.iter().zip(&q_basis) {
                    axpy(&mut vector, *coef, q);
                }
                normalize(&mut vector);
                return CycleResult { theta, theta2, vector, matvecs };
            }
        }
        if beta < 1e-13 {
            break;
        }
        betas.push(beta);
        let mut q_next = std::mem::replace(&mut w, vec![0.0; dim]);
        scale(&mut q_next, 1.0 / beta);
        q_basis.push(q_next);
    }

    let (theta, theta2, s) = tridiag_lowest(&alphas, &betas);
    let mut vector = vec![0.0; dim];
    for (coef, q) in s.iter().zip(&q_basis) {
        axpy(&mut vector, *coef, q);
    }
    normalize(&mut vector);
    CycleResult { theta, theta2, vector, matvecs }
}

/// Lowest eigenpair (and second value) of the symmetric tridiagonal matrix
/// with diagonal `alphas` and off-diagonal `betas`.
fn tridiag_lowest(alphas: &[f64], betas: &[f64]) -> (f64, Option<f64>, Vec<f64>) {
    let m = alphas.len();
    if m == 1 {
        return (alphas[0], None, vec![1.0]);
    }
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i > 0 {
            t[(i, i - 1)] = betas[i - 1];
            t[(i - 1, i)] = betas[i - 1];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let lo = order[0];
    let s: Vec<f64> = eig.eigenvectors.column(lo).iter().copied().collect();
    (eig.eigenvalues[lo], Some(eig.eigenvalues[order[1]]), s)
}

fn canonicalize_sign(v: &mut [f64]) {
    let mut pick = 0.0f64;
    for &x in v.iter() {
        if x.abs() > pick.abs() {
            pick = x;
        }
    }
    if pick < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn scale(a: &mut [f64], c: f64) {
    for x in a.iter_mut() {
        *x *= c;
    }
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct DenseOp(DMatrix<f64>);

    impl SymOp for DenseOp {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.0.nrows() {
                y[i] = (0..self.0.ncols()).map(|j| self.0[(i, j)] * x[j]).sum();
            }
        }
    }

    fn random_symmetric(dim: usize, seed: u64) -> DMatrix<f64> {
        use crate::bits::mix64;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let h = mix64(seed ^ ((i as u64) << 32) ^ j as u64);
                let v = (h as f64 / u64::MAX as f64) - 0.5;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn one_by_one() {
        let op = DenseOp(DMatrix::from_row_slice(1, 1, &[4.25]));
        let sol = lowest_eigenpair(&op, &EigenOptions::default()).unwrap();
        assert_eq!(sol.value, 4.25);
        assert_eq!(sol.vector, vec![1.0]);
    }

    #[test]
    fn two_by_two_hand_computed() {
        let op = DenseOp(DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 2.0, -1.0]));
        let sol = lowest_eigenpair(&op, &EigenOptions::default()).unwrap();
        assert!((sol.value + 3.0).abs() < 1e-12);
        let r = 1.0 / 2f64.sqrt();
        assert!((sol.vector[0].abs() - r).abs() < 1e-12);
        assert!((sol.vector[0] + sol.vector[1]).abs() < 1e-12);
        assert_eq!(sol.second_value, Some(1.0));
    }

    #[test]
    fn lanczos_matches_dense_on_random_matrices() {
        for seed in 0..4u64 {
            let dim = 700; // above the dense cutoff
            let m = random_symmetric(dim, seed);
            let op = DenseOp(m.clone());
            let opts = EigenOptions::default();
            let sol = lowest_eigenpair(&op, &opts).unwrap();
            let eig = SymmetricEigen::new(m);
            let want = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                (sol.value - want).abs() < 1e-8,
                "seed {seed}: lanczos {} vs dense {want}",
                sol.value
            );
            assert!(sol.residual <= opts.tol * sol.value.abs().max(1.0));
        }
    }

    #[test]
    fn diagonal_operator_exact() {
        let dim = 600;
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = (i as f64) - 7.5;
        }
        let sol = lowest_eigenpair(&DenseOp(m), &EigenOptions::default()).unwrap();
        assert!((sol.value + 7.5).abs() < 1e-10);
        assert!((sol.vector[0].abs() - 1.0).abs() < 1e-8);
    }
}
