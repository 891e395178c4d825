//! Open-boundary lattice geometries: 1D chains and near-square rectangles.
//!
//! Rectangles use row-major site labels (site = row · cols + col). The
//! rectangle dimensions for a given site count come from a divisor search
//! that starts at ⌊√n⌋ and steps downward to the first divisor, so the
//! layout is the most-square open rectangle with r ≤ c; prime n degenerates
//! to a 1×n strip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeShape {
    Chain,
    Rect { rows: usize, cols: usize },
}

/// Sites plus undirected nearest-neighbor edges.
///
/// Serializes as `{"n": int, "shape": "chain"|"rect", "rows": int,
/// "cols": int, "edges": [[i, j], ...]}`; a chain reports rows = 1,
/// cols = n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GeometryWire", try_from = "GeometryWire")]
pub struct Geometry {
    pub n_sites: usize,
    pub shape: LatticeShape,
    /// Unordered pairs (i, j) with i < j, deduplicated, no self-loops.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GeometryWire {
    n: usize,
    shape: String,
    rows: usize,
    cols: usize,
    edges: Vec<(usize, usize)>,
}

impl From<Geometry> for GeometryWire {
    fn from(g: Geometry) -> Self {
        let (shape, rows, cols) = match g.shape {
            LatticeShape::Chain => ("chain".to_string(), 1, g.n_sites),
            LatticeShape::Rect { rows, cols } => ("rect".to_string(), rows, cols),
        };
        GeometryWire { n: g.n_sites, shape, rows, cols, edges: g.edges }
    }
}

impl TryFrom<GeometryWire> for Geometry {
    type Error = Error;

    fn try_from(w: GeometryWire) -> Result<Self> {
        let shape = match w.shape.as_str() {
            "chain" => LatticeShape::Chain,
            "rect" => {
                if w.rows * w.cols != w.n {
                    return Err(Error::InvalidSize(format!(
                        "rows*cols = {} does not match n = {}",
                        w.rows * w.cols,
                        w.n
                    )));
                }
                LatticeShape::Rect { rows: w.rows, cols: w.cols }
            }
            other => return Err(Error::Config(format!("unknown lattice shape '{other}'"))),
        };
        for &(i, j) in &w.edges {
            if i >= j || j >= w.n {
                return Err(Error::InvalidSize(format!("bad edge ({i},{j}) for n = {}", w.n)));
            }
        }
        Ok(Geometry { n_sites: w.n, shape, edges: w.edges })
    }
}

impl Geometry {
    /// Linear chain of `n` sites with edges (i, i+1).
    pub fn chain(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("chain needs at least 2 sites, got {n}")));
        }
        Ok(Geometry {
            n_sites: n,
            shape: LatticeShape::Chain,
            edges: (0..n - 1).map(|i| (i, i + 1)).collect(),
        })
    }

    /// Most-square r×c rectangle with r·c = n and r ≤ c: r is the largest
    /// divisor of n not exceeding √n, found by stepping down from ⌊√n⌋.
    pub fn rectangle(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!(
                "rectangle needs at least 2 sites, got {n}"
            )));
        }
        let mut r = (n as f64).sqrt().floor() as usize;
        while r > 1 && n % r != 0 {
            r -= 1;
        }
        let r = r.max(1);
        let c = n / r;
        let mut edges = Vec::with_capacity(r * (c - 1) + c * (r - 1));
        for row in 0..r {
            for col in 0..c {
                let site = row * c + col;
                if col + 1 < c {
                    edges.push((site, site + 1));
                }
                if row + 1 < r {
                    edges.push((site, site + c));
                }
            }
        }
        Ok(Geometry {
            n_sites: n,
            shape: LatticeShape::Rect { rows: r, cols: c },
            edges,
        })
    }

    /// Boustrophedon site ordering: row 0 left→right, row 1 right→left, and
    /// so on. Consecutive entries are always nearest neighbors. For chains
    /// this is the identity permutation.
    pub fn snake_order(&self) -> Vec<usize> {
        match self.shape {
            LatticeShape::Chain => (0..self.n_sites).collect(),
            LatticeShape::Rect { rows, cols } => {
                let mut order = Vec::with_capacity(self.n_sites);
                for row in 0..rows {
                    if row % 2 == 0 {
                        order.extend((0..cols).map(|col| row * cols + col));
                    } else {
                        order.extend((0..cols).rev().map(|col| row * cols + col));
                    }
                }
                order
            }
        }
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.contains(&(a, b))
    }
}
