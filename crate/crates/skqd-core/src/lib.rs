//! Classical simulation and analysis toolkit for sample-based Krylov quantum
//! diagonalization (SKQD) on spin-½ XXZ Heisenberg models.
//!
//! The pipeline mirrors what a quantum device would do: prepare an initial
//! state, generate Krylov states by (Trotterized) time evolution, measure
//! bitstrings, and diagonalize the Hamiltonian projected onto the span of the
//! sampled bitstrings. Exact diagonalization — full-space and restricted to
//! fixed-magnetization sectors — serves as the reference oracle, and sparsity
//! diagnostics (inverse participation ratio, coverage profiles) explain where
//! the sampled-subspace approach works well.

pub mod analysis;
pub mod bits;
pub mod config;
pub mod eigen;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod lattice;
pub mod sampling;
pub mod skqd;
pub mod sparse;
pub mod state;
pub mod states;
pub mod sweep;

pub use error::{Error, Result};
