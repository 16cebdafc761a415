//! Sparse and dense linear algebra used by the thermal solver.
//!
//! The sparse path is a left-looking LU with threshold partial pivoting. Under a
//! flow-topological column order the upwind system is (block) triangular, so the
//! factorization is nearly fill-free and one factor serves both `A x = b` and
//! `Aᵀ x = b`. The dense path exists as an independent reference solver.

mod dense;
mod lu;
mod sparse;

pub use dense::DenseMatrix;
pub use lu::SparseLu;
pub use sparse::{CscMatrix, TripletBuilder};
