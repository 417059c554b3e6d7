//! Sparse storage and linear solvers.

mod solve;
mod sparse;

pub use solve::{bicgstab, pcg, solve, spd_check, BlockJacobi, KrylovOutcome, SolveReport, SolverMethod, SolverOptions, SpdReport};
pub use sparse::{dot, norm2, BlockBuilder, SparseMatrix};
