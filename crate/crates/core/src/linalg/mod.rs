//! Sparse storage, direct solves and saddle-point plumbing.

pub mod dense;
pub mod lu;
pub mod saddle;
pub mod sparse;

pub use dense::DenseMatrix;
pub use lu::{lu_solve, relative_residual, LuSolver, RESIDUAL_TOLERANCE};
pub use saddle::{eliminate, Constraints, SaddleLayout, SaddleSystem};
pub use sparse::SparseMatrix;
