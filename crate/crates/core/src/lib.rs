//! Singularity-corrected discretizations of variable-order,
//! variable-diffusivity fractional diffusion operators, tile low-rank
//! compression of the resulting dense matrices, and a left-looking
//! tile low-rank Cholesky solver.

pub mod assembly;
pub mod cholesky;
pub mod clustering;
pub mod error;
pub mod fields;
pub mod grid;
pub mod linalg;
pub mod par;
pub mod quadrature;
pub mod special;
pub mod study;
pub mod tlr;

pub use assembly::{assemble, assemble_dense, AssemblyOptions, DiscreteOperator, SparseCorrection};
pub use clustering::{order_points, TilePartition};
pub use error::{Error, Result};
pub use fields::{Formulation, Point, ProblemSpec, ScalarField, WindowRadius, WindowSpec};
pub use grid::Grid;
pub use linalg::DenseMatrix;
pub use par::Execution;
