//! Finite-field scalars, dense matrices, polynomials and bipartite matching.

pub mod field;
pub mod matching;
pub mod matrix;
pub mod poly;

use thiserror::Error;

pub use field::{field_arith, Field, FieldElement, FieldKind, FieldOp, FieldSpec};
pub use matching::{max_matching, FlowNetwork};
pub use matrix::{mat_rank, mat_solve, Dependency, Matrix};
pub use poly::{lagrange_interpolate, poly_eval};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("value {value} out of range for field of order {order}")]
    OutOfRange { value: u32, order: u32 },
    #[error("field mismatch: {left} vs {right}")]
    FieldMismatch { left: FieldSpec, right: FieldSpec },
    #[error("division by zero")]
    DivisionByZero,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular system: rank {rank} of {expected} (deficiency {})", expected - rank)]
    Singular { rank: usize, expected: usize },
    #[error("inconsistent system: right-hand side outside the column space (rank {rank})")]
    Inconsistent { rank: usize },
    #[error("duplicate interpolation point x = {0}")]
    DuplicatePoint(u32),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("points are inconsistent with degree bound {0}")]
    InconsistentPoints(usize),
}
