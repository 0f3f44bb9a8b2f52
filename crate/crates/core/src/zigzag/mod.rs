//! The `(k + r, k)` zigzag MDS array code with centralized repair of up to
//! three systematic nodes.

mod code;
mod layout;
mod schedule;
mod verify;

use thiserror::Error;

use crate::algebra::AlgebraError;

pub use code::{k_subsets, BuildOptions, ZigzagCode};
pub use layout::ZigzagLayout;
pub use schedule::{Downloaded, RepairMethod, RepairSchedule, Stage};
pub use verify::{
    u_set, verify_schedule_counts, verify_solvability, CountReport, Deficiency, Solvability,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZigzagError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("node {node} out of range (limit {n})")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("unsupported failure pattern: {0}")]
    UnsupportedPattern(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("verification failed after {attempts} coefficient draws: {detail}")]
    RetriesExhausted { attempts: u32, detail: String },
    #[error("repair system is not solvable: {0}")]
    Unsolvable(String),
    #[error("no download from helper {0}")]
    MissingHelper(usize),
    #[error("row {row} of node {node} was not downloaded")]
    MissingSymbol { node: usize, row: usize },
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

impl ZigzagError {
    pub(crate) fn internal(e: AlgebraError) -> Self {
        Self::Internal(e.to_string())
    }
}
