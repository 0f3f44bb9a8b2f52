use std::path::PathBuf;

use cmr_core::algebra::AlgebraError;
use cmr_core::bounds::BoundsError;
use cmr_core::mbcr::MbcrError;
use cmr_core::rlnc::RlncError;
use cmr_core::secret::SecretError;
use cmr_core::zigzag::ZigzagError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Params(String),
    #[error("missing data: {0}")]
    Missing(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("algebraic failure: {0}")]
    Algebraic(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Params(_) => 2,
            CliError::Missing(_) => 3,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            CliError::Format(_) | CliError::Io { .. } => 4,
            CliError::Algebraic(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        CliError::Algebraic(e.to_string())
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Params(e.to_string())
    }
}

impl From<ZigzagError> for CliError {
    fn from(e: ZigzagError) -> Self {
        let msg = e.to_string();
        match e {
            ZigzagError::InvalidParams(_)
            | ZigzagError::NodeOutOfRange { .. }
            | ZigzagError::UnsupportedPattern(_) => CliError::Params(msg),
            ZigzagError::LengthMismatch { .. } => CliError::Format(msg),
            ZigzagError::MissingHelper(_) | ZigzagError::MissingSymbol { .. } => {
                CliError::Missing(msg)
            }
            ZigzagError::RetriesExhausted { .. }
            | ZigzagError::Unsolvable(_)
            | ZigzagError::Internal(_) => CliError::Algebraic(msg),
        }
    }
}

impl From<MbcrError> for CliError {
    fn from(e: MbcrError) -> Self {
        let msg = e.to_string();
        match e {
            MbcrError::InvalidParams(_)
            | MbcrError::FieldTooSmall { .. }
            | MbcrError::NotDisjoint(_)
            | MbcrError::WrongHelperCount { .. }
            | MbcrError::NodeOutOfRange { .. } => CliError::Params(msg),
            MbcrError::LengthMismatch { .. } => CliError::Format(msg),
            MbcrError::MissingNode(_) => CliError::Missing(msg),
            MbcrError::Corrupted { .. } | MbcrError::Internal(_) => CliError::Algebraic(msg),
        }
    }
}

impl From<RlncError> for CliError {
    fn from(e: RlncError) -> Self {
        let msg = e.to_string();
        match e {
            RlncError::FieldTooSmall { .. } => CliError::Algebraic(msg),
            _ => CliError::Params(msg),
        }
    }
}

impl From<SecretError> for CliError {
    fn from(e: SecretError) -> Self {
        let msg = e.to_string();
        match e {
            SecretError::Zigzag(inner) => inner.into(),
            SecretError::Mbcr(inner) => inner.into(),
            SecretError::Bounds(inner) => inner.into(),
            SecretError::TooFewShares { .. } | SecretError::MissingShare(_) => {
                CliError::Missing(msg)
            }
            SecretError::LengthMismatch { .. } => CliError::Format(msg),
            SecretError::InvalidParams(_)
            | SecretError::ShareOutOfRange { .. }
            | SecretError::DuplicateShare(_)
            | SecretError::BudgetExceeded { .. } => CliError::Params(msg),
        }
    }
}
