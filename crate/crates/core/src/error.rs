//! Crate-wide error type.

use thiserror::Error;

use crate::features::FeatureKind;

#[derive(Debug, Error)]
pub enum Error {
    /// An 18x18 patch window centered at the keypoint would leave the grid.
    #[error("patch window at (t={time_index}, x={downtrack_index}) exceeds the {t_len}x{x_len} grid")]
    MarginViolation {
        time_index: usize,
        downtrack_index: usize,
        t_len: usize,
        x_len: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed file contents (bad magic, version, or truncated payload).
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    /// A sampler was asked for more indices than the margin-respecting span holds.
    #[error("range error: {0}")]
    Range(String),
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("feature kind mismatch: expected {expected:?}, got {got:?}")]
    KindMismatch {
        expected: FeatureKind,
        got: FeatureKind,
    },
    /// A training policy produced zero patches for one of the classes.
    #[error("a training class produced zero patches")]
    EmptyClass,
    /// No decision statistics were available to aggregate.
    #[error("no decision statistics to aggregate")]
    EmptyInput,
    #[error("labels contain only one class")]
    DegenerateLabels,
}

pub type Result<T> = std::result::Result<T, Error>;
