use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {quantity} during integration (value {value})")]
    NonFinite { quantity: String, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("activation {0} outside [0, 1]")]
    ActivationOutOfRange(f64),

    #[error("no NOSC codebook found for C={c}, N={len}, n={ones}, K={max_overlap} within {attempts} draws")]
    NoscInfeasible {
        c: usize,
        len: usize,
        ones: usize,
        max_overlap: usize,
        attempts: u64,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}:{line}: expected {expected} values, found {found}")]
    RowLength {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: value {value} outside [0, 1]")]
    ValueOutOfRange {
        path: PathBuf,
        line: usize,
        value: f64,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("input length {found} does not match layer size {expected}")]
    InputLength { expected: usize, found: usize },

    #[error("empty measurement window [{t0}, {t1}) ms")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("class {0} has no patterns to learn from")]
    NoPatterns(usize),

    #[error("class {0}: mean AVI pattern has zero norm, class left unlearned")]
    ZeroNormPattern(usize),

    #[error("class {0} already learned and re-learning is disabled")]
    AlreadyLearned(usize),

    #[error("class index {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },

    #[error("pattern length {found} does not match N_av = {expected}")]
    PatternLength { expected: usize, found: usize },

    #[error("no learned class among prediction candidates")]
    NoLearnedCandidate,

    #[error("test set has no samples for learned class {0}")]
    EmptyTestClass(usize),

    #[error("report needs patterns for at least {needed} learning steps, has {found}")]
    NotEnoughSteps { needed: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Returns `value` unchanged if finite, otherwise an error naming `quantity`.
pub(crate) fn ensure_finite(quantity: impl FnOnce() -> String, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            quantity: quantity(),
            value,
        })
    }
}
