use std::io;

use thiserror::Error;

/// Errors produced by `clab-core`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("embedding ({sample}, {aug}) has norm {norm:e}, below the 1e-12 floor")]
    ZeroNorm {
        sample: usize,
        aug: usize,
        norm: f64,
    },

    #[error("label {label} of sample {sample} is outside [0, {n_classes})")]
    InvalidLabel {
        sample: usize,
        label: i64,
        n_classes: usize,
    },

    #[error("labels are required for this operation")]
    MissingLabels,

    #[error("every sample belongs to one class; the negatives-only denominator is empty")]
    NoNegatives,

    #[error("degenerate task: {0}")]
    DegenerateTask(String),

    #[error("CDNV undefined: class means {i} and {j} coincide")]
    UndefinedCdnv { i: usize, j: usize },

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("class {class} has {have} samples, need at least {need}")]
    InsufficientSamples {
        class: usize,
        have: usize,
        need: usize,
    },

    #[error("a positive pair needs at least two augmentations per sample")]
    NoPositivePair,

    #[error("empty sampling pool: {0}")]
    EmptyPool(String),

    #[error("loss became non-finite at step {step} (last finite loss {last_loss})")]
    Divergence { step: usize, last_loss: f64 },

    #[error("bad magic bytes {found:?}, expected \"EMB1\"")]
    BadMagic { found: [u8; 4] },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("label section holds {found} bytes, expected {expected}")]
    LabelCountMismatch { expected: usize, found: usize },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
