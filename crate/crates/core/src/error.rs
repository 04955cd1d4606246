use std::io;

use thiserror::Error;

/// Errors raised while reading or validating input data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("user {user:?} has {count} positives, at least {required} are needed to split")]
    TooFewPositives {
        user: String,
        count: usize,
        required: usize,
    },
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
}

/// Contract violations when scoring or ranking with a model.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("feature dimension {found} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operation requires a {expected} model, got {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("pairwise difference needs two distinct items, got {0} twice")]
    SameItem(usize),
    #[error("cannot rank an empty candidate set")]
    EmptyCandidates,
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
}

/// Failures decoding a binary checkpoint.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown model kind byte {0}")]
    UnknownKind(u8),
    #[error("checkpoint truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("checkpoint checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("checkpoint payload is invalid: {0}")]
    Invalid(String),
}

/// Errors raised by triple sampling and the fit loop.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no user has both a training positive and an unobserved item")]
    UnsatisfiableSampling,
    #[error("training diverged at iteration {iteration}: non-finite value in {block}")]
    Diverged {
        iteration: usize,
        block: &'static str,
    },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Errors raised by evaluation and reporting.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no test pairs selected")]
    EmptySelection,
    #[error("no selected user has an unobserved item to compare against")]
    NoComparableUsers,
    #[error("improvement report needs a {0} entry")]
    MissingModel(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}
