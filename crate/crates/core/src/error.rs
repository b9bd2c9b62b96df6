use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {found} precedes previous timestamp {previous}")]
    Ordering {
        line: usize,
        previous: u64,
        found: u64,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("invalid workload: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum RegisterError {
    #[error("register size must be at least 1 cell")]
    ZeroCells,
    #[error("register size {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("target probability {0} is outside (0, 1)")]
    BadTarget(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("packet at {found} us arrived after {previous} us")]
    OutOfOrder { previous: u64, found: u64 },
    #[error("window length must be positive, got {0}")]
    BadWindow(f64),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("buffer too short: need {needed} bytes, have {available}")]
    ShortBuffer { needed: usize, available: usize },
    #[error("unexpected ethertype {0:#06x}")]
    BadEthertype(u16),
    #[error("bad report magic {0:#06x}")]
    BadMagic(u16),
    #[error("flow count {0} is not one of 1, 5, 10")]
    InvalidCount(u8),
    #[error("{0} trailing bytes after last record")]
    TrailingBytes(usize),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least {needed} training tuples, got {got}")]
    TooFewTuples { needed: usize, got: usize },
    #[error("neighbor count {0} must be odd and positive")]
    BadK(usize),
    #[error("training data lacks the {0} class")]
    SingleClass(crate::ClassLabel),
    #[error("training tuple {0} has no label")]
    Unlabeled(usize),
    #[error("model is not fitted")]
    Unfitted,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}
