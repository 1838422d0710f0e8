use std::io;

use thiserror::Error;

/// `(rows, cols)` of a matrix operand.
pub type Shape = (usize, usize);

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A computation that needs a strictly non-zero row normalizer hit one.
    #[error("{op}: denominator of row {row} is exactly zero")]
    ZeroDenominator { op: &'static str, row: usize },

    #[error(transparent)]
    Weights(#[from] WeightFileError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: Shape, right: Shape) -> Self {
        Error::Shape { op, left, right }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

/// Failures specific to decoding a persisted weight file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightFileError {
    #[error("not a weight file (bad magic)")]
    BadMagic,

    #[error("unsupported weight file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("weight file truncated: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("tensor index mismatch for `{name}`: header config implies {expected:?}, file has {found:?}")]
    ShapeIndex {
        name: String,
        expected: Shape,
        found: Shape,
    },

    #[error("tensor index mismatch at entry {position}: expected `{expected}`, found `{found}`")]
    TensorName {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("tensor index lists {found} tensors, header config implies {expected}")]
    TensorCount { expected: usize, found: usize },

    #[error("{0} trailing bytes after tensor data")]
    TrailingBytes(usize),

    #[error("malformed header: {0}")]
    Header(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
