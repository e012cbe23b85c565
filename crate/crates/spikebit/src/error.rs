//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        context: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{context}: tensor data length {got} does not match shape product {want}")]
    BadLength {
        context: &'static str,
        got: usize,
        want: usize,
    },

    #[error("spike train contains a value outside {{0,1}} at flat index {0}")]
    NotBinary(usize),

    #[error("empty tensor passed to {0}")]
    EmptyTensor(&'static str),

    #[error("invalid layer spec: {0}")]
    InvalidLayer(String),

    #[error("invalid network spec: {0}")]
    InvalidNetwork(String),

    #[error("event out of range: {0}")]
    EventOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss at layer {layer}, timestep {timestep}")]
    NonFiniteLoss { layer: usize, timestep: usize },

    #[error("training diverged at epoch {epoch}, step {step} (see attached trace)")]
    Diverged {
        epoch: usize,
        step: usize,
        trace: Vec<crate::train::TraceRow>,
    },

    #[error("quantized value {value} does not fit {bits}-bit two's complement")]
    ValueOutOfRange { value: i64, bits: u8 },

    #[error("sparse stream error at bit {bit_offset}: {reason}")]
    SparseDecode { bit_offset: usize, reason: String },

    #[error("no valid mapping found: {0}")]
    NoValidMapping(String),

    #[error("invalid mapping: {0}")]
    InvalidMapping(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Wrap an error with the pipeline stage it came from.
    pub fn stage(stage: &'static str, source: Error) -> Error {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
