use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("malformed token sequence: {0}")]
    MalformedTokens(String),

    #[error("invalid merge table: {0}")]
    MergeTable(String),

    #[error("double injection: source already starts with a length token")]
    DoubleInjection,

    #[error("empty source sentence at line {line}")]
    EmptySource { line: usize },

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("pair {index} needs {tokens} tokens, batch budget is {budget}")]
    PairExceedsBudget { index: usize, tokens: usize, budget: usize },

    #[error("embedding dimension must be even and positive, got {0}")]
    OddDimension(usize),

    #[error("invalid encoding spec: {0}")]
    EncodingSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("batch contains only padding")]
    AllPadding,

    #[error("invalid model config: {0}")]
    ModelConfig(String),

    #[error("length input mismatch: {0}")]
    LengthInput(String),

    #[error("training diverged at step {step}: loss is {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("incompatible base checkpoint: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("invalid decode control: {0}")]
    DecodeControl(String),

    #[error("length mismatch: {hyps} hypotheses vs {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,

    #[error("unsupported checkpoint version {found}, this reader understands version {expected}")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("malformed checkpoint record: {0}")]
    Malformed(String),
}
