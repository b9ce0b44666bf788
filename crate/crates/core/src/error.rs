use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::statesim::MAX_QUBITS)]
    QubitCount(usize),

    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("controlled gate has control == target ({0})")]
    ControlIsTarget(usize),

    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("circuit has unbound angle source {0}")]
    Unbound(String),

    #[error("malformed echo circuit: {0}")]
    MalformedEcho(String),

    #[error("degenerate kernel matrix (Frobenius norm is zero)")]
    DegenerateKernel,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("labels contain a single class; at least two are required")]
    SingleClass,

    #[error("unknown dataset `{0}` (supported: hayes-roth, heart, seeds, wine)")]
    UnknownDataset(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("checksum mismatch for {path}: expected sha256 {expected}, got {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("network error fetching {url}: {msg} (retryable)")]
    Network { url: String, msg: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub fn dim(what: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            what,
            expected,
            actual,
        }
    }

    /// Process exit code for the command-line runner: 2 usage/config,
    /// 3 I/O or network, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Network { .. } | Error::Io { .. } | Error::Checksum { .. } => 3,
            Error::DegenerateKernel | Error::SingleClass => 4,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
