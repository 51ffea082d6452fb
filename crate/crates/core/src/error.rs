use std::path::PathBuf;

use thiserror::Error;

use crate::languages::Symbol;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("language parameter n must be at least 1, got {0}")]
    InvalidN(usize),

    #[error("symbol {symbol} is not in the input vocabulary of {language}")]
    NotInInputVocabulary { symbol: Symbol, language: String },

    #[error("symbol set {set} is not a subset of the output vocabulary of {language}")]
    NotInOutputVocabulary { set: String, language: String },

    #[error("target symbol set must not be empty")]
    EmptyTargetSet,

    #[error("invalid length window [{lo}, {hi}]: need 1 <= lo <= hi")]
    InvalidWindow { lo: usize, hi: usize },

    #[error(
        "beta-binomial parameters must be positive and finite, got alpha={alpha}, beta={beta}"
    )]
    InvalidShape { alpha: f64, beta: f64 },

    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss in trial {trial}, epoch {epoch}, sample {sample} (n = {n})")]
    NonFinite {
        trial: usize,
        epoch: usize,
        sample: usize,
        n: usize,
    },

    #[error("malformed checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}
