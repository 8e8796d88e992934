use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grammar: {}", .0.join("; "))]
    InvalidGrammar(Vec<String>),

    #[error("grammar is not in Chomsky normal form: {0}")]
    NotCnf(String),

    #[error("unknown terminal id {token} at position {position}")]
    UnknownTerminal { token: usize, position: usize },

    #[error("no parse: sentence is not in the language of the grammar")]
    NoParse,

    #[error("sampling exceeded the maximum derivation depth of {0}")]
    DepthExceeded(usize),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("sentence {0} is empty")]
    EmptySentence(usize),

    #[error("sentences not in the language of the grammar: {0:?}")]
    OutOfLanguage(Vec<usize>),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid probability matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid sentence: {0}")]
    InvalidSentence(String),

    #[error("no grammatical sentence fits the probability matrix")]
    NoGrammaticalParse,

    #[error("unmapped pair <{verb}, {target}> at frame {frame}")]
    UnmappedPair {
        verb: String,
        target: String,
        frame: u64,
    },

    #[error("duplicate frame index {0}")]
    DuplicateFrame(u64),

    #[error("unknown token {token:?} on line {line}")]
    UnknownToken { token: String, line: usize },

    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("{}: {cause}", path.display())]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }
}
