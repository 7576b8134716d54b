use std::path::PathBuf;

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("symbol {symbol} is outside the alphabet (size {size})")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("symbol table mismatch: {0}")]
    SymbolTableMismatch(String),

    #[error("semiring mismatch: {left:?} vs {right:?}")]
    SemiringMismatch {
        left: crate::Semiring,
        right: crate::Semiring,
    },

    #[error("malformed FST text at line {line}: {msg}")]
    FstFormat { line: usize, msg: String },

    #[error("graph construction failed: {0}")]
    Construction(String),

    #[error("no pronunciation for word `{0}`")]
    MissingPronunciation(String),

    #[error("language model error: {0}")]
    Lm(String),

    #[error("ARPA parse error at line {line}: {msg}")]
    Arpa { line: usize, msg: String },

    #[error("out-of-vocabulary symbol `{0}`")]
    Oov(String),

    #[error("divergent epsilon closure through state {0}")]
    DivergentClosure(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        last_good: Box<crate::acoustic::ModelParams>,
    },

    #[error("malformed {what} data: {msg}")]
    Format { what: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by non-finite arithmetic rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Diverged { .. } | Error::DivergentClosure(_))
    }
}
