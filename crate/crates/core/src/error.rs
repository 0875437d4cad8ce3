use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed transpose infix in file name `{file}`: {reason}")]
    InfixParse { file: String, reason: String },

    #[error("polyphonic input in `{file}`: {detail}")]
    PolyphonicInput { file: String, detail: String },

    #[error("MIDI parse error in `{file}`: {detail}")]
    MidiParse { file: String, detail: String },

    #[error("more than one track contains note events in `{file}`")]
    MultipleNoteTracks { file: String },

    #[error("unsupported time signature {num}/{den} in `{file}` (corpus is 4/4 only)")]
    UnsupportedTimeSignature { file: String, num: u8, den: u8 },

    #[error("empty training corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("symbol outside the model alphabet: {detail}")]
    SymbolOutsideAlphabet { detail: String },

    #[error("blank symbols must form a contiguous context prefix")]
    MalformedContext,

    #[error("integer overflow computing {what}")]
    Overflow { what: String },

    #[error("contour undefined: {detail}")]
    ContourUndefined { detail: String },

    #[error("search exhausted: no phrase of the requested length is reachable from the training data")]
    SearchExhausted,

    #[error("model file schema error at `{path}`: {detail}")]
    Schema { path: String, detail: String },

    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
