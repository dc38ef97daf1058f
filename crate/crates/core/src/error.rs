use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("duplicate player id: {0}")]
    DuplicatePlayerId(String),
    #[error("schema violation in {entity}: {message}")]
    SchemaViolation { entity: String, message: String },
    #[error("parse error in {path} at line {line}: {message}")]
    ParseError {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("series {0} has no valid rows")]
    EmptySeries(String),

    #[error("video too short: {duration_s}s < clip length {clip_len_s}s")]
    VideoTooShort { duration_s: f64, clip_len_s: f64 },
    #[error("no frames in window [{start_s}, {end_s})")]
    EmptyWindow { start_s: f64, end_s: f64 },
    #[error("player {0} has no clip with frames in every channel")]
    NoValidClips(String),
    #[error("invalid sampling policy: {0}")]
    InvalidPolicy(String),

    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("bin edges missing for {0}")]
    EdgesMissing(String),
    #[error("too few points: {points} rows for {components} components")]
    TooFewPoints { points: usize, components: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("player {player} has no value for feature dimension {dim}")]
    MissingFeature { player: String, dim: usize },
    #[error("unknown game: {0}")]
    UnknownGame(String),

    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("evaluation labels contain a single class")]
    SingleClassEval,
    #[error("non-finite input value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },

    #[error("too many candidate channels: {0} (limit 20)")]
    TooManyChannels(usize),
    #[error("score sets are not aligned on the same players")]
    MisalignedPlayers,
    #[error("invalid fusion weights: {0}")]
    BadWeights(String),

    #[error("too few games: {games} games for {folds} folds")]
    TooFewGames { games: usize, folds: usize },
    #[error("leakage detected: {0}")]
    Leakage(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fold {fold} failed after {completed} completed folds: {source}")]
    FoldFailed {
        fold: usize,
        completed: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Error::SchemaViolation {
            entity: entity.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (manifest, files, config)
    /// rather than by a failure while computing.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MissingFile(_)
                | Error::DuplicatePlayerId(_)
                | Error::SchemaViolation { .. }
                | Error::ParseError { .. }
                | Error::EmptySeries(_)
                | Error::InvalidPolicy(_)
                | Error::InvalidConfig(_)
                | Error::TooManyChannels(_)
                | Error::TooFewGames { .. }
                | Error::Serde(_)
        )
    }
}
