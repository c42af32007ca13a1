use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error("non-square matrix: {rows} rows for {cols} ids")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix must cover at least {min} stimuli, got {got}")]
    TooFewStimuli { min: usize, got: usize },

    #[error("asymmetric matrix: |v[{i}][{j}] - v[{j}][{i}]| = {diff:e} exceeds {tol:e}")]
    Asymmetric {
        i: usize,
        j: usize,
        diff: f64,
        tol: f64,
    },

    #[error("negative entry {value} at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize, value: f64 },

    #[error("nonzero diagonal: entry ({i}, {i}) = {value}")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("non-finite value at ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("empty id")]
    EmptyId,

    #[error("similarity {value} at ({i}, {j}) outside [0, 1] for one-minus conversion")]
    SimilarityOutOfRange { i: usize, j: usize, value: f64 },

    #[error("ragged feature width: item `{item}` has {got} features, expected {expected}")]
    RaggedFeatures {
        item: String,
        expected: usize,
        got: usize,
    },

    #[error("no items")]
    NoItems,

    #[error("unknown group_id `{0}`")]
    UnknownGroup(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("id mismatch: {0}")]
    IdMismatch(String),

    #[error("degenerate dissimilarities: all entries are zero")]
    DegenerateDissimilarities,

    #[error("eigen-decomposition failed: {0}")]
    EigenFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("crop fraction {0} yields a zero-size window")]
    EmptyCrop(f64),

    #[error("image error: {0}")]
    Image(String),

    #[error("distribution baseline needs at least 2 training targets, got {0}")]
    TooFewTargets(usize),

    #[error("non-finite features in item {0}")]
    NonFiniteFeatures(usize),

    #[error("insufficient anchors: need at least {needed} for {dims} dimensions, got {got}")]
    InsufficientAnchors {
        needed: usize,
        dims: usize,
        got: usize,
    },

    #[error("rank-deficient anchor set: rank {rank} < {dims}")]
    RankDeficientAnchors { rank: usize, dims: usize },

    #[error("negative distance {0}")]
    NegativeDistance(f64),

    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("empty input")]
    EmptyInput,

    #[error("leave-one-out needs at least 2 groups, got {0}")]
    SingleGroup(usize),

    #[error("scatter plot needs dims >= 2, got {0}")]
    ScatterDims(usize),

    #[error("missing input: {0}")]
    MissingInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::MalformedCsv(e.to_string())
    }
}
