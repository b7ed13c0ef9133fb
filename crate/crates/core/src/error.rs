use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no records")]
    NoRecords { path: PathBuf },

    #[error("{path}: line {line}: {message}")]
    MalformedRow { path: PathBuf, line: u64, message: String },

    #[error("panel {panel_id}: timestamp {timestamp} does not increase (previous {previous})")]
    NonMonotonicTimestamps {
        panel_id: String,
        previous: i64,
        timestamp: i64,
    },

    #[error("panel {panel_id}: current {value} A at t={timestamp} is below the -0.1 A sensor floor")]
    NegativeCurrent {
        panel_id: String,
        timestamp: i64,
        value: f64,
    },

    #[error("panel {panel_id}: gap of {len} samples starting at t={start_time} exceeds the limit of {max_gap}")]
    GapTooLong {
        panel_id: String,
        start_time: i64,
        len: usize,
        max_gap: usize,
    },

    #[error("panel {panel_id}: missing samples at the series boundary cannot be interpolated")]
    UnboundedGap { panel_id: String },

    #[error("panels have no common time extent")]
    EmptyIntersection,

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid fleet: {0}")]
    InvalidFleet(String),

    #[error("fleet is not aligned to a shared grid")]
    NotGridAligned,

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("panel {panel_id}: zero variance, cannot normalize")]
    ZeroVariance { panel_id: String },

    #[error("empty input sequence")]
    EmptyInput,

    #[error("band radius {radius} cannot align lengths {len_x} and {len_y}")]
    InfeasibleBand { radius: usize, len_x: usize, len_y: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("need at least {needed} panels, got {actual}")]
    TooFewPanels { needed: usize, actual: usize },

    #[error("empty member set")]
    EmptyMembers,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("k = {k} exceeds fleet size {n}")]
    TooManyClusters { k: usize, n: usize },

    #[error("healthy/abnormal labeling requires k = 2, got k = {0}")]
    LabelingRequiresTwoClusters(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
