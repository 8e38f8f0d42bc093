use thiserror::Error;

pub type Result<T> = std::result::Result<T, HecvlError>;

/// Hierarchy level a batch or loss belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Clip,
    Phase,
    Video,
    /// Single shared embedding space (all levels pooled).
    Single,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Clip => "clip",
            Level::Phase => "phase",
            Level::Video => "video",
            Level::Single => "single",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum HecvlError {
    #[error("shape mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    Shape {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("degenerate embedding: row {row} has near-zero norm")]
    DegenerateEmbedding { row: usize },

    #[error("empty aggregation: cannot mean-pool zero rows")]
    EmptyAggregation,

    #[error("empty segment: no frames to sample")]
    EmptySegment,

    #[error("token id {id} out of vocabulary (size {vocab})")]
    Vocabulary { id: usize, vocab: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("non-finite gradient at batch {batch} (level {level}, loss {loss})")]
    NonFiniteGradient { batch: u64, level: Level, loss: f64 },

    #[error("insufficient data at {level} level: requested {requested}, available {available}")]
    InsufficientData {
        level: Level,
        requested: usize,
        available: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported schema version {found:?}")]
    Version { found: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("class {class} present in split but has no prompt")]
    Coverage { class: usize },

    #[error("incompatible artifacts: {0}")]
    Compatibility(String),

    #[error("gradient check failed for {loss}: max relative error {error:.3e}")]
    GradCheck { loss: String, error: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
