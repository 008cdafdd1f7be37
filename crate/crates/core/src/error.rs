use std::path::PathBuf;

use crate::image::Shape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {stage}: expected {expected}, got {actual}")]
    ShapeMismatch {
        stage: String,
        expected: Shape,
        actual: Shape,
    },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("{family} has no closed-form {which} proximal map; {hint}")]
    UnsupportedProx {
        family: &'static str,
        which: &'static str,
        hint: &'static str,
    },

    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("invalid functional: {0}")]
    InvalidFunctional(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("block {block} has zero operator norm")]
    DegenerateBlock { block: usize },

    #[error("run diverged at gamma = {gamma:e} (objective {objective:e} at epoch {epoch})")]
    Divergence {
        gamma: f64,
        objective: f64,
        epoch: f64,
    },

    #[error("every gamma diverged: {0}")]
    AllDiverged(String),

    #[error("saddle input is not a fixed point (residual {residual:e})")]
    NotASaddle { residual: f64 },

    #[error("dense materialization needs {entries} entries, above the limit of {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
