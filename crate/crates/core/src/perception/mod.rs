//! Histogram likelihood perception over location classes.

mod classes;
mod crossval;
mod io;
mod model;

use thiserror::Error;

pub use classes::LocationClassSet;
pub use crossval::{
    monte_carlo_cross_validate, percentile, ClassSummary, LabeledRuns, PerceptionReport, Sample,
};
pub use io::{read_model, write_model};
pub use model::{
    classify_ml, log_likelihood, train_histogram_model, Classification, HistogramConfig,
    LikelihoodModel, TIE_TOLERANCE,
};

use crate::series::SeriesError;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class {0} has no training series")]
    MissingClass(usize),
    #[error("series shape {found:?} does not match model shape {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("cross validation needs at least 2 runs, got {0}")]
    InsufficientRuns(usize),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Series(#[from] SeriesError),
}
