//! Experiment protocols, configuration, dataset persistence and reports.
//!
//! Output layout under `--out`:
//!
//! ```text
//! dataset/<experiment>/manifest.toml
//! dataset/<experiment>/config.toml
//! dataset/<experiment>/series/run_RR/loc_CCC.csv
//! dataset/<experiment>/reference.csv               (calibrated only)
//! dataset/<experiment>/calibrated/run_RR/loc_CCC.csv
//! models/<experiment>.vbhm
//! reports/<experiment>/perception.tsv
//! reports/<experiment>/perception_points.tsv
//! reports/<experiment>/sweep.tsv
//! reports/<experiment>/trajectories/trial_NNN.tsv
//! report.toml
//! timings.toml
//! ```

mod config;
mod dataset;
mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ActiveRunConfig, Experiment, PerceptionConfig, ProtocolConfig, RunConfig};
pub use dataset::{
    collect, collect_seed, dataset_dir, load_dataset, Dataset, Manifest, ManifestEntry, ORIENTATION,
};
pub use report::{
    active_run, evaluate, replicate_all, ActiveReport, ActiveRun, ClassRow, ExperimentReport,
    ExperimentRun, ExperimentSection, PerceptionSummary, Replication, SeedLedger, Timings,
};

use crate::active::ActiveError;
use crate::perception::PerceptionError;
use crate::pipeline::PipelineError;
use crate::series::SeriesError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for configuration errors, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Writes `bytes` to `path`, creating parent directories.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}
