//! Dataset loading, experiment drivers and CSV output.

mod dataset;
mod experiment;
mod output;
mod synth;

use thiserror::Error;

use crate::key::ParseKeyError;
use crate::lla::LlaError;

pub use dataset::{load_dataset, DatasetSpec, Delimiter, ValueKind};
pub use experiment::{
    prepare_predictions, run_config, run_learning_curve, run_robustness, run_scaling,
    run_standalone, run_table, ExperimentResult, RunOutcome, Structure, WitnessInput,
};
pub use output::{emit_csv, write_csv, CSV_HEADER};
pub use synth::{generate, run_synthetic, SynthKind, SynthParams, SynthStream};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseKeyError,
    },
    #[error("{path}:{line}: {message}")]
    Data {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Lla(#[from] LlaError),
}

impl HarnessError {
    /// Process exit code: 2 for configuration errors, 3 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
