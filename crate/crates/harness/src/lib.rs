//! Experiment runner for the corralling learners: TOML configs, multi-seed runs with
//! switching-regret traces, a periodic-restart baseline and CSV aggregation.

pub mod config;
pub mod restart;
pub mod run;
pub mod stats;
pub mod trace;

pub use config::{Algorithm, ExperimentConfig};
pub use run::{run, run_seed, simulate, RunOptions, RunOutput};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io(_) => 1,
        }
    }
}

impl From<corral_core::Error> for HarnessError {
    fn from(e: corral_core::Error) -> Self {
        match e {
            corral_core::Error::Config(m) => HarnessError::Config(m),
            other => HarnessError::Numerical(other.to_string()),
        }
    }
}
