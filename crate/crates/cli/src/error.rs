use sidewinder::metrics::MetricsError;
use sidewinder::model::ModelError;
use sidewinder::sim::SimError;
use sidewinder::sysid::{IdentifyError, PpoError};
use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or inconsistent inputs.
    #[error("configuration error: {0}")]
    Config(String),
    /// A rollout diverged.
    #[error("simulation error: {0}")]
    Simulation(String),
    /// Training produced non-finite values.
    #[error("training error: {0}")]
    Training(String),
    /// Writing an output failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::Training(_) => 4,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::BlowUp { .. } | SimError::Dynamics(_) => CliError::Simulation(e.to_string()),
            SimError::Io { .. } => CliError::Io(e.to_string()),
            SimError::Model(_) | SimError::Config(_) | SimError::Format { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<IdentifyError> for CliError {
    fn from(e: IdentifyError) -> Self {
        match e {
            IdentifyError::Ppo(PpoError::Config(_)) | IdentifyError::Model(_) | IdentifyError::Config(_) => {
                CliError::Config(e.to_string())
            }
            IdentifyError::Ppo(_) => CliError::Training(e.to_string()),
        }
    }
}
