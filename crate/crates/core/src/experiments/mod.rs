//! Seeded Monte Carlo sweeps producing mean/std gain tables.

pub mod config;
pub mod output;
pub mod scenarios;
pub mod sweep;

pub use config::{DxSetting, KSetting, PatternPreset, PatternRegion, Scenario, ScenarioConfig, Strategy};
pub use output::{write_result, Format, Metadata, Written};
pub use scenarios::{dump_protocol_trial, gain_trial, run_scenario, GainPoint};
pub use sweep::{mean_std, Derived, Runner, SweepResult, SweepRow};

use crate::beamforming::BeamformingError;
use crate::channel::ChannelError;
use crate::geometry::GeometryError;
use crate::protocol::ProtocolError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("strategy `{strategy}` is not available in scenario `{scenario}`")]
    UnsupportedStrategy { scenario: Scenario, strategy: Strategy },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl ExperimentError {
    /// Whether the error came from reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, ExperimentError::Io(_) | ExperimentError::Csv(_))
            || matches!(self, ExperimentError::Protocol(ProtocolError::Io(_)))
    }
}
