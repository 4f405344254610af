//! Signal-level model of the three-stage synchronisation protocol.

pub mod config;
pub mod estimate;
pub mod iq;
pub mod preamble;
pub mod round;
pub mod signal;

pub use config::{ProtocolConfig, SubsampleMethod};
pub use estimate::{estimate_cfo, estimate_channel_phase, estimate_toa, CfoEstimate, CfoTracker, ToaEstimate};
pub use iq::{read_iq, DirSink, IqSink};
pub use preamble::{gen_chanest_preamble, gen_payload, gen_sync_preamble, rrc_taps};
pub use round::{
    run_protocol_round, FeedbackNode, LinkModel, ProtocolEngine, RadioReport, RoundOutcome, RoundSetup,
    StageFailure,
};
pub use signal::{add_noise, apply_impairments, fractional_delay, rotate, IQFrame, Impairment};

use crate::beamforming::BeamformingError;
use crate::channel::ChannelError;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error("stage {stage} needs {needed_s:.6} s but only {available_s:.6} s are allotted")]
    StageOverflow {
        stage: u8,
        needed_s: f64,
        available_s: f64,
    },
    #[error("frame of {len} samples is shorter than the {needed} samples required")]
    FrameTooShort { len: usize, needed: usize },
    #[error("preamble not detected (metric {metric:.3} below {threshold:.3})")]
    NotDetected { metric: f64, threshold: f64 },
    #[error("expected {expected} destination channels, got {got}")]
    ChannelCount { expected: usize, got: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error("IQ dump: {0}")]
    Io(#[from] std::io::Error),
}
