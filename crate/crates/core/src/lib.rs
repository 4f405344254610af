//! Simulation engine for guided distributed transmit beamforming: geometry,
//! channels, combining strategies, a signal-level protocol model, and the
//! parameter sweeps built on them.

pub mod beamforming;
pub mod channel;
pub mod experiments;
pub mod geometry;
pub mod protocol;
pub mod seed;
