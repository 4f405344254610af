use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// How the TOA estimator refines the integer correlation peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsampleMethod {
    Quadratic,
    Interpolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub sample_rate_hz: f64,
    /// Sync preamble length; two identical halves.
    pub sync_len: usize,
    pub chanest_len: usize,
    pub stage1_s: f64,
    pub stage2_s: f64,
    pub stage3_s: f64,
    /// Length of each radio's solo segment in stage 3.
    pub individual_len: usize,
    pub individual_segments: bool,
    pub bf_ones_len: usize,
    pub bf_bpsk_len: usize,
    pub samples_per_symbol: usize,
    pub rrc_rolloff: f64,
    pub rrc_span_symbols: usize,
    /// Oscillator offsets are drawn uniformly from ±this.
    pub cfo_range_hz: f64,
    /// Start-of-stage timing offsets are drawn uniformly from ±this.
    pub max_timing_offset_samples: f64,
    /// How far either side of its slot a received chanest preamble is searched for.
    pub toa_search_samples: usize,
    /// Sync preambles each radio has heard, including the current one.
    pub sync_repetitions: usize,
    pub kalman_process_var_hz2: f64,
    pub kalman_measurement_var_hz2: f64,
    pub cfo_detect_threshold: f64,
    pub toa_detect_threshold: f64,
    pub subsample: SubsampleMethod,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1e6,
            sync_len: 630,
            chanest_len: 200,
            stage1_s: 0.06,
            stage2_s: 0.02,
            stage3_s: 0.03,
            individual_len: 4000,
            individual_segments: true,
            bf_ones_len: 4000,
            bf_bpsk_len: 10_000,
            samples_per_symbol: 2,
            rrc_rolloff: 0.25,
            rrc_span_symbols: 8,
            cfo_range_hz: 1000.0,
            max_timing_offset_samples: 20.0,
            toa_search_samples: 8,
            sync_repetitions: 10,
            kalman_process_var_hz2: 0.01,
            kalman_measurement_var_hz2: 25.0,
            cfo_detect_threshold: 0.3,
            toa_detect_threshold: 0.2,
            subsample: SubsampleMethod::Interpolated,
        }
    }
}

impl ProtocolConfig {
    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |what: &str| Err(ProtocolError::InvalidConfig(what.to_string()));
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive");
        }
        if self.sync_len < 4 || self.sync_len % 2 != 0 {
            return bad("sync_len must be even and at least 4");
        }
        if self.chanest_len == 0 {
            return bad("chanest_len must be positive");
        }
        if self.sync_repetitions == 0 {
            return bad("sync_repetitions must be at least 1");
        }
        if self.samples_per_symbol == 0 || self.bf_bpsk_len % self.samples_per_symbol != 0 {
            return bad("bf_bpsk_len must be a multiple of samples_per_symbol");
        }
        if !(0.0..=1.0).contains(&self.rrc_rolloff) {
            return bad("rrc_rolloff must lie in [0, 1]");
        }
        if !(self.max_timing_offset_samples >= 0.0 && self.cfo_range_hz >= 0.0) {
            return bad("offset ranges must be non-negative");
        }
        if !(self.kalman_measurement_var_hz2 > 0.0 && self.kalman_process_var_hz2 >= 0.0) {
            return bad("Kalman variances must be positive");
        }
        let ts = self.sample_period();
        if self.stage1_s < self.sync_len as f64 * ts {
            return bad("stage 1 is shorter than one sync preamble");
        }
        Ok(())
    }

    /// Chanest slot length when `n_slots` radios share stage 2.
    pub fn slot_s(&self, n_slots: usize) -> f64 {
        self.stage2_s / n_slots.max(1) as f64
    }

    /// Offset of slot `k` from the start of the sync preamble, seconds.
    pub fn slot_start_s(&self, k: usize, n_slots: usize) -> f64 {
        self.stage1_s + k as f64 * self.slot_s(n_slots)
    }

    pub fn payload_len(&self, n_radios: usize) -> usize {
        let solo = if self.individual_segments {
            n_radios * self.individual_len
        } else {
            0
        };
        solo + self.bf_ones_len + self.bf_bpsk_len
    }

    /// Offset of the middle of the beamformed unmodulated segment, seconds.
    pub fn beamform_time_s(&self, n_radios: usize) -> f64 {
        let solo = if self.individual_segments {
            n_radios * self.individual_len
        } else {
            0
        };
        let ts = self.sample_period();
        self.stage1_s + self.stage2_s + (solo as f64 + self.bf_ones_len as f64 / 2.0) * ts
    }

    /// Checks that every slot holds a chanest preamble and stage 3 holds the payload.
    pub fn check_layout(&self, n_radios: usize, n_slots: usize) -> Result<(), ProtocolError> {
        let ts = self.sample_period();
        let need_slot = (self.chanest_len + 2 * self.toa_search_samples) as f64 * ts;
        if self.slot_s(n_slots) < need_slot {
            return Err(ProtocolError::StageOverflow {
                stage: 2,
                needed_s: need_slot * n_slots as f64,
                available_s: self.stage2_s,
            });
        }
        let need_payload = self.payload_len(n_radios) as f64 * ts;
        if need_payload > self.stage3_s + 1e-12 {
            return Err(ProtocolError::StageOverflow {
                stage: 3,
                needed_s: need_payload,
                available_s: self.stage3_s,
            });
        }
        Ok(())
    }
}
