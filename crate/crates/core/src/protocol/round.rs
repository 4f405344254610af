//! One signal-level round of the three-stage protocol.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ProtocolConfig;
use super::estimate::{estimate_cfo, estimate_channel_phase, estimate_toa, CfoTracker};
use super::iq::IqSink;
use super::preamble::{gen_chanest_preamble, gen_payload, gen_sync_preamble};
use super::signal::{apply_impairments, fractional_delay, rotate, IQFrame, Impairment};
use super::ProtocolError;
use crate::beamforming::{gain, wrap_phase, GuideModel, WeightVector};
use crate::channel::{los_gain, ricean_sample, CarrierConfig, KFactor, LinkBudget};
use crate::geometry::Placement;

/// Which node broadcasts sync and measures the chanest preambles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackNode {
    /// The guide; only followers take part in stages 1 and 2.
    Guide,
    /// The destination; every radio takes part.
    Destination,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkModel {
    /// Same SNR on every link in both directions, dB.
    FixedSnr(f64),
    /// SNR from distance through a link budget.
    Budget(LinkBudget),
}

#[derive(Debug, Clone)]
pub struct RoundSetup<'a> {
    /// True positions; the destination is used for the link budget.
    pub placement: &'a Placement,
    pub feedback: FeedbackNode,
    pub link: LinkModel,
    pub carrier: CarrierConfig,
    /// Radio-to-destination channels, guide first.
    pub destination_channels: &'a [Complex64],
    /// K-factor of the short guide-to-follower links.
    pub inter_radio_k: KFactor,
    pub guide: GuideModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub radio: usize,
    pub stage: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioReport {
    pub radio: usize,
    pub cfo_hz: f64,
    pub cfo_error_hz: f64,
    pub timing_error_samples: f64,
    /// Residual combining phase at the feedback node when the beam forms.
    pub phase_error_rad: f64,
    pub forward_snr_db: f64,
    pub reverse_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    /// Transmit phases of every radio, guide first.
    pub weights: WeightVector,
    pub gain_at_feedback: f64,
    pub gain_at_destination: f64,
    pub failures: Vec<StageFailure>,
    pub radios: Vec<RadioReport>,
}

impl RoundOutcome {
    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Holds the preambles so repeated rounds do not regenerate them.
#[derive(Debug, Clone)]
pub struct ProtocolEngine {
    cfg: ProtocolConfig,
    sync: IQFrame,
    chanest: IQFrame,
}

impl ProtocolEngine {
    pub fn new(cfg: ProtocolConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let sync = gen_sync_preamble(&cfg);
        let chanest = gen_chanest_preamble(&cfg);
        Ok(Self { cfg, sync, chanest })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    fn link_snr(&self, setup: &RoundSetup<'_>, radio: usize) -> (f64, f64) {
        match setup.link {
            LinkModel::FixedSnr(s) => (s, s),
            LinkModel::Budget(b) => {
                let p = setup.placement.radios().nth(radio).expect("radio index");
                let (node, fwd_power) = match setup.feedback {
                    FeedbackNode::Guide => (&setup.placement.guide, b.tx_power_dbm),
                    FeedbackNode::Destination => (&setup.placement.destination, b.dest_tx_power_dbm),
                };
                let d = p.distance(node);
                (
                    b.received_snr(d, fwd_power, 0.0),
                    b.received_snr(d, b.tx_power_dbm, 0.0),
                )
            }
        }
    }

    /// Runs stages 1-3 and reports the resulting gains.
    ///
    /// A failed detection does not abort the round: the radio keeps a zero
    /// correction for that stage and the failure is listed in the outcome.
    pub fn run<R: Rng + ?Sized>(
        &self,
        setup: &RoundSetup<'_>,
        rng: &mut R,
        mut sink: Option<&mut dyn IqSink>,
    ) -> Result<RoundOutcome, ProtocolError> {
        let cfg = &self.cfg;
        let n = setup.placement.n_radios();
        if setup.destination_channels.len() != n {
            return Err(ProtocolError::ChannelCount {
                expected: n,
                got: setup.destination_channels.len(),
            });
        }
        let participants: Vec<usize> = match setup.feedback {
            FeedbackNode::Guide => (1..n).collect(),
            FeedbackNode::Destination => (0..n).collect(),
        };
        if participants.is_empty() {
            return Err(ProtocolError::InvalidConfig("no radios take part".into()));
        }
        let n_slots = participants.len();
        if let Err(e) = cfg.check_layout(n, n_slots) {
            match e {
                ProtocolError::StageOverflow { stage: 3, .. } => {
                    log::debug!("{e}; stage 3 runs past its nominal end")
                }
                other => return Err(other),
            }
        }

        let ts = cfg.sample_period();
        let half = cfg.sync_len / 2;
        let sync_pad = cfg.max_timing_offset_samples.ceil() as usize + 8;
        let sync_frame = self.sync.padded(sync_pad, sync_pad);
        let slot_pad = cfg.toa_search_samples;
        let chanest_frame = self.chanest.padded(slot_pad, slot_pad);
        let chanest_ref = self.chanest.padded(0, 2 * slot_pad);
        let t_bf = cfg.beamform_time_s(n);
        let positions: Vec<_> = setup.placement.radios().copied().collect();

        let mut failures = Vec::new();
        let mut reports = Vec::with_capacity(n_slots);
        let mut thetas = Vec::with_capacity(n_slots);
        let mut at_feedback = Vec::with_capacity(n_slots);
        let mut at_destination = Vec::with_capacity(n_slots);

        for (slot, &radio) in participants.iter().enumerate() {
            let link = match setup.feedback {
                FeedbackNode::Guide => {
                    let los = los_gain(&positions[radio], &setup.placement.guide, &setup.carrier)?;
                    ricean_sample(los, setup.inter_radio_k, rng).h
                }
                FeedbackNode::Destination => setup.destination_channels[radio],
            };
            let (snr_fwd, snr_rev) = self.link_snr(setup, radio);
            let cfo = (rng.random::<f64>() * 2.0 - 1.0) * cfg.cfo_range_hz;
            let dt = (rng.random::<f64>() * 2.0 - 1.0) * cfg.max_timing_offset_samples;
            let osc = rng.random::<f64>() * TAU;

            // Stage 1: every sync repetition feeds the tracker; the last one also sets timing.
            let mut tracker = CfoTracker::new(cfg.kalman_process_var_hz2, cfg.kalman_measurement_var_hz2);
            let mut last = None;
            for rep in 0..cfg.sync_repetitions {
                let imp = Impairment {
                    cfo_hz: cfo,
                    timing_offset_s: dt * ts,
                    phase_rad: rng.random::<f64>() * TAU,
                    amplitude: link.norm(),
                    snr_db: Some(snr_fwd),
                };
                let rx = apply_impairments(&sync_frame, &imp, rng);
                if let Ok(est) = estimate_cfo(&rx, half, cfg.cfo_detect_threshold) {
                    tracker = tracker.update(est.cfo_hz);
                }
                if rep + 1 == cfg.sync_repetitions {
                    last = Some(rx);
                }
            }
            let mut rx_sync = last.expect("at least one repetition").tagged(radio, 1);
            let cfo_hat = match tracker.estimate() {
                Some(f) => f,
                None => {
                    failures.push(StageFailure { radio, stage: 1 });
                    0.0
                }
            };
            if let Some(s) = sink.as_deref_mut() {
                s.write_frame(radio, 1, &rx_sync)?;
            }
            rotate(&mut rx_sync.samples, -cfo_hat, 0.0, cfg.sample_rate_hz);
            let dt_hat = match estimate_toa(&rx_sync, &self.sync, cfg.subsample, cfg.toa_detect_threshold) {
                Ok(est) => est.lag - sync_pad as f64,
                Err(_) => {
                    if !failures.contains(&StageFailure { radio, stage: 1 }) {
                        failures.push(StageFailure { radio, stage: 1 });
                    }
                    0.0
                }
            };
            let eps = cfo_hat - cfo;
            let tau = dt_hat - dt;

            // Stage 2: the radio answers in its slot; residual CFO keeps rotating the phase.
            let t_slot = cfg.slot_start_s(slot, n_slots);
            let imp = Impairment {
                cfo_hz: eps,
                timing_offset_s: tau * ts,
                phase_rad: link.arg() + osc + TAU * eps * t_slot,
                amplitude: link.norm(),
                snr_db: Some(snr_rev),
            };
            let rx_chanest = apply_impairments(&chanest_frame, &imp, rng).tagged(radio, 2);
            if let Some(s) = sink.as_deref_mut() {
                s.write_frame(radio, 2, &rx_chanest)?;
            }
            let phi_hat =
                match estimate_toa(&rx_chanest, &self.chanest, cfg.subsample, cfg.toa_detect_threshold) {
                    Ok(est) => {
                        let aligned = fractional_delay(&chanest_ref.samples, est.lag);
                        estimate_channel_phase(&rx_chanest.samples, &aligned)
                    }
                    Err(_) => {
                        failures.push(StageFailure { radio, stage: 2 });
                        0.0
                    }
                };
            let theta = wrap_phase(-phi_hat);

            // Stage 3: the phase the radio actually contributes when the beam forms.
            let drift = Complex64::from_polar(1.0, osc + TAU * eps * t_bf);
            let eff_fb = link * drift;
            thetas.push(theta);
            at_feedback.push(eff_fb);
            at_destination.push(setup.destination_channels[radio] * drift);
            reports.push(RadioReport {
                radio,
                cfo_hz: cfo,
                cfo_error_hz: eps,
                timing_error_samples: tau,
                phase_error_rad: wrap_phase(theta + eff_fb.arg()),
                forward_snr_db: snr_fwd,
                reverse_snr_db: snr_rev,
            });
        }

        let fb_weights = WeightVector::from_phases(thetas.clone());
        let gain_at_feedback = gain(&fb_weights, &at_feedback)?;
        let (weights, gain_at_destination) = match setup.feedback {
            FeedbackNode::Destination => (fb_weights, gain_at_feedback),
            FeedbackNode::Guide => {
                let mut phases = vec![setup.guide.phase_offset];
                phases.extend_from_slice(&thetas);
                let mut channels = vec![setup.destination_channels[0]];
                channels.extend_from_slice(&at_destination);
                let w = WeightVector::from_phases(phases);
                let g = gain(&w, &channels)?;
                (w, g)
            }
        };

        if let Some(s) = sink.as_deref_mut() {
            for (radio, &theta) in weights.phases().iter().enumerate() {
                let mut payload = gen_payload(cfg, radio, n);
                rotate(&mut payload.samples, 0.0, theta, cfg.sample_rate_hz);
                s.write_frame(radio, 3, &payload)?;
            }
        }

        Ok(RoundOutcome {
            weights,
            gain_at_feedback,
            gain_at_destination,
            failures,
            radios: reports,
        })
    }
}

/// Convenience wrapper that builds a one-off engine.
pub fn run_protocol_round<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    setup: &RoundSetup<'_>,
    rng: &mut R,
) -> Result<RoundOutcome, ProtocolError> {
    ProtocolEngine::new(cfg.clone())?.run(setup, rng, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::geometry::{sample_placement, DeploymentSpec, Position3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene(n: usize, seed: u64) -> (Placement, Vec<Complex64>, CarrierConfig) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let carrier = CarrierConfig::new(915e6).unwrap();
        let spec = DeploymentSpec::new(0.55, 0.1, 0.32, n - 1).unwrap();
        let p = sample_placement(&spec, Position3::planar(1000.0, 0.0), &mut rng);
        let h = ChannelRealization::draw(p.radios(), &p.destination, &carrier, KFactor::PureLos, &mut rng)
            .unwrap()
            .gains();
        (p, h, carrier)
    }

    fn setup<'a>(p: &'a Placement, h: &'a [Complex64], c: CarrierConfig, fb: FeedbackNode, snr: f64) -> RoundSetup<'a> {
        RoundSetup {
            placement: p,
            feedback: fb,
            link: LinkModel::FixedSnr(snr),
            carrier: c,
            destination_channels: h,
            inter_radio_k: KFactor::PureLos,
            guide: GuideModel::reciprocal(),
        }
    }

    #[test]
    fn high_snr_round_is_coherent() {
        let (p, h, c) = scene(4, 3);
        let engine = ProtocolEngine::new(ProtocolConfig::default()).unwrap();
        for fb in [FeedbackNode::Guide, FeedbackNode::Destination] {
            let out = engine
                .run(&setup(&p, &h, c, fb, 35.0), &mut ChaCha8Rng::seed_from_u64(9), None)
                .unwrap();
            assert!(!out.failed());
            assert!(out.gain_at_feedback > 0.98, "{fb:?}: {}", out.gain_at_feedback);
            assert_eq!(out.weights.len(), 4);
        }
    }

    #[test]
    fn destination_round_matches_feedback_gain() {
        let (p, h, c) = scene(4, 5);
        let engine = ProtocolEngine::new(ProtocolConfig::default()).unwrap();
        let out = engine
            .run(&setup(&p, &h, c, FeedbackNode::Destination, 20.0), &mut ChaCha8Rng::seed_from_u64(1), None)
            .unwrap();
        assert_eq!(out.gain_at_destination, out.gain_at_feedback);
        assert_eq!(out.radios.len(), 4);
    }

    #[test]
    fn rounds_are_deterministic() {
        let (p, h, c) = scene(4, 2);
        let engine = ProtocolEngine::new(ProtocolConfig::default()).unwrap();
        let s = setup(&p, &h, c, FeedbackNode::Guide, 10.0);
        let a = engine.run(&s, &mut ChaCha8Rng::seed_from_u64(4), None).unwrap();
        let b = engine.run(&s, &mut ChaCha8Rng::seed_from_u64(4), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deep_noise_reports_failures() {
        let (p, h, c) = scene(4, 2);
        let engine = ProtocolEngine::new(ProtocolConfig::default()).unwrap();
        let out = engine
            .run(&setup(&p, &h, c, FeedbackNode::Guide, -30.0), &mut ChaCha8Rng::seed_from_u64(4), None)
            .unwrap();
        assert!(out.failed());
        assert!((0.0..=1.0).contains(&out.gain_at_feedback));
    }
}
