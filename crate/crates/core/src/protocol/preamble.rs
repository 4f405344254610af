//! Fixed pseudo-noise preambles and the stage 3 payload.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ProtocolConfig;
use super::signal::IQFrame;

const SYNC_SEED: u64 = 0x5EED_0630;
const CHANEST_SEED: u64 = 0x5EED_0200;
const PAYLOAD_SEED: u64 = 0x5EED_B95C;

/// Fraction of the sample rate the preambles occupy, centred on DC.
pub const PREAMBLE_OCCUPANCY: f64 = 0.5;

/// Unit-power sequence whose DFT is flat with random phase on the occupied bins
/// and zero elsewhere. Computed by a direct inverse DFT so the result does not
/// depend on FFT planning.
pub fn bandlimited_sequence(len: usize, occupancy: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_bins = ((occupancy * len as f64) / 2.0).floor() as i64;
    let bins: Vec<(i64, Complex64)> = (-half_bins..=half_bins)
        .map(|k| (k, Complex64::from_polar(1.0, rng.random::<f64>() * TAU)))
        .collect();
    let mut x: Vec<Complex64> = (0..len)
        .map(|n| {
            bins.iter()
                .map(|&(k, c)| {
                    let idx = (k * n as i64).rem_euclid(len as i64) as f64;
                    c * Complex64::from_polar(1.0, TAU * idx / len as f64)
                })
                .sum()
        })
        .collect();
    let p = x.iter().map(|s| s.norm_sqr()).sum::<f64>() / len as f64;
    let scale = 1.0 / p.sqrt();
    for s in x.iter_mut() {
        *s *= scale;
    }
    x
}

/// Two identical halves of a band-limited pseudo-noise sequence.
pub fn gen_sync_preamble(cfg: &ProtocolConfig) -> IQFrame {
    let half = bandlimited_sequence(cfg.sync_len / 2, PREAMBLE_OCCUPANCY, SYNC_SEED);
    let mut samples = half.clone();
    samples.extend_from_slice(&half);
    IQFrame::new(samples, cfg.sample_rate_hz)
}

pub fn gen_chanest_preamble(cfg: &ProtocolConfig) -> IQFrame {
    IQFrame::new(
        bandlimited_sequence(cfg.chanest_len, PREAMBLE_OCCUPANCY, CHANEST_SEED),
        cfg.sample_rate_hz,
    )
}

/// Unit-energy root-raised-cosine taps spanning `span` symbols.
pub fn rrc_taps(samples_per_symbol: usize, rolloff: f64, span: usize) -> Vec<f64> {
    let sps = samples_per_symbol as f64;
    let n = span * samples_per_symbol + 1;
    let mid = (n / 2) as f64;
    let b = rolloff;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 - mid) / sps;
            if t == 0.0 {
                1.0 - b + 4.0 * b / PI
            } else if b > 0.0 && ((4.0 * b * t).abs() - 1.0).abs() < 1e-12 {
                let a = PI / (4.0 * b);
                b / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
            } else {
                let num = (PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos();
                num / (PI * t * (1.0 - (4.0 * b * t).powi(2)))
            }
        })
        .collect();
    let e = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    for h in taps.iter_mut() {
        *h /= e;
    }
    taps
}

/// RRC-shaped BPSK with unit mean power.
pub fn bpsk_waveform(cfg: &ProtocolConfig) -> Vec<Complex64> {
    let sps = cfg.samples_per_symbol;
    let n_sym = cfg.bf_bpsk_len / sps;
    let mut rng = ChaCha8Rng::seed_from_u64(PAYLOAD_SEED);
    let mut up = vec![0.0; cfg.bf_bpsk_len];
    for k in 0..n_sym {
        up[k * sps] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    let taps = rrc_taps(sps, cfg.rrc_rolloff, cfg.rrc_span_symbols);
    let delay = taps.len() / 2;
    let mut out: Vec<f64> = (0..up.len())
        .map(|n| {
            let mut acc = 0.0;
            for (j, h) in taps.iter().enumerate() {
                let idx = n as isize + delay as isize - j as isize;
                if idx >= 0 && (idx as usize) < up.len() {
                    acc += up[idx as usize] * h;
                }
            }
            acc
        })
        .collect();
    let p = out.iter().map(|v| v * v).sum::<f64>() / out.len() as f64;
    let scale = 1.0 / p.sqrt();
    for v in out.iter_mut() {
        *v *= scale;
    }
    out.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
}

/// Baseband payload radio `radio` sends in stage 3, before its weight is applied:
/// its solo segment (if enabled), then the shared unmodulated and BPSK segments.
pub fn gen_payload(cfg: &ProtocolConfig, radio: usize, n_radios: usize) -> IQFrame {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut samples = Vec::with_capacity(cfg.payload_len(n_radios));
    if cfg.individual_segments {
        for k in 0..n_radios {
            let v = if k == radio { one } else { zero };
            samples.extend(std::iter::repeat_n(v, cfg.individual_len));
        }
    }
    samples.extend(std::iter::repeat_n(one, cfg.bf_ones_len));
    samples.extend(bpsk_waveform(cfg));
    IQFrame::new(samples, cfg.sample_rate_hz).tagged(radio, 3)
}
