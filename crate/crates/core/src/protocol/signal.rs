//! Complex baseband frames and the impairments a frame picks up in flight.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::complex_gaussian;

/// Half-width in samples of the fractional-delay kernel.
pub const KERNEL_HALF_WIDTH: usize = 32;

/// Where a frame was captured or generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameOrigin {
    pub radio: usize,
    pub stage: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IQFrame {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub origin: Option<FrameOrigin>,
}

impl IQFrame {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
            origin: None,
        }
    }

    pub fn tagged(mut self, radio: usize, stage: u8) -> Self {
        self.origin = Some(FrameOrigin { radio, stage });
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Copy with `before` zeros in front and `after` zeros behind.
    pub fn padded(&self, before: usize, after: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let mut samples = vec![zero; before];
        samples.extend_from_slice(&self.samples);
        samples.resize(before + self.samples.len() + after, zero);
        Self {
            samples,
            sample_rate: self.sample_rate,
            origin: self.origin,
        }
    }
}

/// What the link does to a frame between transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impairment {
    /// Carrier frequency offset, Hz.
    pub cfo_hz: f64,
    /// Arrival delay, seconds. Fractional sample periods are allowed.
    pub timing_offset_s: f64,
    /// Channel phase, radians.
    pub phase_rad: f64,
    /// Channel magnitude.
    pub amplitude: f64,
    /// SNR against unit signal power in dB; `None` adds no noise.
    pub snr_db: Option<f64>,
}

impl Impairment {
    pub fn none() -> Self {
        Self {
            cfo_hz: 0.0,
            timing_offset_s: 0.0,
            phase_rad: 0.0,
            amplitude: 1.0,
            snr_db: None,
        }
    }
}

impl Default for Impairment {
    fn default() -> Self {
        Self::none()
    }
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let x = PI * t;
        x.sin() / x
    }
}

/// Blackman-windowed sinc with support `(-W, W)`.
pub fn interpolation_kernel(t: f64) -> f64 {
    let w = KERNEL_HALF_WIDTH as f64;
    if t.abs() >= w {
        return 0.0;
    }
    if t.fract() == 0.0 {
        return if t == 0.0 { 1.0 } else { 0.0 };
    }
    let x = (t + w) / (2.0 * w);
    let window = 0.42 - 0.5 * (TAU * x).cos() + 0.08 * (2.0 * TAU * x).cos();
    sinc(t) * window
}

/// Band-limited delay by `delay` samples; output has the input's length.
pub fn fractional_delay(samples: &[Complex64], delay: f64) -> Vec<Complex64> {
    let n = samples.len() as isize;
    if delay.fract() == 0.0 {
        let shift = delay as isize;
        return (0..n)
            .map(|i| {
                let j = i - shift;
                if (0..n).contains(&j) {
                    samples[j as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
    }
    // y[i] = Σ_j taps[j] x[i - whole - j], with the fractional part fixed per call.
    let w = KERNEL_HALF_WIDTH as isize;
    let whole = delay.floor() as isize;
    let mu = delay - delay.floor();
    let taps: Vec<f64> = (1 - w..=w).map(|j| interpolation_kernel(j as f64 - mu)).collect();
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, j) in taps.iter().zip(1 - w..=w) {
                let m = i - whole - j;
                if (0..n).contains(&m) {
                    acc += samples[m as usize] * *t;
                }
            }
            acc
        })
        .collect()
}

/// Multiplies by `exp(j (phase + 2π f n T_s))`.
pub fn rotate(samples: &mut [Complex64], cfo_hz: f64, phase: f64, sample_rate: f64) {
    let step = TAU * cfo_hz / sample_rate;
    for (n, s) in samples.iter_mut().enumerate() {
        *s *= Complex64::from_polar(1.0, phase + step * n as f64);
    }
}

/// Adds CN(0, 10^(-snr/10)) noise.
pub fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], snr_db: f64, rng: &mut R) {
    let sigma = 10f64.powf(-snr_db / 20.0);
    for s in samples.iter_mut() {
        *s += complex_gaussian(rng) * sigma;
    }
}

/// Delay, then frequency offset and channel phase, then noise.
pub fn apply_impairments<R: Rng + ?Sized>(frame: &IQFrame, imp: &Impairment, rng: &mut R) -> IQFrame {
    let delay = imp.timing_offset_s * frame.sample_rate;
    let mut samples = if delay == 0.0 {
        frame.samples.clone()
    } else {
        fractional_delay(&frame.samples, delay)
    };
    if imp.amplitude != 1.0 {
        for s in samples.iter_mut() {
            *s *= imp.amplitude;
        }
    }
    if imp.cfo_hz != 0.0 || imp.phase_rad != 0.0 {
        rotate(&mut samples, imp.cfo_hz, imp.phase_rad, frame.sample_rate);
    }
    if let Some(snr) = imp.snr_db {
        add_noise(&mut samples, snr, rng);
    }
    IQFrame {
        samples,
        sample_rate: frame.sample_rate,
        origin: frame.origin,
    }
}
