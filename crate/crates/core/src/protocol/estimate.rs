//! Receiver-side estimators: CFO from the repeated sync halves, time of arrival
//! by correlation, channel phase, and the scalar Kalman CFO tracker.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::config::SubsampleMethod;
use super::signal::{interpolation_kernel, IQFrame, KERNEL_HALF_WIDTH};
use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoEstimate {
    pub cfo_hz: f64,
    /// Sample index where the best-matching window starts.
    pub start: usize,
    /// Normalised half-correlation, in [0, 1].
    pub metric: f64,
}

/// Samples dropped at both ends of each half so the interpolation transients
/// at the burst edges do not bias the phase.
fn edge_trim(half: usize) -> usize {
    (KERNEL_HALF_WIDTH + 2).min(half / 4)
}

/// Schmidl–Cox style estimate using two repeated halves of `half` samples each.
pub fn estimate_cfo(rx: &IQFrame, half: usize, threshold: f64) -> Result<CfoEstimate, ProtocolError> {
    let r = &rx.samples;
    if half == 0 || r.len() < 2 * half {
        return Err(ProtocolError::FrameTooShort {
            len: r.len(),
            needed: 2 * half,
        });
    }
    let trim = edge_trim(half);
    let mut best: Option<(f64, usize, Complex64)> = None;
    for d in 0..=r.len() - 2 * half {
        let mut p = Complex64::new(0.0, 0.0);
        let mut e = 0.0;
        for n in d + trim..d + half - trim {
            let a = r[n];
            let b = r[n + half];
            p += b * a.conj();
            e += 0.5 * (a.norm_sqr() + b.norm_sqr());
        }
        let m = if e > 0.0 { p.norm() / e } else { 0.0 };
        if best.is_none_or(|(bm, _, _)| m > bm) {
            best = Some((m, d, p));
        }
    }
    let (metric, start, p) = best.expect("at least one window");
    if !(metric >= threshold) {
        return Err(ProtocolError::NotDetected { metric, threshold });
    }
    Ok(CfoEstimate {
        cfo_hz: p.arg() * rx.sample_rate / (TAU * half as f64),
        start,
        metric,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToaEstimate {
    /// Where the template starts inside the received frame, in samples.
    pub lag: f64,
    /// Normalised correlation at the integer peak, in [0, 1].
    pub metric: f64,
}

impl ToaEstimate {
    pub fn seconds(&self, sample_rate: f64) -> f64 {
        self.lag / sample_rate
    }
}

fn correlate_at(rx: &[Complex64], t: &[Complex64], k: isize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, tv) in t.iter().enumerate() {
        let i = k + n as isize;
        if i >= 0 && (i as usize) < rx.len() {
            acc += rx[i as usize] * tv.conj();
        }
    }
    acc
}

/// Correlation peak search with sub-sample refinement.
pub fn estimate_toa(
    rx: &IQFrame,
    template: &IQFrame,
    method: SubsampleMethod,
    threshold: f64,
) -> Result<ToaEstimate, ProtocolError> {
    let r = &rx.samples;
    let t = &template.samples;
    if t.is_empty() || r.len() < t.len() {
        return Err(ProtocolError::FrameTooShort {
            len: r.len(),
            needed: t.len(),
        });
    }
    let t_energy = t.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let last = r.len() - t.len();
    let mut corr = Vec::with_capacity(last + 1);
    for k in 0..=last {
        corr.push(correlate_at(r, t, k as isize));
    }
    let k_star = (0..=last)
        .max_by(|&a, &b| corr[a].norm().total_cmp(&corr[b].norm()))
        .expect("non-empty");
    let window_energy = r[k_star..k_star + t.len()].iter().map(|v| v.norm_sqr()).sum::<f64>();
    let metric = if window_energy > 0.0 {
        corr[k_star].norm() / (t_energy * window_energy).sqrt()
    } else {
        0.0
    };
    if !(metric >= threshold) {
        return Err(ProtocolError::NotDetected { metric, threshold });
    }

    let lag = match method {
        SubsampleMethod::Quadratic => {
            if k_star == 0 || k_star == last {
                k_star as f64
            } else {
                let (a, b, c) = (
                    corr[k_star - 1].norm(),
                    corr[k_star].norm(),
                    corr[k_star + 1].norm(),
                );
                let denom = a - 2.0 * b + c;
                let delta = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
                k_star as f64 + delta.clamp(-0.5, 0.5)
            }
        }
        SubsampleMethod::Interpolated => {
            let w = KERNEL_HALF_WIDTH as isize + 2;
            let base = k_star as isize - w;
            let local: Vec<Complex64> = (0..=2 * w).map(|j| correlate_at(r, t, base + j)).collect();
            let mag = |tau: f64| -> f64 {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, c) in local.iter().enumerate() {
                    acc += c * interpolation_kernel(tau - (base + j as isize) as f64);
                }
                acc.norm()
            };
            golden_max(mag, k_star as f64 - 1.0, k_star as f64 + 1.0)
        }
    };
    Ok(ToaEstimate { lag, metric })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-6 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Phase of the correlation against an already aligned reference.
pub fn estimate_channel_phase(rx: &[Complex64], aligned: &[Complex64]) -> f64 {
    rx.iter()
        .zip(aligned)
        .map(|(r, t)| r * t.conj())
        .sum::<Complex64>()
        .arg()
}

/// Scalar Kalman filter for a slowly drifting CFO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoTracker {
    pub process_var: f64,
    pub measurement_var: f64,
    state: Option<(f64, f64)>,
}

impl CfoTracker {
    pub fn new(process_var: f64, measurement_var: f64) -> Self {
        Self {
            process_var,
            measurement_var,
            state: None,
        }
    }

    /// Folds in one measurement and returns the updated tracker.
    pub fn update(self, measurement: f64) -> Self {
        let state = match self.state {
            None => (measurement, self.measurement_var),
            Some((x, p)) => {
                let p = p + self.process_var;
                let k = p / (p + self.measurement_var);
                (x + k * (measurement - x), (1.0 - k) * p)
            }
        };
        Self {
            state: Some(state),
            ..self
        }
    }

    pub fn estimate(&self) -> Option<f64> {
        self.state.map(|s| s.0)
    }

    pub fn variance(&self) -> Option<f64> {
        self.state.map(|s| s.1)
    }
}
