//! Beamforming weights for the guided, location-based, ideal-feedback and
//! random strategies, the normalized combining gain and far-field patterns.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{los_gain, propagation_phase, CarrierConfig, ChannelError};
use crate::geometry::{Placement, Position3};

#[derive(Debug, Error, PartialEq)]
pub enum BeamformingError {
    #[error("gain of an empty array is undefined")]
    EmptyArray,
    #[error("{weights} weights for {channels} channels")]
    LengthMismatch { weights: usize, channels: usize },
    #[error("guide feedback covers {got} of {expected} followers")]
    IncompleteFeedback { expected: usize, got: usize },
    #[error("pattern radius {radius} m is inside the far-field threshold {threshold} m")]
    NearField { radius: f64, threshold: f64 },
    #[error("angle grid must be non-empty and strictly increasing")]
    InvalidAngleGrid,
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Unit-magnitude per-radio weights, stored as phases in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    phases: Vec<f64>,
}

impl WeightVector {
    pub fn from_phases(phases: Vec<f64>) -> Self {
        Self { phases }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn complex(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }

    /// Adds `alpha` to every phase.
    pub fn rotated(&self, alpha: f64) -> Self {
        Self::from_phases(self.phases.iter().map(|p| p + alpha).collect())
    }
}

/// How the guide's transmit phase relates to the phase it measured on receive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuideModel {
    pub reciprocal: bool,
    pub phase_offset: f64,
}

impl GuideModel {
    pub fn reciprocal() -> Self {
        Self {
            reciprocal: true,
            phase_offset: 0.0,
        }
    }

    /// A guide whose transmit chain carries a fresh uniform phase offset.
    pub fn non_reciprocal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            reciprocal: false,
            phase_offset: rng.random::<f64>() * TAU,
        }
    }
}

/// Normalized combining gain `|Σ w_i h_i| / Σ |w_i||h_i|`, in `[0, 1]`.
pub fn gain(weights: &WeightVector, channels: &[Complex64]) -> Result<f64, BeamformingError> {
    if weights.len() != channels.len() {
        return Err(BeamformingError::LengthMismatch {
            weights: weights.len(),
            channels: channels.len(),
        });
    }
    if channels.is_empty() {
        return Err(BeamformingError::EmptyArray);
    }
    let mut coherent = Complex64::new(0.0, 0.0);
    let mut total = 0.0;
    for (&theta, h) in weights.phases.iter().zip(channels) {
        coherent += h * Complex64::from_polar(1.0, theta);
        total += h.norm();
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok((coherent.norm() / total).min(1.0))
}

/// LOS phases of the guide-to-follower channels, one per follower.
pub fn guide_channel_phases(
    placement: &Placement,
    carrier: &CarrierConfig,
) -> Result<Vec<f64>, BeamformingError> {
    placement
        .followers
        .iter()
        .map(|f| {
            if f.distance(&placement.guide) == 0.0 {
                return Err(ChannelError::DegenerateGeometry.into());
            }
            Ok(propagation_phase(f.distance(&placement.guide), carrier.wavelength))
        })
        .collect()
}

/// Followers conjugate the guide's channel phase; the guide transmits at its model offset.
pub fn weights_guided(
    placement: &Placement,
    guide_phases: &[f64],
    guide: &GuideModel,
) -> Result<WeightVector, BeamformingError> {
    let expected = placement.followers.len();
    if guide_phases.len() < expected {
        return Err(BeamformingError::IncompleteFeedback {
            expected,
            got: guide_phases.len(),
        });
    }
    let phases = std::iter::once(guide.phase_offset)
        .chain(guide_phases[..expected].iter().map(|g| -g))
        .collect();
    Ok(WeightVector::from_phases(phases))
}

/// Location-based weights from believed positions.
///
/// Each radio pre-compensates its believed along-axis path length to a
/// reference plane `lx` meters ahead of the guide, `lx - p̂.x`, which is what
/// aligns the wavefront toward +x when the believed positions are exact.
pub fn weights_location(believed: &Placement, carrier: &CarrierConfig, lx: f64) -> WeightVector {
    let k = TAU / carrier.wavelength;
    let phases = believed
        .radios()
        .map(|p| {
            let along = lx - p.x;
            (-k * along).rem_euclid(TAU)
        })
        .collect();
    WeightVector::from_phases(phases)
}

pub fn weights_random<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<WeightVector, BeamformingError> {
    if n == 0 {
        return Err(BeamformingError::EmptyArray);
    }
    Ok(WeightVector::from_phases(
        (0..n).map(|_| rng.random::<f64>() * TAU).collect(),
    ))
}

/// Exact conjugate phasing of known destination channels.
pub fn weights_feedback_ideal(channels: &[Complex64]) -> WeightVector {
    WeightVector::from_phases(channels.iter().map(|h| -h.arg()).collect())
}

/// Combining gain versus far-field azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beampattern {
    pub angles: Vec<f64>,
    pub gains: Vec<f64>,
    pub radius: f64,
}

/// Far-field threshold used by [`beampattern`]: 100 array extents.
pub fn far_field_threshold(placement: &Placement) -> f64 {
    100.0 * placement.extent()
}

/// Evaluates the pattern of fixed weights on pure-LOS probes at `radius` around the guide.
pub fn beampattern(
    placement: &Placement,
    weights: &WeightVector,
    carrier: &CarrierConfig,
    radius: f64,
    angles: &[f64],
) -> Result<Beampattern, BeamformingError> {
    if angles.is_empty() || angles.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BeamformingError::InvalidAngleGrid);
    }
    let threshold = far_field_threshold(placement);
    if radius < threshold {
        return Err(BeamformingError::NearField { radius, threshold });
    }
    let radios: Vec<Position3> = placement.radios().copied().collect();
    let gains = angles
        .iter()
        .map(|&phi| {
            let probe = placement.guide + Position3::on_circle(radius, phi);
            let channels = radios
                .iter()
                .map(|p| los_gain(p, &probe, carrier))
                .collect::<Result<Vec<_>, _>>()?;
            gain(weights, &channels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Beampattern {
        angles: angles.to_vec(),
        gains,
        radius,
    })
}

/// Uniform angle grid in radians from `start_deg` to `end_deg` inclusive.
pub fn angle_grid_deg(start_deg: f64, end_deg: f64, step_deg: f64) -> Vec<f64> {
    let n = ((end_deg - start_deg) / step_deg).round() as usize;
    (0..=n)
        .map(|i| (start_deg + i as f64 * step_deg).to_radians())
        .collect()
}

/// Width in radians of the half-power lobe around `center`.
///
/// Walks outward from the grid point nearest `center` until the gain falls
/// below `peak / sqrt(2)` on each side, interpolating the crossing linearly.
/// Returns `None` when a side never crosses.
pub fn beamwidth_3db(angles: &[f64], gains: &[f64], center: f64) -> Option<f64> {
    if angles.len() != gains.len() || angles.is_empty() {
        return None;
    }
    let c = angles
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))?
        .0;
    let level = gains[c] * std::f64::consts::FRAC_1_SQRT_2;
    let crossing = |i: usize, j: usize| {
        let t = (gains[i] - level) / (gains[i] - gains[j]);
        angles[i] + t * (angles[j] - angles[i])
    };
    let mut right = None;
    for j in c + 1..angles.len() {
        if gains[j] < level {
            right = Some(crossing(j - 1, j));
            break;
        }
    }
    let mut left = None;
    for j in (0..c).rev() {
        if gains[j] < level {
            left = Some(crossing(j + 1, j));
            break;
        }
    }
    Some(right? - left?)
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}
