//! Narrowband Ricean channels, the distance-dependent K-factor model and the
//! link budget used for signalling SNR.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Position3;

pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("carrier frequency must be positive, got {0} Hz")]
    InvalidCarrier(f64),
    #[error("transmitter and receiver coincide; LOS phase undefined")]
    DegenerateGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    pub fc: f64,
    pub wavelength: f64,
}

impl CarrierConfig {
    pub fn new(fc: f64) -> Result<Self, ChannelError> {
        if !(fc > 0.0) || !fc.is_finite() {
            return Err(ChannelError::InvalidCarrier(fc));
        }
        Ok(Self {
            fc,
            wavelength: SPEED_OF_LIGHT / fc,
        })
    }
}

/// `2π d / λ` reduced to `[0, 2π)`.
///
/// The fractional wavelength count is taken before scaling by 2π so that
/// kilometre paths keep sub-microradian resolution.
pub fn propagation_phase(distance: f64, wavelength: f64) -> f64 {
    let cycles = distance / wavelength;
    2.0 * PI * (cycles - cycles.floor())
}

/// Unit-magnitude geometric LOS gain `exp(j 2π d / λ)`.
pub fn los_gain(
    tx: &Position3,
    rx: &Position3,
    carrier: &CarrierConfig,
) -> Result<Complex64, ChannelError> {
    let d = tx.distance(rx);
    if d == 0.0 {
        return Err(ChannelError::DegenerateGeometry);
    }
    Ok(Complex64::from_polar(1.0, propagation_phase(d, carrier.wavelength)))
}

/// Ricean K-factor, either a finite value in dB or the pure-LOS limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KFactor {
    PureLos,
    Db(f64),
}

impl KFactor {
    pub fn linear(&self) -> f64 {
        match self {
            KFactor::PureLos => f64::INFINITY,
            KFactor::Db(db) => 10f64.powf(db / 10.0),
        }
    }

    /// `(sqrt(K/(K+1)), sqrt(1/(K+1)))`.
    pub fn weights(&self) -> (f64, f64) {
        match self {
            KFactor::PureLos => (1.0, 0.0),
            KFactor::Db(_) => {
                let k = self.linear();
                ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
            }
        }
    }
}

/// One radio's channel with its LOS and diffuse parts kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiceanTap {
    pub h: Complex64,
    pub los: Complex64,
    pub nlos: Complex64,
}

/// Standard circularly-symmetric complex Gaussian, unit total variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Mixes a LOS gain with a fresh CN(0,1) diffuse component for the given K.
///
/// The diffuse sample is always drawn so the RNG stream does not depend on K.
pub fn ricean_sample<R: Rng + ?Sized>(h_los: Complex64, k: KFactor, rng: &mut R) -> RiceanTap {
    let nlos = complex_gaussian(rng);
    let h = match k {
        KFactor::PureLos => h_los,
        KFactor::Db(_) => {
            let (a, b) = k.weights();
            h_los * a + nlos * b
        }
    };
    RiceanTap { h, los: h_los, nlos }
}

/// Channels from a set of transmitters to one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<RiceanTap>,
    pub k: KFactor,
    /// Per-radio received SNR in dB when a link budget was applied.
    pub snr_db: Option<Vec<f64>>,
}

impl ChannelRealization {
    /// Draws channels from every transmitter to `rx`.
    pub fn draw<'a, R, I>(
        transmitters: I,
        rx: &Position3,
        carrier: &CarrierConfig,
        k: KFactor,
        rng: &mut R,
    ) -> Result<Self, ChannelError>
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = &'a Position3>,
    {
        let taps = transmitters
            .into_iter()
            .map(|tx| Ok(ricean_sample(los_gain(tx, rx, carrier)?, k, rng)))
            .collect::<Result<Vec<_>, ChannelError>>()?;
        Ok(Self {
            taps,
            k,
            snr_db: None,
        })
    }

    pub fn from_gains(gains: &[Complex64]) -> Self {
        Self {
            taps: gains
                .iter()
                .map(|&h| RiceanTap {
                    h,
                    los: h,
                    nlos: Complex64::new(0.0, 0.0),
                })
                .collect(),
            k: KFactor::PureLos,
            snr_db: None,
        }
    }

    pub fn gains(&self) -> Vec<Complex64> {
        self.taps.iter().map(|t| t.h).collect()
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// Air-to-ground K-factor model `K = K0 - η0 (d - d0) + Y`, Y ~ N(0, σ_Y²).
///
/// `K0`, `η0` and `σ_Y` are in dB, distances in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiceanKModel {
    pub k0_db: f64,
    pub eta0_db_per_km: f64,
    pub d0_km: f64,
    pub sigma_y_db: f64,
}

impl Default for RiceanKModel {
    fn default() -> Self {
        Self {
            k0_db: 29.9,
            eta0_db_per_km: 0.02,
            d0_km: 3.4,
            sigma_y_db: 2.2,
        }
    }
}

impl RiceanKModel {
    pub fn mean_db(&self, d_km: f64) -> f64 {
        self.k0_db - self.eta0_db_per_km * (d_km - self.d0_km)
    }

    /// One draw of K in dB; the shadowing term applies to the whole trial.
    pub fn k_at_distance<R: Rng + ?Sized>(&self, d_km: f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean_db(d_km) + self.sigma_y_db * z
    }
}

pub fn k_at_distance<R: Rng + ?Sized>(d_km: f64, model: &RiceanKModel, rng: &mut R) -> f64 {
    model.k_at_distance(d_km, rng)
}

/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Reference loss at 1 m that puts an 11-radio coherent array at 0 dBm per
/// radio exactly at 1 dB SNR at 25 km under the default budget.
pub fn anchored_reference_loss_db() -> f64 {
    let budget = LinkBudget {
        reference_loss_db: 0.0,
        ..LinkBudget::default_unanchored()
    };
    let array_gain = 20.0 * 11f64.log10();
    budget.received_snr(25_000.0, budget.tx_power_dbm, array_gain) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub dest_tx_power_dbm: f64,
    pub noise_bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub path_loss_exponent: f64,
    pub reference_loss_db: f64,
}

impl LinkBudget {
    fn default_unanchored() -> Self {
        Self {
            tx_power_dbm: 0.0,
            dest_tx_power_dbm: 20.0,
            noise_bandwidth_hz: 1e6,
            noise_figure_db: 5.0,
            path_loss_exponent: 2.3,
            reference_loss_db: 0.0,
        }
    }

    pub fn noise_floor_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.noise_bandwidth_hz.log10() + self.noise_figure_db
    }

    /// Log-distance path loss; distances below 1 m are clamped to the reference.
    pub fn path_loss_db(&self, d_m: f64) -> f64 {
        self.reference_loss_db + 10.0 * self.path_loss_exponent * d_m.max(1.0).log10()
    }

    pub fn received_snr(&self, d_m: f64, tx_power_dbm: f64, array_gain_db: f64) -> f64 {
        tx_power_dbm + array_gain_db - self.path_loss_db(d_m) - self.noise_floor_dbm()
    }
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            reference_loss_db: anchored_reference_loss_db(),
            ..Self::default_unanchored()
        }
    }
}

pub fn received_snr(d_m: f64, budget: &LinkBudget, tx_power_dbm: f64, array_gain_db: f64) -> f64 {
    budget.received_snr(d_m, tx_power_dbm, array_gain_db)
}

/// Draws a zero-mean Gaussian with the given standard deviation.
#[cfg(test)]
pub(crate) fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
