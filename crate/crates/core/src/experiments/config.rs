//! Scenario configuration: presets, TOML files, and dotted `key=value` overrides.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::channel::{KFactor, LinkBudget, RiceanKModel, SPEED_OF_LIGHT};
use crate::geometry::separation_bound;
use crate::protocol::ProtocolConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SeparationSweep,
    DeltaSweep,
    Localization,
    Kfactor,
    DistanceComparison,
    Beampattern,
    ProtocolRound,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SeparationSweep,
        Scenario::DeltaSweep,
        Scenario::Localization,
        Scenario::Kfactor,
        Scenario::DistanceComparison,
        Scenario::Beampattern,
        Scenario::ProtocolRound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SeparationSweep => "separation-sweep",
            Scenario::DeltaSweep => "delta-sweep",
            Scenario::Localization => "localization",
            Scenario::Kfactor => "kfactor",
            Scenario::DistanceComparison => "distance-comparison",
            Scenario::Beampattern => "beampattern",
            Scenario::ProtocolRound => "protocol-round",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ExperimentError::UnknownScenario(s.to_string()))
    }
}

/// Weight-selection strategies a sweep can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Followers conjugate the guide channel; reciprocal guide.
    Guided,
    /// Guided with a random transmit phase on the guide.
    GuidedNonreciprocal,
    /// Guided where localization error does not move the guide.
    GuidedPerfectGuide,
    /// Phases from believed positions toward the destination.
    Location,
    /// Conjugate of the true destination channels.
    FeedbackIdeal,
    /// Destination-fed protocol rounds.
    Feedback,
    Random,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Guided => "guided",
            Strategy::GuidedNonreciprocal => "guided-nonreciprocal",
            Strategy::GuidedPerfectGuide => "guided-perfect-guide",
            Strategy::Location => "location",
            Strategy::FeedbackIdeal => "feedback-ideal",
            Strategy::Feedback => "feedback",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Guide separation: meters, or `auto:<δ as a fraction of λ>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DxRepr", into = "DxRepr")]
pub enum DxSetting {
    Meters(f64),
    Auto { delta_frac: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DxRepr {
    Meters(f64),
    Text(String),
}

impl TryFrom<DxRepr> for DxSetting {
    type Error = String;

    fn try_from(r: DxRepr) -> Result<Self, String> {
        match r {
            DxRepr::Meters(m) if m.is_finite() && m >= 0.0 => Ok(DxSetting::Meters(m)),
            DxRepr::Meters(m) => Err(format!("dx must be a non-negative distance, got {m}")),
            DxRepr::Text(s) => {
                let frac = s
                    .strip_prefix("auto:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite() && *v > 0.0)
                    .ok_or_else(|| format!("dx must be meters or `auto:<delta_frac>`, got {s:?}"))?;
                Ok(DxSetting::Auto { delta_frac: frac })
            }
        }
    }
}

impl From<DxSetting> for DxRepr {
    fn from(d: DxSetting) -> Self {
        match d {
            DxSetting::Meters(m) => DxRepr::Meters(m),
            DxSetting::Auto { delta_frac } => DxRepr::Text(format!("auto:{delta_frac}")),
        }
    }
}

impl DxSetting {
    pub fn resolve(&self, ly: f64, wavelength: f64) -> Result<f64, ExperimentError> {
        match *self {
            DxSetting::Meters(m) => Ok(m),
            DxSetting::Auto { delta_frac } => Ok(separation_bound(ly, delta_frac * wavelength)?),
        }
    }
}

/// K-factor of the destination channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KRepr", into = "KRepr")]
pub enum KSetting {
    Db(f64),
    PureLos,
    DistanceModel,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KRepr {
    Db(f64),
    Text(String),
}

impl TryFrom<KRepr> for KSetting {
    type Error = String;

    fn try_from(r: KRepr) -> Result<Self, String> {
        match r {
            KRepr::Db(v) if v.is_finite() => Ok(KSetting::Db(v)),
            KRepr::Db(v) => Err(format!("k_factor must be finite, got {v}")),
            KRepr::Text(s) => match s.as_str() {
                "pure-los" => Ok(KSetting::PureLos),
                "distance-model" => Ok(KSetting::DistanceModel),
                _ => Err(format!(
                    "k_factor must be dB, \"pure-los\" or \"distance-model\", got {s:?}"
                )),
            },
        }
    }
}

impl From<KSetting> for KRepr {
    fn from(k: KSetting) -> Self {
        match k {
            KSetting::Db(v) => KRepr::Db(v),
            KSetting::PureLos => KRepr::Text("pure-los".into()),
            KSetting::DistanceModel => KRepr::Text("distance-model".into()),
        }
    }
}

impl KSetting {
    /// The fixed K, or `None` for the distance model.
    pub fn fixed(&self) -> Option<KFactor> {
        match *self {
            KSetting::Db(v) => Some(KFactor::Db(v)),
            KSetting::PureLos => Some(KFactor::PureLos),
            KSetting::DistanceModel => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub lx_m: f64,
    pub ly_m: Vec<f64>,
    pub dx: DxSetting,
    /// Separation grid of the separation sweep.
    pub dx_grid_m: Vec<f64>,
    /// Mismatch tolerances as fractions of λ.
    pub delta_frac: Vec<f64>,
    pub dest_dist_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierSection {
    pub fc_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub k_factor: KSetting,
    pub k_grid_db: Vec<f64>,
    pub inter_radio_k: KSetting,
    pub k_model: RiceanKModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSection {
    pub dp_grid_m: Vec<f64>,
    /// Widen the separation to cover `ly + ΔP` at the first tolerance.
    pub compensate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSection {
    pub dist_grid_km: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternPreset {
    /// Three deployment regions of decreasing size.
    Fig7,
    /// The four-radio bench geometry.
    Fig10,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRegion {
    pub label: String,
    pub n_radios: usize,
    pub lx_m: f64,
    pub ly_m: f64,
    pub dx: DxSetting,
    pub fc_hz: f64,
}

impl PatternPreset {
    pub fn regions(&self) -> Vec<PatternRegion> {
        let fig7 = |label: &str, lx: f64, ly: f64| PatternRegion {
            label: label.into(),
            n_radios: 11,
            lx_m: lx,
            ly_m: ly,
            dx: DxSetting::Auto { delta_frac: 0.2 },
            fc_hz: 900e6,
        };
        let f7 = vec![fig7("10x1", 10.0, 1.0), fig7("5x0.5", 5.0, 0.5), fig7("2x0.25", 2.0, 0.25)];
        let f10 = vec![PatternRegion {
            label: "bench".into(),
            n_radios: 4,
            lx_m: 0.55,
            ly_m: 0.1,
            dx: DxSetting::Meters(0.32),
            fc_hz: 915e6,
        }];
        match self {
            PatternPreset::Fig7 => f7,
            PatternPreset::Fig10 => f10,
            PatternPreset::All => f7.into_iter().chain(f10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeampatternSection {
    pub preset: PatternPreset,
    /// Replaces the preset's regions when non-empty.
    pub regions: Vec<PatternRegion>,
    pub radius_m: f64,
    pub angle_step_deg: f64,
}

impl BeampatternSection {
    pub fn resolved_regions(&self) -> Vec<PatternRegion> {
        if self.regions.is_empty() {
            self.preset.regions()
        } else {
            self.regions.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolRoundSection {
    pub snr_grid_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: usize,
    pub n_radios: usize,
    pub strategies: Vec<Strategy>,
    pub geometry: GeometrySection,
    pub carrier: CarrierSection,
    pub channel: ChannelSection,
    pub link: LinkBudget,
    pub localization: LocalizationSection,
    pub distance: DistanceSection,
    pub beampattern: BeampatternSection,
    pub protocol: ProtocolConfig,
    pub protocol_round: ProtocolRoundSection,
}

impl ScenarioConfig {
    /// Defaults every scenario starts from before preset-specific edits.
    fn base(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 1,
            trials: 100,
            n_radios: 11,
            strategies: vec![Strategy::Guided],
            geometry: GeometrySection {
                lx_m: 10.0,
                ly_m: vec![1.0],
                dx: DxSetting::Auto { delta_frac: 0.2 },
                dx_grid_m: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
                delta_frac: vec![0.2],
                dest_dist_km: 10.0,
            },
            carrier: CarrierSection { fc_hz: 900e6 },
            channel: ChannelSection {
                k_factor: KSetting::Db(25.0),
                k_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
                inter_radio_k: KSetting::PureLos,
                k_model: RiceanKModel::default(),
            },
            link: LinkBudget::default(),
            localization: LocalizationSection {
                dp_grid_m: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
                compensate: true,
            },
            distance: DistanceSection {
                dist_grid_km: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0],
            },
            beampattern: BeampatternSection {
                preset: PatternPreset::Fig7,
                regions: Vec::new(),
                radius_m: 10_000.0,
                angle_step_deg: 1.0,
            },
            protocol: ProtocolConfig::default(),
            protocol_round: ProtocolRoundSection {
                snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
            },
        }
    }

    pub fn preset(scenario: Scenario) -> Self {
        let mut c = Self::base(scenario);
        match scenario {
            Scenario::SeparationSweep => {
                c.geometry.ly_m = vec![0.0, 1.0, 2.0, 4.0, 8.0];
            }
            Scenario::DeltaSweep => {
                c.geometry.ly_m = vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
                c.geometry.delta_frac = vec![0.05, 0.1, 0.2, 0.3, 0.4];
            }
            Scenario::Localization => {
                c.strategies = vec![Strategy::Guided, Strategy::GuidedPerfectGuide, Strategy::Location];
            }
            Scenario::Kfactor => {
                c.strategies = vec![
                    Strategy::Guided,
                    Strategy::GuidedNonreciprocal,
                    Strategy::FeedbackIdeal,
                ];
            }
            Scenario::DistanceComparison => {
                c.strategies = vec![Strategy::Guided, Strategy::Feedback, Strategy::Random];
                c.channel.k_factor = KSetting::DistanceModel;
            }
            Scenario::Beampattern => {
                c.channel.k_factor = KSetting::PureLos;
                c.beampattern.preset = PatternPreset::All;
            }
            Scenario::ProtocolRound => {
                c.strategies = vec![Strategy::Guided, Strategy::Feedback];
                c.n_radios = 4;
                c.geometry.lx_m = 0.55;
                c.geometry.ly_m = vec![0.1];
                c.geometry.dx = DxSetting::Meters(0.32);
                c.geometry.dest_dist_km = 1.0;
                c.carrier.fc_hz = 915e6;
                c.channel.k_factor = KSetting::PureLos;
            }
        }
        c
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier.fc_hz
    }

    /// Preset, then `file` (TOML text) merged over it, then `overrides`.
    ///
    /// Unknown keys anywhere are rejected.
    pub fn resolve(
        scenario: Scenario,
        file: Option<&str>,
        overrides: &[(String, String)],
    ) -> Result<Self, ExperimentError> {
        let mut table = toml::Table::try_from(Self::preset(scenario))
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if let Some(text) = file {
            let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
            merge(&mut table, user);
        }
        for (key, value) in overrides {
            set_dotted(&mut table, key, parse_value(value))?;
        }
        table.insert("scenario".into(), toml::Value::String(scenario.name().into()));
        let cfg: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_radios < 2 {
            return bad("n_radios must be at least 2".into());
        }
        if self.strategies.is_empty() {
            return bad("strategies must not be empty".into());
        }
        if !(self.carrier.fc_hz.is_finite() && self.carrier.fc_hz > 0.0) {
            return bad("carrier.fc_hz must be positive".into());
        }
        let g = &self.geometry;
        if g.ly_m.is_empty() || g.delta_frac.is_empty() {
            return bad("geometry.ly_m and geometry.delta_frac must not be empty".into());
        }
        if g.delta_frac.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("geometry.delta_frac entries must be positive".into());
        }
        let need = |name: &str, grid: &[f64]| -> Result<(), ExperimentError> {
            if grid.is_empty() {
                Err(ExperimentError::Config(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        match self.scenario {
            Scenario::SeparationSweep => need("geometry.dx_grid_m", &g.dx_grid_m)?,
            Scenario::Localization => need("localization.dp_grid_m", &self.localization.dp_grid_m)?,
            Scenario::Kfactor => need("channel.k_grid_db", &self.channel.k_grid_db)?,
            Scenario::DistanceComparison => need("distance.dist_grid_km", &self.distance.dist_grid_km)?,
            Scenario::ProtocolRound => need("protocol_round.snr_grid_db", &self.protocol_round.snr_grid_db)?,
            Scenario::DeltaSweep | Scenario::Beampattern => {}
        }
        if self.scenario == Scenario::Beampattern {
            let b = &self.beampattern;
            if !(b.angle_step_deg > 0.0 && b.angle_step_deg <= 360.0) {
                return bad("beampattern.angle_step_deg must lie in (0, 360]".into());
            }
        }
        self.protocol.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ExperimentError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ExperimentError::Config(format!("malformed key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        cur = match cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        {
            toml::Value::Table(t) => t,
            _ => return Err(ExperimentError::Config(format!("`{key}`: `{part}` is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for sc in Scenario::ALL {
            let c = ScenarioConfig::preset(sc);
            let back = ScenarioConfig::resolve(sc, Some(&c.to_toml()), &[]).unwrap();
            assert_eq!(back, c, "{sc}");
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ScenarioConfig::resolve(Scenario::Kfactor, Some("[geometry]\nlx = 3\n"), &[]).unwrap_err();
        assert!(err.to_string().contains("lx"), "{err}");
        let err = ScenarioConfig::resolve(Scenario::Kfactor, None, &[("bogus_key".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
    }

    #[test]
    fn overrides_apply_in_order() {
        let c = ScenarioConfig::resolve(
            Scenario::Kfactor,
            Some("trials = 5\n"),
            &[
                ("geometry.lx_m".into(), "4".into()),
                ("geometry.dx".into(), "auto:0.1".into()),
                ("channel.k_factor".into(), "pure-los".into()),
            ],
        )
        .unwrap();
        assert_eq!(c.trials, 5);
        assert_eq!(c.geometry.lx_m, 4.0);
        assert_eq!(c.geometry.dx, DxSetting::Auto { delta_frac: 0.1 });
        assert_eq!(c.channel.k_factor, KSetting::PureLos);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ScenarioConfig::resolve(Scenario::Kfactor, None, &[("trials".into(), "0".into())]).is_err());
        assert!(ScenarioConfig::resolve(Scenario::Kfactor, None, &[("geometry.dx".into(), "auto:x".into())]).is_err());
        assert!(
            ScenarioConfig::resolve(Scenario::Kfactor, None, &[("channel.k_factor".into(), "lots".into())]).is_err()
        );
    }

    #[test]
    fn auto_dx_resolves_through_bound() {
        let c = ScenarioConfig::preset(Scenario::Kfactor);
        let dx = c.geometry.dx.resolve(1.0, c.wavelength()).unwrap();
        assert!((dx - 1.84295).abs() < 1e-4, "{dx}");
    }
}
