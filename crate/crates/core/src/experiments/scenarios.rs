//! The seven sweeps. Each draws its randomness from per-trial named streams so
//! strategies evaluated on the same trial see the same placement and channels.

use num_complex::Complex64;

use super::config::{KSetting, Scenario, ScenarioConfig, Strategy};
use super::sweep::{mean_std, Derived, Runner, SweepResult, SweepRow};
use super::ExperimentError;
use crate::beamforming::{
    angle_grid_deg, beampattern, beamwidth_3db, gain, guide_channel_phases, weights_feedback_ideal,
    weights_guided, weights_location, weights_random, GuideModel,
};
use crate::channel::{CarrierConfig, ChannelRealization, KFactor};
use crate::geometry::{
    apply_localization_error, sample_placement, separation_bound, DeploymentSpec, LocalizationError, Position3,
};
use crate::protocol::{DirSink, FeedbackNode, IqSink, LinkModel, ProtocolEngine, RoundSetup};
use crate::seed::TrialSeed;

/// One point of a closed-form (no protocol) gain sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPoint {
    pub n_radios: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub destination: Position3,
    pub carrier: CarrierConfig,
    pub k: KFactor,
    /// Per-axis localization error width, meters.
    pub loc_error: f64,
}

const GAIN_STRATEGIES: [Strategy; 6] = [
    Strategy::Guided,
    Strategy::GuidedNonreciprocal,
    Strategy::GuidedPerfectGuide,
    Strategy::Location,
    Strategy::FeedbackIdeal,
    Strategy::Random,
];

/// Γ of each strategy on one random placement and channel draw.
pub fn gain_trial(p: &GainPoint, strategies: &[Strategy], seed: &TrialSeed) -> Result<Vec<f64>, ExperimentError> {
    let spec = DeploymentSpec::new(p.lx, p.ly, p.dx, p.n_radios - 1)?;
    let believed = sample_placement(&spec, p.destination, &mut seed.stream("placement"));
    let err = LocalizationError::new(p.loc_error)?;
    let truth = apply_localization_error(&believed, &err, false, &mut seed.stream("localization"));
    let channels = |pl: &crate::geometry::Placement| -> Result<Vec<Complex64>, ExperimentError> {
        Ok(
            ChannelRealization::draw(pl.radios(), &pl.destination, &p.carrier, p.k, &mut seed.stream("channel"))?
                .gains(),
        )
    };
    let h = channels(&truth)?;
    strategies
        .iter()
        .map(|s| {
            let g = match s {
                Strategy::Guided => {
                    let w = weights_guided(&truth, &guide_channel_phases(&truth, &p.carrier)?, &GuideModel::reciprocal())?;
                    gain(&w, &h)?
                }
                Strategy::GuidedNonreciprocal => {
                    let guide = GuideModel::non_reciprocal(&mut seed.stream("guide"));
                    let w = weights_guided(&truth, &guide_channel_phases(&truth, &p.carrier)?, &guide)?;
                    gain(&w, &h)?
                }
                Strategy::GuidedPerfectGuide => {
                    let pg = apply_localization_error(&believed, &err, true, &mut seed.stream("localization"));
                    let w = weights_guided(&pg, &guide_channel_phases(&pg, &p.carrier)?, &GuideModel::reciprocal())?;
                    gain(&w, &channels(&pg)?)?
                }
                Strategy::Location => gain(&weights_location(&believed, &p.carrier, p.lx), &h)?,
                Strategy::FeedbackIdeal => gain(&weights_feedback_ideal(&h), &h)?,
                Strategy::Random => gain(&weights_random(p.n_radios, &mut seed.stream("random"))?, &h)?,
                Strategy::Feedback => unreachable!("rejected before the sweep"),
            };
            Ok(g)
        })
        .collect()
}

fn check_strategies(cfg: &ScenarioConfig, allowed: &[Strategy]) -> Result<(), ExperimentError> {
    match cfg.strategies.iter().find(|s| !allowed.contains(s)) {
        Some(s) => Err(ExperimentError::UnsupportedStrategy {
            scenario: cfg.scenario,
            strategy: *s,
        }),
        None => Ok(()),
    }
}

fn fixed_k(cfg: &ScenarioConfig) -> Result<KFactor, ExperimentError> {
    cfg.channel.k_factor.fixed().ok_or_else(|| {
        ExperimentError::Config(format!(
            "channel.k_factor = \"distance-model\" is only meaningful for {}",
            Scenario::DistanceComparison
        ))
    })
}

fn carrier(cfg: &ScenarioConfig) -> Result<CarrierConfig, ExperimentError> {
    Ok(CarrierConfig::new(cfg.carrier.fc_hz)?)
}

fn on_axis(cfg: &ScenarioConfig) -> Position3 {
    Position3::planar(cfg.geometry.dest_dist_km * 1000.0, 0.0)
}

fn key(parts: &[(&str, f64)]) -> String {
    parts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// Reduces per-trial strategy vectors into one row per strategy.
fn push_rows(
    rows: &mut Vec<SweepRow>,
    cfg: &ScenarioConfig,
    x1: f64,
    x2: Option<f64>,
    trials: &[Vec<f64>],
) {
    for (i, s) in cfg.strategies.iter().enumerate() {
        let vals: Vec<f64> = trials.iter().map(|t| t[i]).collect();
        let (mean, std) = mean_std(&vals);
        rows.push(SweepRow {
            scenario: cfg.scenario.name().into(),
            strategy: s.name().into(),
            x1,
            x2,
            mean_gain: mean,
            std_gain: std,
            trials: vals.len(),
            seed: cfg.seed,
        });
    }
}

fn gain_sweep(
    cfg: &ScenarioConfig,
    runner: &Runner,
    points: &[(String, GainPoint)],
) -> Result<Vec<Vec<Vec<f64>>>, ExperimentError> {
    runner.trials(cfg.seed, cfg.scenario, points, cfg.trials, |p, s| {
        gain_trial(p, &cfg.strategies, s)
    })
}

pub fn run_separation_sweep(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    check_strategies(cfg, &GAIN_STRATEGIES)?;
    let carrier = carrier(cfg)?;
    let k = fixed_k(cfg)?;
    let delta = cfg.geometry.delta_frac[0] * carrier.wavelength;
    let base = |ly, dx| GainPoint {
        n_radios: cfg.n_radios,
        lx: cfg.geometry.lx_m,
        ly,
        dx,
        destination: on_axis(cfg),
        carrier,
        k,
        loc_error: 0.0,
    };
    let mut points = Vec::new();
    for &ly in &cfg.geometry.ly_m {
        for &dx in &cfg.geometry.dx_grid_m {
            points.push((key(&[("ly", ly), ("dx", dx)]), base(ly, dx)));
        }
    }
    let mut markers = Vec::new();
    for &ly in &cfg.geometry.ly_m {
        let dx = separation_bound(ly, delta)?;
        markers.push((key(&[("marker-ly", ly), ("dx", dx)]), base(ly, dx)));
    }
    let res = gain_sweep(cfg, runner, &points)?;
    let mres = gain_sweep(cfg, runner, &markers)?;
    let mut rows = Vec::new();
    for ((_, p), t) in points.iter().zip(&res) {
        push_rows(&mut rows, cfg, p.dx, Some(p.ly), t);
    }
    let mut derived = Vec::new();
    for ((_, p), t) in markers.iter().zip(&mres) {
        derived.push(Derived {
            name: "auto_dx_m".into(),
            x1: p.ly,
            x2: None,
            value: p.dx,
            std: None,
        });
        for (i, s) in cfg.strategies.iter().enumerate() {
            let (m, sd) = mean_std(&t.iter().map(|v| v[i]).collect::<Vec<_>>());
            derived.push(Derived {
                name: format!("auto_dx_gain:{s}"),
                x1: p.ly,
                x2: Some(p.dx),
                value: m,
                std: Some(sd),
            });
        }
    }
    Ok(SweepResult {
        scenario: cfg.scenario,
        rows,
        derived,
    })
}

pub fn run_delta_sweep(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    check_strategies(cfg, &GAIN_STRATEGIES)?;
    let carrier = carrier(cfg)?;
    let k = fixed_k(cfg)?;
    let mut points = Vec::new();
    for &frac in &cfg.geometry.delta_frac {
        for &ly in &cfg.geometry.ly_m {
            let dx = separation_bound(ly, frac * carrier.wavelength)?;
            points.push((
                key(&[("delta", frac), ("ly", ly)]),
                (
                    frac,
                    GainPoint {
                        n_radios: cfg.n_radios,
                        lx: cfg.geometry.lx_m,
                        ly,
                        dx,
                        destination: on_axis(cfg),
                        carrier,
                        k,
                        loc_error: 0.0,
                    },
                ),
            ));
        }
    }
    let res = runner.trials(cfg.seed, cfg.scenario, &points, cfg.trials, |(_, p), s| {
        gain_trial(p, &cfg.strategies, s)
    })?;
    let mut rows = Vec::new();
    let mut derived = Vec::new();
    for ((_, (frac, p)), t) in points.iter().zip(&res) {
        push_rows(&mut rows, cfg, *frac, Some(p.ly), t);
        derived.push(Derived {
            name: "separation_m".into(),
            x1: *frac,
            x2: Some(p.ly),
            value: p.dx,
            std: None,
        });
    }
    Ok(SweepResult {
        scenario: cfg.scenario,
        rows,
        derived,
    })
}

pub fn run_localization_study(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    check_strategies(cfg, &GAIN_STRATEGIES)?;
    let carrier = carrier(cfg)?;
    let k = fixed_k(cfg)?;
    let ly = cfg.geometry.ly_m[0];
    let delta = cfg.geometry.delta_frac[0] * carrier.wavelength;
    let mut points = Vec::new();
    for &dp in &cfg.localization.dp_grid_m {
        let dx = if cfg.localization.compensate {
            separation_bound(ly + dp, delta)?
        } else {
            cfg.geometry.dx.resolve(ly, carrier.wavelength)?
        };
        points.push((
            key(&[("dp", dp)]),
            GainPoint {
                n_radios: cfg.n_radios,
                lx: cfg.geometry.lx_m,
                ly,
                dx,
                destination: on_axis(cfg),
                carrier,
                k,
                loc_error: dp,
            },
        ));
    }
    let res = gain_sweep(cfg, runner, &points)?;
    let mut rows = Vec::new();
    let mut derived = Vec::new();
    for ((_, p), t) in points.iter().zip(&res) {
        push_rows(&mut rows, cfg, p.loc_error, Some(p.dx), t);
        derived.push(Derived {
            name: "dx_m".into(),
            x1: p.loc_error,
            x2: None,
            value: p.dx,
            std: None,
        });
    }
    Ok(SweepResult {
        scenario: cfg.scenario,
        rows,
        derived,
    })
}

pub fn run_kfactor_study(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    check_strategies(cfg, &GAIN_STRATEGIES)?;
    let carrier = carrier(cfg)?;
    let ly = cfg.geometry.ly_m[0];
    let dx = cfg.geometry.dx.resolve(ly, carrier.wavelength)?;
    let points: Vec<(String, GainPoint)> = cfg
        .channel
        .k_grid_db
        .iter()
        .map(|&kdb| {
            (
                key(&[("k", kdb)]),
                GainPoint {
                    n_radios: cfg.n_radios,
                    lx: cfg.geometry.lx_m,
                    ly,
                    dx,
                    destination: on_axis(cfg),
                    carrier,
                    k: KFactor::Db(kdb),
                    loc_error: 0.0,
                },
            )
        })
        .collect();
    let res = gain_sweep(cfg, runner, &points)?;
    let mut rows = Vec::new();
    for (&kdb, t) in cfg.channel.k_grid_db.iter().zip(&res) {
        push_rows(&mut rows, cfg, kdb, None, t);
    }
    Ok(SweepResult {
        scenario: cfg.scenario,
        rows,
        derived: vec![Derived {
            name: "dx_m".into(),
            x1: ly,
            x2: None,
            value: dx,
            std: None,
        }],
    })
}

pub fn run_distance_comparison(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    check_strategies(cfg, &[Strategy::Guided, Strategy::Feedback, Strategy::Random])?;
    let carrier = carrier(cfg)?;
    let ly = cfg.geometry.ly_m[0];
    let dx = cfg.geometry.dx.resolve(ly, carrier.wavelength)?;
    let spec = DeploymentSpec::new(cfg.geometry.lx_m, ly, dx, cfg.n_radios - 1)?;
    let engine = ProtocolEngine::new(cfg.protocol.clone())?;
    let inter_k = cfg.channel.inter_radio_k.fixed().unwrap_or(KFactor::PureLos);
    let points: Vec<(String, f64)> = cfg.distance.dist_grid_km.iter().map(|&d| (key(&[("d", d)]), d)).collect();
    let res = runner.trials(cfg.seed, cfg.scenario, &points, cfg.trials, |&d_km, seed| {
        let mut placement = sample_placement(&spec, Position3::ORIGIN, &mut seed.stream("placement"));
        let n = placement.n_radios() as f64;
        let mean_x = placement.radios().map(|p| p.x).sum::<f64>() / n;
        placement.destination = Position3::planar(d_km * 1000.0 + mean_x, 0.0);
        let k = match cfg.channel.k_factor {
            KSetting::DistanceModel => KFactor::Db(cfg.channel.k_model.k_at_distance(d_km, &mut seed.stream("kfactor"))),
            other => other.fixed().expect("fixed K"),
        };
        let h = ChannelRealization::draw(
            placement.radios(),
            &placement.destination,
            &carrier,
            k,
            &mut seed.stream("channel"),
        )?
        .gains();
        let round = |feedback, guide, label: &str| -> Result<f64, ExperimentError> {
            let setup = RoundSetup {
                placement: &placement,
                feedback,
                link: LinkModel::Budget(cfg.link),
                carrier,
                destination_channels: &h,
                inter_radio_k: inter_k,
                guide,
            };
            Ok(engine.run(&setup, &mut seed.stream(label), None)?.gain_at_destination)
        };
        cfg.strategies
            .iter()
            .map(|s| match s {
                Strategy::Guided => round(
                    FeedbackNode::Guide,
                    GuideModel::non_reciprocal(&mut seed.stream("guide")),
                    "round-guided",
                ),
                Strategy::Feedback => round(FeedbackNode::Destination, GuideModel::reciprocal(), "round-feedback"),
                Strategy::Random => Ok(gain(&weights_random(h.len(), &mut seed.stream("random"))?, &h)?),
                _ => unreachable!("rejected before the sweep"),
            })
            .collect::<Result<Vec<f64>, _>>()
    })?;
    let mut rows = Vec::new();
    for ((_, d), t) in points.iter().zip(&res) {
        push_rows(&mut rows, cfg, *d, None, t);
    }
    let derived = cfg
        .distance
        .dist_grid_km
        .iter()
        .map(|&d| Derived {
            name: "dest_snr_db".into(),
            x1: d,
            x2: None,
            value: cfg.link.received_snr(d * 1000.0, cfg.link.tx_power_dbm, 0.0),
            std: None,
        })
        .collect();
    Ok(SweepResult {
        scenario: cfg.scenario,
        rows,
        derived,
    })
}

pub fn run_beampattern_study(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    check_strategies(cfg, &[Strategy::Guided])?;
    let angles = angle_grid_deg(-180.0, 180.0, cfg.beampattern.angle_step_deg);
    let radius = cfg.beampattern.radius_m;
    let regions = cfg.beampattern.resolved_regions();
    let points: Vec<(String, _)> = regions
        .iter()
        .map(|r| -> Result<_, ExperimentError> {
            let carrier = CarrierConfig::new(r.fc_hz)?;
            let dx = r.dx.resolve(r.ly_m, carrier.wavelength)?;
            let spec = DeploymentSpec::new(r.lx_m, r.ly_m, dx, r.n_radios - 1)?;
            Ok((format!("region={}", r.label), (spec, carrier)))
        })
        .collect::<Result<_, _>>()?;
    let res = runner.trials(cfg.seed, cfg.scenario, &points, cfg.trials, |(spec, carrier), seed| {
        let p = sample_placement(spec, Position3::planar(radius, 0.0), &mut seed.stream("placement"));
        let w = weights_guided(&p, &guide_channel_phases(&p, carrier)?, &GuideModel::reciprocal())?;
        Ok(beampattern(&p, &w, carrier, radius, &angles)?.gains)
    })?;
    let mut rows = Vec::new();
    let mut derived = Vec::new();
    let degs: Vec<f64> = angles.iter().map(|a| a.to_degrees()).collect();
    for (region, trials) in regions.iter().zip(&res) {
        let mut means = Vec::with_capacity(angles.len());
        for (j, &deg) in degs.iter().enumerate() {
            let (m, s) = mean_std(&trials.iter().map(|t| t[j]).collect::<Vec<_>>());
            means.push(m);
            rows.push(SweepRow {
                scenario: cfg.scenario.name().into(),
                strategy: format!("guided:{}", region.label),
                x1: (deg * 1e9).round() / 1e9,
                x2: None,
                mean_gain: m,
                std_gain: s,
                trials: trials.len(),
                seed: cfg.seed,
            });
        }
        if let Some(bw) = beamwidth_3db(&angles, &means, 0.0) {
            derived.push(Derived {
                name: format!("beamwidth_deg:{}", region.label),
                x1: region.lx_m,
                x2: Some(region.ly_m),
                value: bw.to_degrees(),
                std: None,
            });
        }
        let at = |deg: f64| {
            degs.iter()
                .position(|d| (d - deg).abs() < 1e-6)
                .map(|j| means[j])
        };
        for deg in [0.0, 180.0] {
            if let Some(v) = at(deg) {
                derived.push(Derived {
                    name: format!("gain_at_deg:{}", region.label),
                    x1: deg,
                    x2: None,
                    value: v,
                    std: None,
                });
            }
        }
    }
    Ok(SweepResult {
        scenario: cfg.scenario,
        rows,
        derived,
    })
}

struct ProtocolSweep {
    spec: DeploymentSpec,
    carrier: CarrierConfig,
    k: KFactor,
    inter_k: KFactor,
    engine: ProtocolEngine,
}

impl ProtocolSweep {
    fn new(cfg: &ScenarioConfig) -> Result<Self, ExperimentError> {
        check_strategies(cfg, &[Strategy::Guided, Strategy::Feedback])?;
        let carrier = carrier(cfg)?;
        let ly = cfg.geometry.ly_m[0];
        let dx = cfg.geometry.dx.resolve(ly, carrier.wavelength)?;
        Ok(Self {
            spec: DeploymentSpec::new(cfg.geometry.lx_m, ly, dx, cfg.n_radios - 1)?,
            carrier,
            k: fixed_k(cfg)?,
            inter_k: cfg.channel.inter_radio_k.fixed().unwrap_or(KFactor::PureLos),
            engine: ProtocolEngine::new(cfg.protocol.clone())?,
        })
    }

    fn points(cfg: &ScenarioConfig) -> Vec<(String, f64)> {
        cfg.protocol_round
            .snr_grid_db
            .iter()
            .map(|&s| (key(&[("snr", s)]), s))
            .collect()
    }

    /// `(Γ at the feedback radio, any stage failed)` per strategy.
    fn trial(
        &self,
        cfg: &ScenarioConfig,
        snr: f64,
        seed: &TrialSeed,
        dump: Option<&std::path::Path>,
        trial: usize,
    ) -> Result<Vec<(f64, bool)>, ExperimentError> {
        let placement = sample_placement(&self.spec, on_axis(cfg), &mut seed.stream("placement"));
        let h = ChannelRealization::draw(
            placement.radios(),
            &placement.destination,
            &self.carrier,
            self.k,
            &mut seed.stream("channel"),
        )?
        .gains();
        cfg.strategies
            .iter()
            .map(|s| {
                let (feedback, label) = match s {
                    Strategy::Guided => (FeedbackNode::Guide, "round-guided"),
                    _ => (FeedbackNode::Destination, "round-feedback"),
                };
                let setup = RoundSetup {
                    placement: &placement,
                    feedback,
                    link: LinkModel::FixedSnr(snr),
                    carrier: self.carrier,
                    destination_channels: &h,
                    inter_radio_k: self.inter_k,
                    guide: GuideModel::reciprocal(),
                };
                let mut sink = match dump {
                    Some(dir) => Some(DirSink::new(dir.join(s.name()), trial)?),
                    None => None,
                };
                let out = self.engine.run(
                    &setup,
                    &mut seed.stream(label),
                    sink.as_mut().map(|d| d as &mut dyn IqSink),
                )?;
                Ok((out.gain_at_feedback, out.failed()))
            })
            .collect()
    }
}

/// Re-runs one protocol-round trial and writes its IQ frames under
/// `dir/<strategy>/`. The trial is the same one the sweep evaluates.
pub fn dump_protocol_trial(
    cfg: &ScenarioConfig,
    point: usize,
    trial: usize,
    dir: &std::path::Path,
) -> Result<Vec<f64>, ExperimentError> {
    let sweep = ProtocolSweep::new(cfg)?;
    let points = ProtocolSweep::points(cfg);
    let (key, snr) = points
        .get(point)
        .ok_or_else(|| ExperimentError::Config(format!("no SNR point {point}")))?;
    let seed = TrialSeed::derive(cfg.seed, cfg.scenario.name(), key, trial);
    Ok(sweep
        .trial(cfg, *snr, &seed, Some(dir), trial)?
        .into_iter()
        .map(|v| v.0)
        .collect())
}

pub fn run_protocol_sweep(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    let sweep = ProtocolSweep::new(cfg)?;
    let points = ProtocolSweep::points(cfg);
    let res = runner.trials(cfg.seed, cfg.scenario, &points, cfg.trials, |&snr, seed| {
        sweep.trial(cfg, snr, seed, None, 0)
    })?;
    let mut rows = Vec::new();
    let mut derived = Vec::new();
    for ((_, snr), t) in points.iter().zip(&res) {
        let gains: Vec<Vec<f64>> = t.iter().map(|v| v.iter().map(|x| x.0).collect()).collect();
        push_rows(&mut rows, cfg, *snr, None, &gains);
        for (i, s) in cfg.strategies.iter().enumerate() {
            let failed = t.iter().filter(|v| v[i].1).count();
            derived.push(Derived {
                name: format!("failure_rate:{s}"),
                x1: *snr,
                x2: None,
                value: failed as f64 / t.len() as f64,
                std: None,
            });
        }
    }
    Ok(SweepResult {
        scenario: cfg.scenario,
        rows,
        derived,
    })
}

pub fn run_scenario(cfg: &ScenarioConfig, runner: &Runner) -> Result<SweepResult, ExperimentError> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::SeparationSweep => run_separation_sweep(cfg, runner),
        Scenario::DeltaSweep => run_delta_sweep(cfg, runner),
        Scenario::Localization => run_localization_study(cfg, runner),
        Scenario::Kfactor => run_kfactor_study(cfg, runner),
        Scenario::DistanceComparison => run_distance_comparison(cfg, runner),
        Scenario::Beampattern => run_beampattern_study(cfg, runner),
        Scenario::ProtocolRound => run_protocol_sweep(cfg, runner),
    }
}
