//! `gdbf`: run guided beamforming sweeps and small utility calculations.
//!
//! Exit codes: 0 success, 1 scenario failure, 2 usage or configuration error,
//! 3 file I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gdbf_core::channel::SPEED_OF_LIGHT;
use gdbf_core::experiments::{
    dump_protocol_trial, run_scenario, write_result, ExperimentError, Format, Runner, Scenario,
    ScenarioConfig,
};
use gdbf_core::geometry::separation_bound;
use serde_json::json;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "gdbf", version, about = "Guided distributed transmit beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimum guide separation for a lateral spread and mismatch tolerance.
    Separation(SeparationArgs),
    /// Run one scenario and write its results.
    Run(RunArgs),
    /// Run every figure preset into one directory.
    ReproduceAll(ReproduceArgs),
}

#[derive(Args, Debug)]
struct SeparationArgs {
    /// Lateral spread L_y, meters.
    #[arg(long)]
    ly: f64,
    /// Mismatch tolerance as a fraction of the wavelength.
    #[arg(long)]
    delta_frac: f64,
    /// Carrier frequency, Hz.
    #[arg(long, default_value_t = 900e6, conflicts_with = "wavelength")]
    fc: f64,
    /// Wavelength, meters (instead of --fc).
    #[arg(long)]
    wavelength: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Jsonlines,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonlines => Format::Jsonlines,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PresetArg {
    Fig7,
    Fig10,
    All,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed; falls back to DBF_SIM_SEED, then the config.
    #[arg(long, env = "DBF_SIM_SEED")]
    seed: Option<u64>,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// separation-sweep, delta-sweep, localization, kfactor,
    /// distance-comparison, beampattern or protocol-round.
    scenario: String,
    /// TOML file with keys mirroring the resolved config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set geometry.lx_m=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Beampattern regions.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// protocol-round only: also dump IQ frames of trial 0 at the first SNR point.
    #[arg(long, value_name = "DIR")]
    iq_dump: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{0} scenario(s) failed")]
    Partial(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Experiment(e) if e.is_io() => EXIT_IO,
            CliError::Experiment(
                ExperimentError::Config(_) | ExperimentError::UnknownScenario(_) | ExperimentError::UnsupportedStrategy { .. },
            ) => EXIT_USAGE,
            CliError::Experiment(_) | CliError::Partial(_) => EXIT_FAILURE,
        }
    }
}

/// Four significant digits, trailing zeros kept off for exact zero.
fn four_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let digits = 3 - v.abs().log10().floor() as i32;
    format!("{:.*}", digits.max(0) as usize, v)
}

fn cmd_separation(a: &SeparationArgs) -> Result<(), CliError> {
    let wavelength = match a.wavelength {
        Some(w) => w,
        None => {
            if !(a.fc.is_finite() && a.fc > 0.0) {
                return Err(CliError::Usage(format!("--fc must be positive, got {}", a.fc)));
            }
            SPEED_OF_LIGHT / a.fc
        }
    };
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(CliError::Usage(format!("wavelength must be positive, got {wavelength}")));
    }
    if !(a.delta_frac.is_finite() && a.delta_frac > 0.0) {
        return Err(CliError::Usage(format!("--delta-frac must be positive, got {}", a.delta_frac)));
    }
    let dx = separation_bound(a.ly, a.delta_frac * wavelength).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{}", four_sig(dx));
    Ok(())
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, CliError> {
    raw.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")))
        })
        .collect()
}

fn resolve(
    scenario: Scenario,
    file: Option<&Path>,
    mut overrides: Vec<(String, String)>,
    common: &Common,
) -> Result<ScenarioConfig, CliError> {
    let text = match file {
        Some(p) => Some(fs::read_to_string(p).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })?),
        None => None,
    };
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(t) = common.trials {
        overrides.push(("trials".into(), t.to_string()));
    }
    Ok(ScenarioConfig::resolve(scenario, text.as_deref(), &overrides)?)
}

fn run_one(cfg: &ScenarioConfig, runner: &Runner, common: &Common) -> Result<usize, CliError> {
    let result = run_scenario(cfg, runner)?;
    let written = write_result(&common.out, cfg.scenario.name(), cfg, &result, common.format.into())?;
    println!(
        "{}: wrote {} rows to {}",
        cfg.scenario,
        result.rows.len(),
        written.results.display()
    );
    Ok(result.rows.len())
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let scenario: Scenario = a.scenario.parse().map_err(|e: ExperimentError| CliError::Usage(e.to_string()))?;
    let mut overrides = parse_overrides(&a.overrides)?;
    if let Some(p) = a.preset {
        if scenario != Scenario::Beampattern {
            return Err(CliError::Usage("--preset applies only to beampattern".into()));
        }
        let name = match p {
            PresetArg::Fig7 => "fig7",
            PresetArg::Fig10 => "fig10",
            PresetArg::All => "all",
        };
        overrides.insert(0, ("beampattern.preset".into(), format!("\"{name}\"")));
    }
    if a.iq_dump.is_some() && scenario != Scenario::ProtocolRound {
        return Err(CliError::Usage("--iq-dump applies only to protocol-round".into()));
    }
    let cfg = resolve(scenario, a.config.as_deref(), overrides, &a.common)?;
    let runner = Runner::new(a.common.jobs)?;
    run_one(&cfg, &runner, &a.common)?;
    if let Some(dir) = &a.iq_dump {
        dump_protocol_trial(&cfg, 0, 0, dir)?;
        println!("protocol-round: IQ frames of trial 0 in {}", dir.display());
    }
    Ok(())
}

/// Scenarios `reproduce-all` runs, one per figure family.
const FIGURES: [Scenario; 6] = [
    Scenario::SeparationSweep,
    Scenario::DeltaSweep,
    Scenario::Beampattern,
    Scenario::Localization,
    Scenario::Kfactor,
    Scenario::DistanceComparison,
];

fn cmd_reproduce_all(a: &ReproduceArgs) -> Result<(), CliError> {
    let common = &a.common;
    let runner = Runner::new(common.jobs)?;
    fs::create_dir_all(&common.out).map_err(|source| CliError::Io {
        path: common.out.clone(),
        source,
    })?;
    let mut entries = Vec::new();
    let mut failed = 0;
    for scenario in FIGURES {
        let started = Instant::now();
        let outcome = resolve(scenario, None, Vec::new(), common).and_then(|cfg| {
            log::info!("running {scenario}");
            run_one(&cfg, &runner, common).map(|rows| (cfg, rows))
        });
        let secs = started.elapsed().as_secs_f64();
        let entry = match outcome {
            Ok((cfg, rows)) => json!({
                "scenario": scenario.name(),
                "status": "ok",
                "seed": cfg.seed,
                "trials": cfg.trials,
                "rows": rows,
                "runtime_s": secs,
                "file": format!("{}.{}", scenario.name(), Format::from(common.format).extension()),
            }),
            Err(e) => {
                eprintln!("error: {scenario}: {e}");
                failed += 1;
                json!({
                    "scenario": scenario.name(),
                    "status": "failed",
                    "runtime_s": secs,
                    "error": e.to_string(),
                })
            }
        };
        entries.push(entry);
    }
    let manifest = json!({
        "tool": "gdbf",
        "version": env!("CARGO_PKG_VERSION"),
        "scenarios": entries,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = common.out.join("manifest.json");
    fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
    if failed > 0 {
        return Err(CliError::Partial(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Separation(a) => cmd_separation(a),
        Command::Run(a) => cmd_run(a),
        Command::ReproduceAll(a) => cmd_reproduce_all(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
