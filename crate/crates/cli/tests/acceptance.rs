//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the `gdbf` binary for the end-to-end criteria and the library for the
//! rest. Exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gdbf_core::beamforming::{gain, weights_random};
use gdbf_core::channel::{CarrierConfig, KFactor, SPEED_OF_LIGHT};
use gdbf_core::experiments::output::read_csv_rows;
use gdbf_core::experiments::{
    gain_trial, run_scenario, GainPoint, Runner, Scenario, ScenarioConfig, Strategy, SweepResult,
    SweepRow,
};
use gdbf_core::geometry::{separation_bound, Position3};
use gdbf_core::protocol::{
    apply_impairments, estimate_cfo, estimate_toa, gen_sync_preamble, Impairment, ProtocolConfig,
    SubsampleMethod,
};
use gdbf_core::seed::TrialSeed;
use num_complex::Complex64;

const BIN: &str = env!("CARGO_BIN_EXE_gdbf");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_floor(n: usize) -> f64 {
    (std::f64::consts::PI / (4.0 * n as f64)).sqrt()
}

fn run(cfg: &ScenarioConfig, runner: &Runner) -> SweepResult {
    run_scenario(cfg, runner).unwrap_or_else(|e| panic!("{}: {e}", cfg.scenario))
}

fn row<'a>(res: &'a SweepResult, strategy: &str, x1: f64) -> &'a SweepRow {
    res.rows
        .iter()
        .find(|r| r.strategy == strategy && (r.x1 - x1).abs() < 1e-9)
        .unwrap_or_else(|| panic!("no row {strategy} at {x1}"))
}

fn separation_closed_form() -> Outcome {
    let out = Command::new(BIN)
        .args(["separation", "--ly", "1", "--delta-frac", "0.2", "--fc", "900e6"])
        .output()
        .expect("run gdbf");
    let printed = String::from_utf8_lossy(&out.stdout).trim().to_string();
    let cli: f64 = printed.parse().unwrap_or(f64::NAN);
    let lib = separation_bound(1.0, 0.2 * SPEED_OF_LIGHT / 900e6).unwrap();
    let ok = out.status.success() && (cli - 1.843).abs() <= 0.001 && (lib - 1.843).abs() <= 0.001;
    outcome(ok, format!("cli prints {printed}, bound {lib:.5} m (target 1.843 ± 0.001)"))
}

fn ninety_percent_claim(runner: &Runner) -> Outcome {
    let mut cfg = ScenarioConfig::preset(Scenario::SeparationSweep);
    cfg.geometry.ly_m = vec![1.0, 2.0, 4.0];
    cfg.geometry.dx_grid_m = vec![0.0];
    let res = run(&cfg, runner);
    let gains: Vec<(f64, f64)> = res.derived_named("auto_dx_gain:guided").map(|d| (d.x1, d.value)).collect();
    let ok = gains.len() == 3 && gains.iter().all(|&(_, g)| g >= 0.88);
    let text: Vec<String> = gains.iter().map(|(ly, g)| format!("L_y={ly}: {g:.4}")).collect();
    outcome(ok, format!("{} (each ≥ 0.88)", text.join(", ")))
}

fn collinear_exactness() -> Outcome {
    let p = GainPoint {
        n_radios: 11,
        lx: 10.0,
        ly: 0.0,
        dx: 0.0,
        destination: Position3::planar(10_000.0, 0.0),
        carrier: CarrierConfig::new(900e6).unwrap(),
        k: KFactor::PureLos,
        loc_error: 0.0,
    };
    let worst = (0..100)
        .map(|t| {
            let seed = TrialSeed::derive(1, "acceptance-collinear", "", t);
            (gain_trial(&p, &[Strategy::Guided], &seed).unwrap()[0] - 1.0).abs()
        })
        .fold(0.0, f64::max);
    outcome(worst <= 1e-9, format!("max |Γ − 1| over 100 placements = {worst:.2e} (≤ 1e-9)"))
}

fn location_fragility(runner: &Runner) -> Outcome {
    let mut cfg = ScenarioConfig::preset(Scenario::Localization);
    let half_lambda = cfg.wavelength() / 2.0;
    cfg.localization.dp_grid_m = vec![0.0, half_lambda];
    cfg.strategies = vec![Strategy::Location];
    cfg.trials = 1000;
    let res = run(&cfg, runner);
    let g0 = row(&res, "location", 0.0).mean_gain;
    let gh = row(&res, "location", half_lambda).mean_gain;
    let floor = random_floor(11);
    let ok = g0 >= 0.999 && (gh - floor).abs() <= 0.1;
    outcome(
        ok,
        format!(
            "ΔP=0: {g0:.4} (≥ 0.999); ΔP=λ/2: {gh:.4} vs floor {floor:.4}, |diff| {:.4} (≤ 0.1)",
            (gh - floor).abs()
        ),
    )
}

fn random_floor_check() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [4usize, 11] {
        let h = vec![Complex64::new(1.0, 0.0); n];
        let trials = 100_000;
        let sum: f64 = (0..trials)
            .map(|t| {
                let mut rng = TrialSeed::derive(5, "acceptance-random", &n.to_string(), t).stream("random");
                let w = weights_random(n, &mut rng).unwrap();
                gain(&w, &h).unwrap()
            })
            .sum();
        let mean = sum / trials as f64;
        let floor = random_floor(n);
        ok &= (mean - floor).abs() <= 0.01;
        parts.push(format!("N={n}: {mean:.4} vs {floor:.4}"));
    }
    outcome(ok, format!("{} (± 0.01, 1e5 trials)", parts.join(", ")))
}

fn nonreciprocity_penalty(runner: &Runner) -> Outcome {
    let mut cfg = ScenarioConfig::preset(Scenario::Kfactor);
    cfg.channel.k_grid_db = vec![25.0];
    cfg.strategies = vec![Strategy::Guided, Strategy::GuidedNonreciprocal];
    let res = run(&cfg, runner);
    let g = row(&res, "guided", 25.0).mean_gain;
    let nr = row(&res, "guided-nonreciprocal", 25.0).mean_gain;
    let drop = g - nr;
    let ok = (drop - 1.0 / 11.0).abs() <= 0.05;
    outcome(ok, format!("guided {g:.4}, nonreciprocal {nr:.4}, drop {drop:.4} vs 1/N {:.4} (± 0.05)", 1.0 / 11.0))
}

fn localization_robustness(runner: &Runner) -> Outcome {
    let cfg = ScenarioConfig::preset(Scenario::Localization);
    let res = run(&cfg, runner);
    let g = row(&res, "guided", 1.0).mean_gain;
    let max_dx = res.derived_named("dx_m").map(|d| d.value).fold(0.0, f64::max);
    let top = cfg.localization.dp_grid_m.iter().cloned().fold(0.0, f64::max);
    let ok = g >= 0.78 && max_dx <= 18.0;
    outcome(
        ok,
        format!("ΔP=1 m guided {g:.4} (≥ 0.78); max d_x {max_dx:.2} m over ΔP ≤ {top} m (≤ 18)"),
    )
}

fn kfactor_retention(runner: &Runner) -> Outcome {
    let cfg = ScenarioConfig::preset(Scenario::Kfactor);
    let res = run(&cfg, runner);
    let worst_guided = res
        .rows_for("guided")
        .filter(|r| r.x1 >= 15.0)
        .map(|r| r.mean_gain)
        .fold(1.0, f64::min);
    let worst_ideal = res
        .rows_for("feedback-ideal")
        .map(|r| (r.mean_gain - 1.0).abs().max(r.std_gain))
        .fold(0.0, f64::max);
    let ok = worst_guided >= 0.85 && worst_ideal <= 1e-9;
    outcome(
        ok,
        format!("min guided Γ at K ≥ 15 dB {worst_guided:.4} (≥ 0.85); ideal feedback off by {worst_ideal:.1e} (≤ 1e-9)"),
    )
}

fn distance_comparison(csv: &Path) -> Outcome {
    let rows = match read_csv_rows(csv) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("cannot read {}: {e}", csv.display())),
    };
    let series = |s: &str| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| r.strategy == s).map(|r| (r.x1, r.mean_gain)).collect()
    };
    let fb = series("feedback");
    let gd = series("guided");
    let at = |v: &[(f64, f64)], d: f64| v.iter().find(|p| (p.0 - d).abs() < 1e-9).map(|p| p.1).unwrap_or(f64::NAN);
    // (a) non-increasing: no later point exceeds any earlier point by more than the band.
    let mut worst_rise: f64 = 0.0;
    for i in 0..fb.len() {
        for j in i + 1..fb.len() {
            worst_rise = worst_rise.max(fb[j].1 - fb[i].1);
        }
    }
    let a = worst_rise <= 0.05;
    let floor = random_floor(11);
    let fb25 = at(&fb, 25.0);
    let gd25 = at(&gd, 25.0);
    let b = (fb25 - floor).abs() <= 0.1;
    let c = gd25 - fb25 >= 0.15;
    let near: Vec<(f64, f64, f64)> = fb
        .iter()
        .filter(|p| p.0 <= 3.0)
        .map(|p| (p.0, p.1, at(&gd, p.0)))
        .collect();
    let d = !near.is_empty() && near.iter().all(|&(_, f, g)| f > g);
    let near_txt: Vec<String> = near.iter().map(|(km, f, g)| format!("{km} km {f:.3}>{g:.3}")).collect();
    outcome(
        a && b && c && d,
        format!(
            "(a) max rise {worst_rise:.3} ≤ 0.05: {a}; (b) 25 km feedback {fb25:.3} vs floor {floor:.3}: {b}; \
             (c) guided − feedback at 25 km {:.3} ≥ 0.15: {c}; (d) {}: {d}",
            gd25 - fb25,
            near_txt.join(", ")
        ),
    )
}

fn protocol_fidelity(runner: &Runner) -> Outcome {
    let mut cfg = ScenarioConfig::preset(Scenario::ProtocolRound);
    cfg.protocol_round.snr_grid_db = vec![30.0];
    cfg.trials = 100;
    let res = run(&cfg, runner);
    let guide = row(&res, "guided", 30.0).mean_gain;
    let dest = row(&res, "feedback", 30.0).mean_gain;

    let pcfg = ProtocolConfig::default();
    let sync = gen_sync_preamble(&pcfg);
    let frame = sync.padded(40, 40);
    let mut rng = TrialSeed::derive(10, "acceptance-protocol", "", 0).stream("noiseless");
    let mut cfo_err: f64 = 0.0;
    for (f, dt) in [(500.0, 0.0), (500.0, 3.5e-6), (-937.0, -12.25e-6), (250.5, 7.8e-6)] {
        let imp = Impairment {
            cfo_hz: f,
            timing_offset_s: dt,
            phase_rad: 0.4,
            ..Impairment::none()
        };
        let rx = apply_impairments(&frame, &imp, &mut rng);
        let est = estimate_cfo(&rx, pcfg.sync_len / 2, pcfg.cfo_detect_threshold).unwrap();
        cfo_err = cfo_err.max((est.cfo_hz - f).abs());
    }
    let imp = Impairment {
        timing_offset_s: 3.5e-6,
        ..Impairment::none()
    };
    let rx = apply_impairments(&frame, &imp, &mut rng);
    let toa = estimate_toa(&rx, &sync, SubsampleMethod::Interpolated, pcfg.toa_detect_threshold).unwrap();
    let toa_err = (toa.lag - 40.0 - 3.5).abs();

    let ok = guide >= 0.99 && dest >= 0.99 && cfo_err < 0.1 && toa_err < 0.05;
    outcome(
        ok,
        format!(
            "30 dB mean Γ at feedback radio: guide-fed {guide:.4}, destination-fed {dest:.4} (≥ 0.99); \
             noiseless CFO error {cfo_err:.2e} Hz (< 0.1); TOA error at 3.5 samples {toa_err:.2e} (< 0.05)"
        ),
    )
}

fn beampattern_ordering(runner: &Runner) -> Outcome {
    let cfg = ScenarioConfig::preset(Scenario::Beampattern);
    let res = run(&cfg, runner);
    let bw = |label: &str| {
        res.derived_named(&format!("beamwidth_deg:{label}"))
            .next()
            .map(|d| d.value)
            .unwrap_or(f64::NAN)
    };
    let gain_at = |deg: f64| {
        res.derived_named("gain_at_deg:bench")
            .find(|d| (d.x1 - deg).abs() < 1e-9)
            .map(|d| d.value)
            .unwrap_or(f64::NAN)
    };
    let (b10, b5, b2) = (bw("10x1"), bw("5x0.5"), bw("2x0.25"));
    let (g0, g180) = (gain_at(0.0), gain_at(180.0));
    let ok = b10 < b5 && b10 < b2 && g0 >= 2.0 * g180;
    outcome(
        ok,
        format!(
            "−3 dB widths 10x1 {b10:.1}°, 5x0.5 {b5:.1}°, 2x0.25 {b2:.1}°; bench Γ(0°) {g0:.4} vs 2×Γ(180°) {:.4}",
            2.0 * g180
        ),
    )
}

fn reproduce_twice(a: &Path, b: &Path) -> (Outcome, Duration) {
    let started = Instant::now();
    let mut ok = true;
    for dir in [a, b] {
        let status = Command::new(BIN)
            .args(["reproduce-all", "--seed", "1", "--out"])
            .arg(dir)
            .env_remove("DBF_SIM_SEED")
            .status()
            .expect("run gdbf");
        ok &= status.success();
    }
    let elapsed = started.elapsed();
    let mut csvs: Vec<_> = std::fs::read_dir(a)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    csvs.sort();
    let identical = csvs
        .iter()
        .all(|n| std::fs::read(a.join(n)).ok() == std::fs::read(b.join(n)).ok());
    let per_run = elapsed / 2;
    let fast = per_run <= Duration::from_secs(600);
    (
        outcome(
            ok && identical && csvs.len() == 6 && fast,
            format!(
                "{} CSVs, byte-identical: {identical}; {:.1} s per run (≤ 600)",
                csvs.len(),
                per_run.as_secs_f64()
            ),
        ),
        elapsed,
    )
}

fn main() {
    let runner = Runner::new(0).expect("worker pool");
    let work = tempfile::tempdir().expect("tempdir");
    let (run_a, run_b) = (work.path().join("a"), work.path().join("b"));

    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    results.push((1, "separation bound closed form", separation_closed_form()));
    results.push((2, "90% gain at auto separation", ninety_percent_claim(&runner)));
    results.push((3, "collinear exactness", collinear_exactness()));
    results.push((4, "location-DBF fragility", location_fragility(&runner)));
    results.push((5, "random floor", random_floor_check()));
    results.push((6, "non-reciprocity penalty", nonreciprocity_penalty(&runner)));
    results.push((7, "localization robustness", localization_robustness(&runner)));
    results.push((8, "K-factor retention", kfactor_retention(&runner)));
    let (determinism, _) = reproduce_twice(&run_a, &run_b);
    results.push((9, "distance comparison", distance_comparison(&run_a.join("distance-comparison.csv"))));
    results.push((10, "protocol fidelity", protocol_fidelity(&runner)));
    results.push((11, "beampattern ordering", beampattern_ordering(&runner)));
    results.push((12, "determinism and runtime", determinism));

    let mut failed = 0;
    for (id, name, o) in &results {
        if !o.pass {
            failed += 1;
        }
        println!("{} {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
