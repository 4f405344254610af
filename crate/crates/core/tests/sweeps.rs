use gdbf_core::experiments::{run_scenario, DxSetting, KSetting, Runner, Scenario, ScenarioConfig, Strategy};

fn small(scenario: Scenario) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(scenario);
    cfg.trials = 4;
    cfg
}

fn set(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[test]
fn every_preset_validates_and_round_trips() {
    for sc in Scenario::ALL {
        let cfg = ScenarioConfig::preset(sc);
        let back = ScenarioConfig::resolve(sc, Some(&cfg.to_toml()), &[]).unwrap();
        assert_eq!(back, cfg, "{sc}");
        assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
    }
}

#[test]
fn overrides_beat_file_values() {
    let file = "trials = 7\nseed = 3\n[geometry]\nly_m = [2.0]\n";
    let cfg = ScenarioConfig::resolve(
        Scenario::SeparationSweep,
        Some(file),
        &set(&[("trials", "9"), ("geometry.dx", "auto:0.1"), ("channel.k_factor", "pure-los")]),
    )
    .unwrap();
    assert_eq!(cfg.trials, 9);
    assert_eq!(cfg.seed, 3);
    assert_eq!(cfg.geometry.ly_m, vec![2.0]);
    assert_eq!(cfg.geometry.dx, DxSetting::Auto { delta_frac: 0.1 });
    assert_eq!(cfg.channel.k_factor, KSetting::PureLos);
}

#[test]
fn unknown_key_is_named() {
    let err = ScenarioConfig::resolve(Scenario::Kfactor, None, &set(&[("channel.k_fator", "3")])).unwrap_err();
    assert!(err.to_string().contains("k_fator"), "{err}");
    let err = ScenarioConfig::resolve(Scenario::Kfactor, Some("[geometry]\nlz_m = 1.0\n"), &[]).unwrap_err();
    assert!(err.to_string().contains("lz_m"), "{err}");
}

#[test]
fn invalid_values_are_rejected() {
    assert!(ScenarioConfig::resolve(Scenario::Kfactor, None, &set(&[("trials", "0")])).is_err());
    assert!(ScenarioConfig::resolve(Scenario::Kfactor, None, &set(&[("geometry.dx", "auto:0")])).is_err());
}

#[test]
fn same_seed_same_rows_different_seed_different_rows() {
    let runner = Runner::new(1).unwrap();
    let cfg = small(Scenario::Kfactor);
    let a = run_scenario(&cfg, &runner).unwrap();
    let b = run_scenario(&cfg, &runner).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    let c = run_scenario(&other, &runner).unwrap();
    assert_ne!(a.rows, c.rows);
}

#[test]
fn worker_count_does_not_change_results() {
    let one = Runner::new(1).unwrap();
    let many = Runner::new(4).unwrap();
    for sc in [Scenario::Localization, Scenario::ProtocolRound] {
        let mut cfg = small(sc);
        if sc == Scenario::ProtocolRound {
            cfg.protocol_round.snr_grid_db = vec![10.0, 30.0];
        }
        assert_eq!(run_scenario(&cfg, &one).unwrap(), run_scenario(&cfg, &many).unwrap(), "{sc}");
    }
}

#[test]
fn row_counts_follow_the_grids() {
    let runner = Runner::new(0).unwrap();
    let mut cfg = small(Scenario::DistanceComparison);
    cfg.trials = 1;
    let res = run_scenario(&cfg, &runner).unwrap();
    assert_eq!(res.rows.len(), cfg.distance.dist_grid_km.len() * cfg.strategies.len());

    let mut cfg = small(Scenario::Kfactor);
    cfg.channel.k_grid_db = vec![0.0, 10.0];
    cfg.strategies = vec![Strategy::Guided, Strategy::Random];
    let res = run_scenario(&cfg, &runner).unwrap();
    assert_eq!(res.rows.len(), 4);
    assert!(res.rows.iter().all(|r| r.trials == 4 && r.seed == cfg.seed));
}

#[test]
fn gains_are_bounded_in_every_scenario() {
    let runner = Runner::new(0).unwrap();
    for sc in [Scenario::SeparationSweep, Scenario::DeltaSweep, Scenario::Localization, Scenario::Kfactor] {
        let res = run_scenario(&small(sc), &runner).unwrap();
        for r in &res.rows {
            assert!((0.0..=1.0 + 1e-12).contains(&r.mean_gain), "{sc}: {r:?}");
            assert!(r.std_gain >= 0.0);
        }
    }
}

#[test]
fn unsupported_strategy_is_an_error() {
    let mut cfg = small(Scenario::ProtocolRound);
    cfg.strategies = vec![Strategy::Location];
    assert!(run_scenario(&cfg, &Runner::new(1).unwrap()).is_err());
}
