mod common;

use chrono::{Days, NaiveDate};
use ridebench::data::{generate_synthetic, DateRange, OutputDesign, RidershipPanel};
use ridebench::runner::{
    measure_timing, run_experiment, run_grid, ExperimentConfig, ForecastLog, GridSpec, ModelFamily, RunOptions,
    RunnerError, Strategy,
};

const N_DAYS: usize = 200;
const TRAIN_DAYS: usize = 150;

fn day(panel: &RidershipPanel, i: usize) -> NaiveDate {
    panel.start() + Days::new(i as u64)
}

fn config(panel: &RidershipPanel, family: ModelFamily, strategy: Strategy, output: OutputDesign) -> ExperimentConfig {
    let train = DateRange::new(day(panel, 0), day(panel, TRAIN_DAYS - 1));
    let test = DateRange::new(day(panel, TRAIN_DAYS), day(panel, 179));
    let mut c = ExperimentConfig::new(family, strategy, output, train, test);
    c.hyper.baseline.epochs = 4;
    c.hyper.online_window = 20;
    c.hyper.cnn_filters = 8;
    c.hyper.lstm_units = 6;
    c.seed = 11;
    c
}

fn csv_bytes(log: &ForecastLog) -> Vec<u8> {
    let mut out = Vec::new();
    log.write_csv(&mut out).unwrap();
    out
}

#[test]
fn one_record_per_station_origin_horizon() {
    let panel = common::panel(3, N_DAYS, 1);
    let cfg = config(&panel, ModelFamily::Mlp, Strategy::Online, OutputDesign::Single);
    let run = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
    // test days 150..=179, origins need 7 days of truth inside the range
    let origins = 30 - 6;
    assert_eq!(run.log.origins().len(), origins);
    assert_eq!(run.log.records.len(), 3 * origins * 7);
    assert!(run.log.records.iter().all(|r| r.pred >= 0.0 && r.pred.is_finite()));
    run.log.check_complete().unwrap();
    assert_eq!(run.log.timing.baseline.len(), 3);
    assert_eq!(run.log.timing.update.len(), 3 * origins);
}

#[test]
fn truth_matches_panel() {
    let panel = common::panel(2, N_DAYS, 2);
    let cfg = config(&panel, ModelFamily::Mlp, Strategy::Static, OutputDesign::Multi);
    let run = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
    for r in &run.log.records {
        let t = panel.day_index(r.origin).unwrap() + r.horizon as usize - 1;
        assert_eq!(r.truth, panel.count(r.station, t) as f64);
    }
}

#[test]
fn static_parameters_never_change() {
    let panel = common::panel(3, N_DAYS, 3);
    for family in [ModelFamily::Mlp, ModelFamily::Cnn, ModelFamily::Lstm] {
        let cfg = config(&panel, family, Strategy::Static, OutputDesign::Multi);
        let run = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
        assert!(run.audit.passed(), "{:?}", run.audit.violations);
        assert_eq!(run.audit.first_checksum, run.audit.last_checksum, "{family:?}");
        assert!(run.log.timing.update.is_empty());
    }
}

#[test]
fn online_parameters_change_and_audit_passes() {
    let panel = common::panel(2, N_DAYS, 4);
    let cfg = config(&panel, ModelFamily::Lstm, Strategy::Online, OutputDesign::Multi);
    let run = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
    assert!(run.audit.passed(), "{:?}", run.audit.violations);
    assert_ne!(run.audit.first_checksum, run.audit.last_checksum);
    assert_eq!(run.audit.forecasts_checked, 24);
}

#[test]
fn online_forecasts_of_constant_series_stay_in_noise_band() {
    let mut sc = common::scenario(2, N_DAYS, vec![]);
    sc.weekly_profile = [1.0; 7];
    sc.yearly_amplitude = 0.0;
    sc.holiday_multiplier = 1.0;
    sc.noise_sigma = 0.02;
    let panel = generate_synthetic(&sc, 5).unwrap();
    for family in [ModelFamily::Arima, ModelFamily::Mlp] {
        let mut cfg = config(&panel, family, Strategy::Online, OutputDesign::Single);
        cfg.hyper.baseline.epochs = 200;
        cfg.hyper.baseline.learning_rate = 3e-3;
        let run = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
        for r in &run.log.records {
            let level = sc.base_levels[r.station];
            // five noise standard deviations
            assert!(
                (r.pred - level).abs() <= 0.1 * level,
                "{family:?} station {} origin {} h{}: {} vs {level}",
                r.station,
                r.origin,
                r.horizon,
                r.pred
            );
        }
    }
}

#[test]
fn statistical_models_reject_other_designs() {
    let panel = common::panel(2, N_DAYS, 6);
    for (family, strategy, output) in [
        (ModelFamily::Arima, Strategy::Online, OutputDesign::Multi),
        (ModelFamily::Sarima, Strategy::Static, OutputDesign::Single),
    ] {
        let cfg = config(&panel, family, strategy, output);
        assert!(matches!(
            run_experiment(&panel, &cfg, &RunOptions::default()),
            Err(RunnerError::InvalidConfig(_))
        ));
    }
}

#[test]
fn full_grid_has_fourteen_cells() {
    let panel = common::panel(2, N_DAYS, 7);
    let template = config(&panel, ModelFamily::Mlp, Strategy::Static, OutputDesign::Single);
    let cells = GridSpec::full().cells(&template);
    assert_eq!(cells.len(), 14);
    let ids: std::collections::BTreeSet<String> = cells.iter().map(|c| c.id()).collect();
    assert_eq!(ids.len(), 14);
    assert!(ids.contains("arima-online-single") && ids.contains("sarima-online-single"));
    assert_eq!(GridSpec::neural().cells(&template).len(), 12);
}

#[test]
fn grid_runs_every_cell_and_isolates_failures() {
    let panel = common::panel(2, N_DAYS, 8);
    let mut cells = vec![
        config(&panel, ModelFamily::Mlp, Strategy::Static, OutputDesign::Single),
        config(&panel, ModelFamily::Mlp, Strategy::Online, OutputDesign::Single),
        config(&panel, ModelFamily::Arima, Strategy::Online, OutputDesign::Multi),
        config(&panel, ModelFamily::Sarima, Strategy::Online, OutputDesign::Single),
    ];
    cells[1].hyper.online.learning_rate = 0.01;
    let runs = run_grid(&panel, &cells, &RunOptions::default());
    assert_eq!(runs.len(), 4);
    assert!(runs[2].is_err());
    let ok: Vec<_> = runs.iter().enumerate().filter(|(i, _)| *i != 2).map(|(_, r)| r.as_ref().unwrap()).collect();
    for r in &ok {
        r.log.check_complete().unwrap();
    }
    // static and online cells start from the same trained baseline
    assert_eq!(ok[0].audit.first_checksum, ok[1].audit.first_checksum);
    assert_ne!(ok[1].audit.first_checksum, ok[1].audit.last_checksum);
    let alone = run_experiment(&panel, &cells[1], &RunOptions::default()).unwrap();
    assert_eq!(csv_bytes(&alone.log), csv_bytes(&ok[1].log));
}

#[test]
fn same_seed_same_log() {
    let panel = common::panel(3, N_DAYS, 9);
    for family in [ModelFamily::Cnn, ModelFamily::Arima] {
        let cfg = config(&panel, family, Strategy::Online, OutputDesign::Single);
        let a = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
        let b = run_experiment(
            &panel,
            &cfg,
            &RunOptions {
                jobs: Some(1),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(csv_bytes(&a.log), csv_bytes(&b.log));
        assert_eq!(a.log.incidents, b.log.incidents);
    }
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let panel = common::panel(2, N_DAYS, 10);
    for (family, output) in [(ModelFamily::Lstm, OutputDesign::Multi), (ModelFamily::Arima, OutputDesign::Single)] {
        let cfg = config(&panel, family, Strategy::Online, output);
        let whole = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            checkpoint_every: 5,
            stop_after: Some(10),
            jobs: None,
        };
        match run_experiment(&panel, &cfg, &opts) {
            Err(RunnerError::Interrupted { completed, total, .. }) => assert_eq!((completed, total), (10, 24)),
            other => panic!("expected interruption, got {other:?}"),
        }
        let resumed = run_experiment(
            &panel,
            &cfg,
            &RunOptions {
                stop_after: None,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(csv_bytes(&whole.log), csv_bytes(&resumed.log), "{family:?}");
        assert_eq!(whole.audit.last_checksum, resumed.audit.last_checksum);
        assert_eq!(resumed.log.timing.update.len(), whole.log.timing.update.len());
    }
}

#[test]
fn checkpoint_from_other_config_is_refused() {
    let panel = common::panel(2, N_DAYS, 11);
    let cfg = config(&panel, ModelFamily::Mlp, Strategy::Online, OutputDesign::Multi);
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        checkpoint_every: 5,
        stop_after: Some(5),
        jobs: None,
    };
    assert!(run_experiment(&panel, &cfg, &opts).is_err());
    let mut other = cfg.clone();
    other.seed += 1;
    assert!(matches!(
        run_experiment(&panel, &other, &RunOptions { stop_after: None, ..opts }),
        Err(RunnerError::Checkpoint(_))
    ));
}

#[test]
fn future_data_cannot_reach_earlier_forecasts() {
    let panel = common::panel(2, N_DAYS, 12);
    let cut = 165;
    let altered = panel.with_count(0, cut, 1_000_000).with_count(1, cut + 3, 0);
    for family in [ModelFamily::Mlp, ModelFamily::Arima] {
        let cfg = config(&panel, family, Strategy::Online, OutputDesign::Single);
        let a = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
        let b = run_experiment(&altered, &cfg, &RunOptions::default()).unwrap();
        let cut_date = day(&panel, cut);
        let mut compared = 0;
        for (ra, rb) in a.log.records.iter().zip(&b.log.records) {
            if ra.origin <= cut_date {
                assert_eq!(ra.pred, rb.pred, "{family:?} origin {}", ra.origin);
                compared += 1;
            }
        }
        assert_eq!(compared, 2 * (cut - TRAIN_DAYS + 1) * 7);
        // later forecasts do see the change
        assert!(a.log.records.iter().zip(&b.log.records).any(|(x, y)| x.origin > cut_date && x.pred != y.pred));
    }
}

#[test]
fn timing_report_is_well_formed() {
    let panel = common::panel(2, N_DAYS, 13);
    for output in [OutputDesign::Single, OutputDesign::Multi] {
        let cfg = config(&panel, ModelFamily::Mlp, Strategy::Online, output);
        let run = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
        let t = measure_timing(&run.log);
        assert_eq!(t.models, if output == OutputDesign::Single { 2 } else { 1 });
        assert!(t.baseline_seconds >= 0.0 && t.update_seconds_mean >= 0.0);
        assert!(t.simulate_seconds_mean.is_finite() && t.simulate_seconds_mean >= 0.0);
        assert_eq!(t.simulate_samples, 24 * t.models);
    }
}
