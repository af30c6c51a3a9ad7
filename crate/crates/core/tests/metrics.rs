mod common;

use std::f64::consts::FRAC_PI_2;

use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use ridebench::data::{generate_synthetic, DateRange, OutputDesign, Shock};
use ridebench::metrics::{
    aape, closed_station_report, rolling_maape, system_maape, MaapeSeries, MetricsError, DEFAULT_CLOSED_THRESHOLD,
};
use ridebench::runner::{run_experiment, ExperimentConfig, ForecastLog, ForecastRecord, ModelFamily, RunOptions, Strategy};

fn d0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 10, 1).unwrap()
}

/// Log whose value for (origin i, station s, horizon h) is `values[i][s][h]`.
fn log_from(values: &[Vec<Vec<(f64, f64)>>]) -> ForecastLog {
    let n = values[0].len();
    let mut log = ForecastLog::new("t", (0..n).map(|s| format!("s{s}")).collect());
    for (i, day) in values.iter().enumerate() {
        for (s, hs) in day.iter().enumerate() {
            for (h, &(truth, pred)) in hs.iter().enumerate() {
                log.records.push(ForecastRecord {
                    station: s,
                    origin: d0() + Days::new(i as u64),
                    horizon: h as u8 + 1,
                    pred,
                    truth,
                });
            }
        }
    }
    log
}

/// Direct double loop over the definition.
fn oracle_maape(day: &[Vec<(f64, f64)>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for station in day {
        for &(y, p) in station {
            total += if y == 0.0 {
                if p == 0.0 { 0.0 } else { FRAC_PI_2 }
            } else {
                ((p - y) / y).abs().atan()
            };
            n += 1;
        }
    }
    total / n as f64
}

fn oracle_trailing(xs: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for end in w..=xs.len() {
        let mut s = 0.0;
        for x in &xs[end - w..end] {
            s += x;
        }
        out.push(s / w as f64);
    }
    out
}

#[test]
fn ten_percent_over() {
    // atan(0.1) by its alternating series
    let x: f64 = 0.1;
    let series: f64 = (0..20).map(|k| (-1f64).powi(k) * x.powi(2 * k + 1) / (2 * k + 1) as f64).sum();
    assert!((aape(100.0, 110.0).unwrap() - series).abs() < 1e-15);
    assert!((aape(100.0, 110.0).unwrap() - 0.09967).abs() < 5e-6);
}

#[test]
fn hand_built_two_station_day() {
    let day = vec![
        vec![(100.0, 110.0), (50.0, 50.0), (0.0, 3.0), (0.0, 0.0), (200.0, 100.0), (10.0, 40.0), (7.0, 0.0)],
        vec![(1.0, 2.0), (3.0, 3.0), (9.0, 1.0), (400.0, 401.0), (0.0, 0.5), (12.0, 12.5), (80.0, 20.0)],
    ];
    let log = log_from(std::slice::from_ref(&day));
    let got = system_maape(&log, d0()).unwrap();
    assert!((got - oracle_maape(&day)).abs() < 1e-12);
}

#[test]
fn perfect_and_all_closed_days() {
    let perfect = vec![vec![(5.0, 5.0); 7]; 3];
    assert_eq!(system_maape(&log_from(&[perfect]), d0()).unwrap(), 0.0);
    let closed = vec![vec![(0.0, 4.0); 7]; 3];
    assert_eq!(system_maape(&log_from(&[closed]), d0()).unwrap(), FRAC_PI_2);
}

#[test]
fn missing_records_are_listed() {
    let mut log = log_from(&[vec![vec![(5.0, 5.0); 7]; 2]]);
    log.records.retain(|r| !(r.station == 1 && r.horizon == 4));
    match system_maape(&log, d0()) {
        Err(MetricsError::Incomplete { gaps, .. }) => assert!(gaps.iter().any(|g| g.contains("s1")), "{gaps:?}"),
        other => panic!("{other:?}"),
    }
    match MaapeSeries::from_log(&log) {
        Err(MetricsError::Incomplete { gaps, .. }) => assert!(gaps[0].contains("horizons 4"), "{gaps:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn series_csv_round_trip() {
    let days: Vec<_> = (0..10).map(|i| vec![vec![(10.0, 10.0 + i as f64); 7]; 2]).collect();
    let s = MaapeSeries::from_log(&log_from(&days)).unwrap();
    assert_eq!(s.len(), 10);
    assert_eq!(s.rolling7.iter().filter(|r| r.is_some()).count(), 4);
    let mut buf = Vec::new();
    MaapeSeries::write_csv(std::slice::from_ref(&s), &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("experiment,date,maape,rolling7\n"));
    assert!(text.lines().nth(1).unwrap().ends_with(','));
    let back = MaapeSeries::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].dates, s.dates);
    assert_eq!(back[0].system, s.system);
    assert_eq!(back[0].rolling7, s.rolling7);
}

#[test]
fn no_closures_no_cells() {
    let log = log_from(&[vec![vec![(5.0, 5.0); 7]; 2]]);
    let r = closed_station_report(&log, DEFAULT_CLOSED_THRESHOLD);
    assert!(r.cells.is_empty());
    assert_eq!(r.nonzero_fraction(), None);
}

#[test]
fn perfect_zero_predictor_scores_zero_fraction() {
    let day = vec![vec![(0.0, 0.0); 7], vec![(3.0, 3.0); 7]];
    let log = log_from(&vec![day; 4]);
    let r = closed_station_report(&log, DEFAULT_CLOSED_THRESHOLD);
    assert_eq!(r.cells.len(), 4);
    assert_eq!(r.nonzero_fraction(), Some(0.0));
}

#[test]
fn static_model_keeps_predicting_demand_at_closed_station() {
    let shock = Shock {
        start_day: 170,
        duration: Some(10),
        level_multiplier: 1.0,
        closed_stations: vec![0],
    };
    let panel = generate_synthetic(&common::scenario(2, 200, vec![shock]), 3).unwrap();
    let day = |i: u64| panel.start() + Days::new(i);
    let mut cfg = ExperimentConfig::new(
        ModelFamily::Mlp,
        Strategy::Static,
        OutputDesign::Single,
        DateRange::new(day(0), day(149)),
        DateRange::new(day(150), day(199)),
    );
    cfg.hyper.baseline.epochs = 20;
    let run = run_experiment(&panel, &cfg, &RunOptions::default()).unwrap();
    let r = closed_station_report(&run.log, DEFAULT_CLOSED_THRESHOLD);
    assert_eq!(r.cells.len(), 10);
    assert!(r.cells.iter().all(|c| c.station == panel.stations()[0]));
    assert!(r.nonzero_fraction().unwrap() > 0.0);
}

proptest! {
    #[test]
    fn aape_bounded_and_monotone(y in 0.0f64..1e6, a in 0.0f64..1e6, b in 0.0f64..1e6) {
        let (near, far) = if (a - y).abs() <= (b - y).abs() { (a, b) } else { (b, a) };
        let x = aape(y, near).unwrap();
        let z = aape(y, far).unwrap();
        prop_assert!((0.0..=FRAC_PI_2).contains(&x) && (0.0..=FRAC_PI_2).contains(&z));
        if y > 0.0 {
            prop_assert!(x <= z);
        }
    }

    #[test]
    fn aape_is_scale_free(y in 1e-3f64..1e5, p in 0.0f64..1e5, k in 1e-3f64..1e3) {
        let a = aape(y, p).unwrap();
        let b = aape(k * y, k * p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn system_maape_matches_double_loop(
        days in prop::collection::vec(
            prop::collection::vec(prop::collection::vec((0u32..50, 0u32..50), 7), 5), 1..4),
        stations in 1usize..=5,
    ) {
        let days: Vec<Vec<Vec<(f64, f64)>>> = days
            .into_iter()
            .map(|d| d.into_iter().take(stations).map(|s| s.into_iter().map(|(y, p)| (y as f64 * 1.5, p as f64 * 0.75)).collect()).collect())
            .collect();
        let log = log_from(&days);
        let series = MaapeSeries::from_log(&log).unwrap();
        for (i, day) in days.iter().enumerate() {
            let want = oracle_maape(day);
            prop_assert!((system_maape(&log, d0() + Days::new(i as u64)).unwrap() - want).abs() <= 1e-12);
            prop_assert!((series.system[i] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn rolling_matches_oracle(xs in prop::collection::vec(0.0f64..FRAC_PI_2, 7..60), w in 1usize..8) {
        let got = rolling_maape(&xs, w).unwrap();
        let want = oracle_trailing(&xs, w);
        prop_assert_eq!(got.len(), want.len());
        for (g, o) in got.iter().zip(&want) {
            prop_assert!((g - o).abs() <= 1e-12);
        }
    }

    #[test]
    fn rolling_of_constant_is_constant(c in 0.0f64..FRAC_PI_2, n in 7usize..40) {
        for v in rolling_maape(&vec![c; n], 7).unwrap() {
            prop_assert!((v - c).abs() <= 1e-15);
        }
    }
}
