#![allow(dead_code)]

use chrono::NaiveDate;
use ridebench::data::{
    generate_synthetic, make_windows, CalendarSpec, NormalizationState, OutputDesign, RidershipPanel, Shock,
    SupervisedWindow, SyntheticScenario,
};

pub fn scenario(n_stations: usize, n_days: usize, shocks: Vec<Shock>) -> SyntheticScenario {
    SyntheticScenario {
        start_date: NaiveDate::from_ymd_opt(2017, 1, 2).unwrap(),
        n_days,
        base_levels: (0..n_stations).map(|s| 800.0 + 150.0 * s as f64).collect(),
        weekly_profile: [1.0, 1.02, 1.03, 1.02, 0.98, 0.6, 0.35],
        yearly_amplitude: 0.1,
        noise_sigma: 0.05,
        holiday_multiplier: 0.5,
        calendar: CalendarSpec::default(),
        shocks,
    }
}

pub fn panel(n_stations: usize, n_days: usize, seed: u64) -> RidershipPanel {
    generate_synthetic(&scenario(n_stations, n_days, vec![]), seed).unwrap()
}

pub fn windows(panel: &RidershipPanel, design: OutputDesign, train_days: usize) -> Vec<Vec<SupervisedWindow>> {
    let norm = NormalizationState::fit_days(panel, 0..train_days).unwrap();
    make_windows(panel, &norm, design, 1).unwrap()
}
