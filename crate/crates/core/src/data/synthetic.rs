//! Synthetic ridership panels with planted level shifts and station closures.

use std::f64::consts::PI;

use chrono::{Datelike, Days, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CalendarSpec, DataError, Result, RidershipPanel};

/// A demand regime change starting at `start_day`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shock {
    pub start_day: usize,
    /// `None` means the shock never ends.
    #[serde(default)]
    pub duration: Option<usize>,
    #[serde(default = "one")]
    pub level_multiplier: f64,
    /// Stations that record exactly zero while the shock is active.
    #[serde(default)]
    pub closed_stations: Vec<usize>,
}

fn one() -> f64 {
    1.0
}

impl Shock {
    pub fn is_active(&self, day: usize) -> bool {
        day >= self.start_day && self.duration.is_none_or(|d| day < self.start_day + d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub start_date: NaiveDate,
    pub n_days: usize,
    /// Mean daily transactions per station; its length is the station count.
    pub base_levels: Vec<f64>,
    /// Day-of-week multipliers, Monday first.
    pub weekly_profile: [f64; 7],
    pub yearly_amplitude: f64,
    /// σ of the multiplicative lognormal noise (mean-one).
    pub noise_sigma: f64,
    /// Multiplier on explicit holiday dates (Sundays already follow `weekly_profile`).
    #[serde(default = "one")]
    pub holiday_multiplier: f64,
    #[serde(default)]
    pub calendar: CalendarSpec,
    #[serde(default)]
    pub shocks: Vec<Shock>,
}

impl SyntheticScenario {
    pub fn n_stations(&self) -> usize {
        self.base_levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DataError::InvalidScenario(m));
        if self.base_levels.is_empty() {
            return bad("no stations".into());
        }
        if self.n_days == 0 {
            return bad("n_days must be positive".into());
        }
        if let Some(b) = self.base_levels.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return bad(format!("base level {b} must be finite and nonnegative"));
        }
        if self.weekly_profile.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return bad("weekly multipliers must be finite and nonnegative".into());
        }
        if !(0.0..1.0).contains(&self.yearly_amplitude.abs()) {
            return bad(format!("yearly amplitude {} must lie in (-1, 1)", self.yearly_amplitude));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad(format!("noise sigma {} must be nonnegative", self.noise_sigma));
        }
        if !self.holiday_multiplier.is_finite() || self.holiday_multiplier < 0.0 {
            return bad("holiday multiplier must be nonnegative".into());
        }
        for shock in &self.shocks {
            if !shock.level_multiplier.is_finite() || shock.level_multiplier < 0.0 {
                return bad(format!("shock multiplier {} must be nonnegative", shock.level_multiplier));
            }
            if let Some(s) = shock.closed_stations.iter().find(|&&s| s >= self.n_stations()) {
                return bad(format!("closed station {s} out of range"));
            }
        }
        Ok(())
    }

    fn station_names(&self) -> Vec<String> {
        let width = self.n_stations().to_string().len().max(2);
        (0..self.n_stations()).map(|i| format!("station_{i:0width$}")).collect()
    }
}

/// Generates a panel; identical `(scenario, seed)` pairs give identical panels.
pub fn generate_synthetic(scenario: &SyntheticScenario, seed: u64) -> Result<RidershipPanel> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = scenario.noise_sigma;
    let n = scenario.n_stations();
    let mut counts = vec![Vec::with_capacity(scenario.n_days); n];
    for day in 0..scenario.n_days {
        let date = scenario.start_date + Days::new(day as u64);
        let weekly = scenario.weekly_profile[date.weekday().num_days_from_monday() as usize];
        let yearly = 1.0 + scenario.yearly_amplitude * (2.0 * PI * date.ordinal() as f64 / 365.25).sin();
        let holiday = if scenario.calendar.holiday_dates.contains(&date) {
            scenario.holiday_multiplier
        } else {
            1.0
        };
        let active: Vec<&Shock> = scenario.shocks.iter().filter(|s| s.is_active(day)).collect();
        let shock: f64 = active.iter().map(|s| s.level_multiplier).product();
        for (s, row) in counts.iter_mut().enumerate() {
            // draw for every cell so closures never shift the noise stream
            let z: f64 = StandardNormal.sample(&mut rng);
            let noise = (sigma * z - 0.5 * sigma * sigma).exp();
            let closed = active.iter().any(|sh| sh.closed_stations.contains(&s));
            let value = if closed {
                0.0
            } else {
                (scenario.base_levels[s] * weekly * yearly * holiday * shock * noise).round().max(0.0)
            };
            row.push(value as u64);
        }
    }
    RidershipPanel::new(scenario.station_names(), scenario.start_date, counts, &scenario.calendar)
}
