//! Mean arctangent absolute percentage error (MAAPE).
//!
//! `aape(y, ŷ) = atan(|ŷ − y| / y)`, bounded in `[0, π/2]`. A zero truth
//! scores 0 when the prediction is also zero and π/2 otherwise.
//!
//! The daily system-wide value for origin `t` averages the AAPE of every
//! station and every horizon 1..=7 of the forecast issued at `t`. Metrics
//! are computed in original transaction units.

mod closed;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use closed::{closed_station_report, ClosedCell, ClosedStationReport, DEFAULT_CLOSED_THRESHOLD};

use crate::data::HORIZON;
use crate::runner::ForecastLog;

pub const ROLLING_WINDOW: usize = 7;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("aape needs non-negative finite inputs, got truth {truth}, pred {pred}")]
    InvalidInput { truth: f64, pred: f64 },
    #[error("{experiment}: missing forecasts: {}", gaps.join("; "))]
    Incomplete { experiment: String, gaps: Vec<String> },
    #[error("series of length {len} is shorter than the {window}-day window")]
    TooShort { len: usize, window: usize },
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

pub fn aape(truth: f64, pred: f64) -> Result<f64> {
    if !(truth >= 0.0 && pred >= 0.0 && truth.is_finite() && pred.is_finite()) {
        return Err(MetricsError::InvalidInput { truth, pred });
    }
    Ok(if truth == 0.0 {
        if pred == 0.0 {
            0.0
        } else {
            FRAC_PI_2
        }
    } else {
        ((pred - truth).abs() / truth).atan()
    })
}

/// Incremental mean; exact when every input is equal.
#[derive(Debug, Clone, Copy, Default)]
struct Mean {
    value: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.value += (x - self.value) / self.n as f64;
    }
}

/// Per-origin means over one log.
struct Day {
    system: Mean,
    /// Per-station mean over horizons and the bit mask of horizons seen.
    stations: Vec<(Mean, u32)>,
}

fn horizon_bit(h: u8) -> Option<u32> {
    (1..=HORIZON as u8).contains(&h).then(|| 1 << (h - 1))
}

fn accumulate(log: &ForecastLog, only: Option<NaiveDate>) -> Result<BTreeMap<NaiveDate, Day>> {
    let n = log.stations.len();
    let mut days: BTreeMap<NaiveDate, Day> = BTreeMap::new();
    let mut gaps = Vec::new();
    for r in log.records.iter().filter(|r| only.is_none_or(|d| d == r.origin)) {
        let day = days.entry(r.origin).or_insert_with(|| Day {
            system: Mean::default(),
            stations: vec![(Mean::default(), 0); n],
        });
        let cell = &mut day.stations[r.station];
        match horizon_bit(r.horizon) {
            Some(bit) if cell.1 & bit == 0 => {
                let e = aape(r.truth, r.pred)?;
                cell.0.push(e);
                cell.1 |= bit;
                day.system.push(e);
            }
            _ => gaps.push(format!(
                "duplicate or out-of-range record {} {} h{}",
                log.stations[r.station], r.origin, r.horizon
            )),
        }
    }
    if let Some(d) = only {
        if !days.contains_key(&d) {
            gaps.push(format!("no forecasts issued at {d}"));
        }
    }
    let full = (1u32 << HORIZON) - 1;
    for (origin, day) in &days {
        for (s, &(_, mask)) in day.stations.iter().enumerate() {
            if mask != full {
                let missing: Vec<String> = (0..HORIZON).filter(|h| mask & (1 << h) == 0).map(|h| (h + 1).to_string()).collect();
                gaps.push(format!("{} {origin} horizons {}", log.stations[s], missing.join(",")));
            }
        }
    }
    if !gaps.is_empty() {
        gaps.truncate(20);
        return Err(MetricsError::Incomplete {
            experiment: log.experiment.clone(),
            gaps,
        });
    }
    Ok(days)
}

/// System-wide MAAPE of the forecast issued at `origin`.
pub fn system_maape(log: &ForecastLog, origin: NaiveDate) -> Result<f64> {
    Ok(accumulate(log, Some(origin))?[&origin].system.value)
}

/// Trailing mean; element `i` covers inputs `i..i + window`, so the output
/// starts at the `window`-th input.
pub fn rolling_maape(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || series.len() < window {
        return Err(MetricsError::TooShort {
            len: series.len(),
            window,
        });
    }
    Ok(series.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect())
}

/// Daily MAAPE of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MaapeSeries {
    pub experiment: String,
    pub dates: Vec<NaiveDate>,
    /// System-wide value per date.
    pub system: Vec<f64>,
    /// Trailing 7-day mean, `None` for the first six dates.
    pub rolling7: Vec<Option<f64>>,
    pub stations: Vec<String>,
    /// `per_station[s][i]`: station `s` averaged over the horizons of `dates[i]`.
    pub per_station: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    experiment: String,
    date: NaiveDate,
    maape: f64,
    rolling7: Option<f64>,
}

impl MaapeSeries {
    pub fn from_log(log: &ForecastLog) -> Result<Self> {
        let days = accumulate(log, None)?;
        let dates: Vec<NaiveDate> = days.keys().copied().collect();
        let mut system = Vec::with_capacity(dates.len());
        let mut per_station = vec![Vec::with_capacity(dates.len()); log.stations.len()];
        for day in days.values() {
            for (s, (m, _)) in day.stations.iter().enumerate() {
                per_station[s].push(m.value);
            }
            system.push(day.system.value);
        }
        let rolling7 = with_warmup(&system);
        Ok(Self {
            experiment: log.experiment.clone(),
            dates,
            system,
            rolling7,
            stations: log.stations.clone(),
            per_station,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Writes `experiment,date,maape,rolling7` rows for each series.
    pub fn write_csv<W: Write>(series: &[Self], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in series {
            for i in 0..s.len() {
                w.serialize(Row {
                    experiment: s.experiment.clone(),
                    date: s.dates[i],
                    maape: s.system[i],
                    rolling7: s.rolling7[i],
                })
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| MetricsError::Csv(e.to_string()))
    }

    /// Reads the system-wide series back; per-station detail is not stored.
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize::<Row>() {
            let row = row.map_err(csv_err)?;
            if out.last().is_none_or(|s| s.experiment != row.experiment) {
                out.push(Self {
                    experiment: row.experiment.clone(),
                    dates: Vec::new(),
                    system: Vec::new(),
                    rolling7: Vec::new(),
                    stations: Vec::new(),
                    per_station: Vec::new(),
                });
            }
            let s = out.last_mut().expect("pushed above");
            s.dates.push(row.date);
            s.system.push(row.maape);
            s.rolling7.push(row.rolling7);
        }
        Ok(out)
    }
}

fn with_warmup(system: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; system.len().min(ROLLING_WINDOW - 1)];
    if let Ok(r) = rolling_maape(system, ROLLING_WINDOW) {
        out.extend(r.into_iter().map(Some));
    }
    out
}

fn csv_err(e: csv::Error) -> MetricsError {
    MetricsError::Csv(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conventions() {
        assert_eq!(aape(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(aape(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(aape(0.0, 5.0).unwrap(), FRAC_PI_2);
        assert!(aape(-1.0, 5.0).is_err());
        assert!(aape(1.0, f64::NAN).is_err());
    }

    #[test]
    fn rolling_step_ramps() {
        let mut s = vec![0.0; 7];
        s.extend([1.0; 7]);
        let r = rolling_maape(&s, 7).unwrap();
        assert_eq!(r.len(), 8);
        for (i, v) in r.iter().enumerate() {
            assert!((v - i as f64 / 7.0).abs() < 1e-15);
        }
        assert!(rolling_maape(&s[..6], 7).is_err());
    }

    #[test]
    fn warmup_is_blank() {
        let w = with_warmup(&[0.5; 9]);
        assert_eq!(w.iter().filter(|v| v.is_none()).count(), 6);
        assert_eq!(w[6], Some(0.5));
        assert_eq!(with_warmup(&[0.5; 3]), vec![None; 3]);
    }
}
