use std::io::Write;

use chrono::NaiveDate;
use serde::Serialize;

use super::{csv_err, MetricsError, Result};
use crate::runner::ForecastLog;

pub const DEFAULT_CLOSED_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedCell {
    pub experiment: String,
    pub station: String,
    pub date: NaiveDate,
    /// Next-day forecast for `date`, issued at `date`.
    pub pred: f64,
}

/// Forecasts made for days on which a station recorded no transactions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedStationReport {
    pub experiment: String,
    pub threshold: f64,
    pub cells: Vec<ClosedCell>,
}

impl ClosedStationReport {
    /// Share of closed cells forecast above the threshold; `None` without closures.
    pub fn nonzero_fraction(&self) -> Option<f64> {
        (!self.cells.is_empty())
            .then(|| self.cells.iter().filter(|c| c.pred > self.threshold).count() as f64 / self.cells.len() as f64)
    }

    pub fn mean_prediction(&self) -> Option<f64> {
        (!self.cells.is_empty()).then(|| self.cells.iter().map(|c| c.pred).sum::<f64>() / self.cells.len() as f64)
    }

    pub fn write_csv<W: Write>(reports: &[Self], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "station", "date", "pred"]).map_err(csv_err)?;
        for r in reports {
            for c in &r.cells {
                w.serialize((&c.experiment, &c.station, c.date, c.pred)).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| MetricsError::Csv(e.to_string()))
    }
}

/// Tabulates every (station, day) with zero truth, using the horizon-1
/// forecast so each day is counted once.
pub fn closed_station_report(log: &ForecastLog, threshold: f64) -> ClosedStationReport {
    let mut cells: Vec<ClosedCell> = log
        .records
        .iter()
        .filter(|r| r.horizon == 1 && r.truth == 0.0)
        .map(|r| ClosedCell {
            experiment: log.experiment.clone(),
            station: log.stations[r.station].clone(),
            date: r.origin,
            pred: r.pred,
        })
        .collect();
    cells.sort_by(|a, b| (a.date, &a.station).cmp(&(b.date, &b.station)));
    ClosedStationReport {
        experiment: log.experiment.clone(),
        threshold,
        cells,
    }
}
