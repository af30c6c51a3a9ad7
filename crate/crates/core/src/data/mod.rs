//! Ridership panels and everything needed to turn them into training data.

mod calendar;
mod csv_io;
mod normalize;
mod panel;
mod synthetic;
mod windows;

pub use calendar::{temporal_features, CalendarSpec, DayFlags, FEATURE_WIDTH};
pub use csv_io::{ingest_csv, read_panel_csv, write_panel_csv, IngestReport, Ingested};
pub use normalize::NormalizationState;
pub use panel::{DateRange, RidershipPanel};
pub use synthetic::{generate_synthetic, Shock, SyntheticScenario};
pub use windows::{
    make_windows, valid_origins, window_at, OutputDesign, SupervisedWindow, HORIZON, LOOKBACK,
    MIN_PANEL_DAYS,
};

use std::path::PathBuf;

use chrono::NaiveDate;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: negative count {count} for station {station} on {date}")]
    NegativeCount {
        line: u64,
        station: String,
        date: NaiveDate,
        count: i64,
    },
    #[error("line {line}: duplicate row for station {station} on {date}")]
    DuplicateCell {
        line: u64,
        station: String,
        date: NaiveDate,
    },
    #[error("input contains no data rows")]
    Empty,
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("empty training range")]
    EmptyTrainingRange,
    #[error("range {start}..={end} is outside the panel ({panel_start}..={panel_end})")]
    RangeOutsidePanel {
        start: NaiveDate,
        end: NaiveDate,
        panel_start: NaiveDate,
        panel_end: NaiveDate,
    },
    #[error("panel has {days} days; at least {minimum} are required (21-day lookback + 7-day target)")]
    PanelTooShort { days: usize, minimum: usize },
    #[error("invalid synthetic scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;
