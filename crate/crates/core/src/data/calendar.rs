use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::{DataError, Result};

/// Number of entries produced by [`temporal_features`].
pub const FEATURE_WIDTH: usize = 6;

/// Holiday calendar. Sundays count as holidays unless disabled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarSpec {
    pub holiday_dates: BTreeSet<NaiveDate>,
    pub treat_sundays_as_holiday: bool,
}

impl Default for CalendarSpec {
    fn default() -> Self {
        Self {
            holiday_dates: BTreeSet::new(),
            treat_sundays_as_holiday: true,
        }
    }
}

impl CalendarSpec {
    pub fn new(holidays: impl IntoIterator<Item = NaiveDate>, treat_sundays_as_holiday: bool) -> Self {
        Self {
            holiday_dates: holidays.into_iter().collect(),
            treat_sundays_as_holiday,
        }
    }

    /// Parses one ISO date per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, treat_sundays_as_holiday: bool) -> Result<Self> {
        let mut holidays = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| DataError::Malformed {
                line: i as u64 + 1,
                message: format!("invalid holiday date {line:?}: {e}"),
            })?;
            holidays.insert(date);
        }
        Ok(Self {
            holiday_dates: holidays,
            treat_sundays_as_holiday,
        })
    }

    pub fn from_file(path: &Path, treat_sundays_as_holiday: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, treat_sundays_as_holiday)
    }

    pub fn flags(&self, date: NaiveDate) -> DayFlags {
        let weekday = date.weekday();
        DayFlags {
            saturday: weekday == Weekday::Sat,
            holiday: self.holiday_dates.contains(&date)
                || (self.treat_sundays_as_holiday && weekday == Weekday::Sun),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DayFlags {
    pub saturday: bool,
    pub holiday: bool,
}

/// `[is_saturday, is_holiday, sin/cos weekly phase, sin/cos yearly phase]`.
///
/// Day of week counts from Monday = 0; day of year is the 1-based ordinal.
pub fn temporal_features(date: NaiveDate, flags: DayFlags) -> [f64; FEATURE_WIDTH] {
    let dow = date.weekday().num_days_from_monday() as f64;
    let doy = date.ordinal() as f64;
    let weekly = 2.0 * PI * dow / 7.0;
    let yearly = 2.0 * PI * doy / 365.25;
    [
        f64::from(u8::from(flags.saturday)),
        f64::from(u8::from(flags.holiday)),
        weekly.sin(),
        weekly.cos(),
        yearly.sin(),
        yearly.cos(),
    ]
}
