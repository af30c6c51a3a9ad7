use std::ops::Range;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{CalendarSpec, DataError, DayFlags, Result};

/// Inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn len_days(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.end - self.start).num_days() as usize + 1
        }
    }
}

/// Station × day matrix of daily transaction counts over a contiguous date span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidershipPanel {
    stations: Vec<String>,
    start: NaiveDate,
    /// One row per station, one column per day.
    counts: Vec<Vec<u64>>,
    calendar: Vec<DayFlags>,
}

impl RidershipPanel {
    pub fn new(
        stations: Vec<String>,
        start: NaiveDate,
        counts: Vec<Vec<u64>>,
        calendar: &CalendarSpec,
    ) -> Result<Self> {
        if stations.is_empty() {
            return Err(DataError::InvalidPanel("no stations".into()));
        }
        if counts.len() != stations.len() {
            return Err(DataError::InvalidPanel(format!(
                "{} count rows for {} stations",
                counts.len(),
                stations.len()
            )));
        }
        let n_days = counts[0].len();
        if n_days == 0 {
            return Err(DataError::InvalidPanel("no days".into()));
        }
        if let Some((i, row)) = counts.iter().enumerate().find(|(_, r)| r.len() != n_days) {
            return Err(DataError::InvalidPanel(format!(
                "station {} has {} days, expected {n_days}",
                stations[i],
                row.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = stations.iter().find(|s| !seen.insert(s.as_str())) {
            return Err(DataError::InvalidPanel(format!("duplicate station {dup}")));
        }
        let calendar = (0..n_days)
            .map(|i| calendar.flags(start + Days::new(i as u64)))
            .collect();
        Ok(Self {
            stations,
            start,
            counts,
            calendar,
        })
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.date(self.n_days() - 1)
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Days::new(day as u64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.n_days()).map(|i| self.date(i))
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.n_days()).then_some(offset as usize)
    }

    pub fn flags(&self, day: usize) -> DayFlags {
        self.calendar[day]
    }

    pub fn count(&self, station: usize, day: usize) -> u64 {
        self.counts[station][day]
    }

    pub fn series(&self, station: usize) -> &[u64] {
        &self.counts[station]
    }

    /// Day-index range covered by `range`, failing if it leaves the panel.
    pub fn index_range(&self, range: DateRange) -> Result<Range<usize>> {
        if range.is_empty() {
            return Err(DataError::EmptyTrainingRange);
        }
        match (self.day_index(range.start), self.day_index(range.end)) {
            (Some(a), Some(b)) => Ok(a..b + 1),
            _ => Err(DataError::RangeOutsidePanel {
                start: range.start,
                end: range.end,
                panel_start: self.start,
                panel_end: self.end(),
            }),
        }
    }

    /// Copy with the given day's count replaced; used by leakage tests.
    pub fn with_count(&self, station: usize, day: usize, value: u64) -> Self {
        let mut out = self.clone();
        out.counts[station][day] = value;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn validates_shape() {
        let cal = CalendarSpec::default();
        assert!(RidershipPanel::new(vec!["a".into()], d("2020-01-01"), vec![], &cal).is_err());
        assert!(RidershipPanel::new(
            vec!["a".into(), "b".into()],
            d("2020-01-01"),
            vec![vec![1, 2], vec![3]],
            &cal
        )
        .is_err());
        assert!(RidershipPanel::new(
            vec!["a".into(), "a".into()],
            d("2020-01-01"),
            vec![vec![1], vec![3]],
            &cal
        )
        .is_err());
    }

    #[test]
    fn index_range_maps_dates() {
        let cal = CalendarSpec::default();
        let p = RidershipPanel::new(vec!["a".into()], d("2020-01-01"), vec![vec![0; 10]], &cal).unwrap();
        assert_eq!(p.end(), d("2020-01-10"));
        assert_eq!(
            p.index_range(DateRange::new(d("2020-01-03"), d("2020-01-05"))).unwrap(),
            2..5
        );
        assert!(p.index_range(DateRange::new(d("2019-12-31"), d("2020-01-05"))).is_err());
        assert!(matches!(
            p.index_range(DateRange::new(d("2020-01-05"), d("2020-01-03"))),
            Err(DataError::EmptyTrainingRange)
        ));
        // 2020-01-04 is a Saturday, 2020-01-05 a Sunday.
        assert!(p.flags(3).saturday);
        assert!(p.flags(4).holiday);
    }
}
