use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{CalendarSpec, DateRange};

/// Column names of the design matrix, in order.
pub const REGRESSORS: [&str; 7] = [
    "Intercept",
    "covid",
    "protest",
    "saturday",
    "holidays",
    "covid:saturday",
    "covid:holidays",
];

/// Date ranges of the disrupted conditions; ranges may overlap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    #[serde(default)]
    pub covid: Vec<DateRange>,
    #[serde(default)]
    pub protest: Vec<DateRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionLabels {
    pub dates: Vec<NaiveDate>,
    pub covid: Vec<bool>,
    pub protest: Vec<bool>,
    pub saturday: Vec<bool>,
    pub holidays: Vec<bool>,
}

impl ConditionLabels {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Row `i` of the design matrix, ordered as [`REGRESSORS`].
    pub fn row(&self, i: usize) -> [f64; 7] {
        let f = |b: bool| if b { 1.0 } else { 0.0 };
        let (c, s, h) = (f(self.covid[i]), f(self.saturday[i]), f(self.holidays[i]));
        [1.0, c, f(self.protest[i]), s, h, c * s, c * h]
    }
}

pub fn label_conditions(dates: &[NaiveDate], spec: &ConditionSpec, calendar: &CalendarSpec) -> ConditionLabels {
    let inside = |ranges: &[DateRange], d: NaiveDate| ranges.iter().any(|r| r.contains(d));
    let flags: Vec<_> = dates.iter().map(|&d| calendar.flags(d)).collect();
    ConditionLabels {
        dates: dates.to_vec(),
        covid: dates.iter().map(|&d| inside(&spec.covid, d)).collect(),
        protest: dates.iter().map(|&d| inside(&spec.protest, d)).collect(),
        saturday: flags.iter().map(|f| f.saturday).collect(),
        holidays: flags.iter().map(|f| f.holiday).collect(),
    }
}
