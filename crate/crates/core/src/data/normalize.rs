use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DataError, DateRange, Result, RidershipPanel};

/// Per-station divide-by-training-max scaling with the floor pinned at zero,
/// so that zero transactions stay exactly zero after normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    scales: Vec<f64>,
    /// Stations whose training counts were all zero; their scale is 1.
    flagged: Vec<bool>,
}

impl NormalizationState {
    pub fn fit(panel: &RidershipPanel, training: DateRange) -> Result<Self> {
        let days = panel.index_range(training)?;
        Self::fit_days(panel, days)
    }

    pub fn fit_days(panel: &RidershipPanel, days: Range<usize>) -> Result<Self> {
        if days.is_empty() {
            return Err(DataError::EmptyTrainingRange);
        }
        if days.end > panel.n_days() {
            return Err(DataError::InvalidPanel(format!(
                "training days {days:?} exceed panel length {}",
                panel.n_days()
            )));
        }
        let mut scales = Vec::with_capacity(panel.n_stations());
        let mut flagged = Vec::with_capacity(panel.n_stations());
        for s in 0..panel.n_stations() {
            let max = panel.series(s)[days.clone()].iter().copied().max().unwrap_or(0);
            flagged.push(max == 0);
            scales.push(if max == 0 { 1.0 } else { max as f64 });
        }
        Ok(Self { scales, flagged })
    }

    pub fn from_scales(scales: Vec<f64>) -> Self {
        let flagged = vec![false; scales.len()];
        Self { scales, flagged }
    }

    pub fn scale(&self, station: usize) -> f64 {
        self.scales[station]
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn is_flagged(&self, station: usize) -> bool {
        self.flagged[station]
    }

    pub fn flagged_stations(&self) -> impl Iterator<Item = usize> + '_ {
        self.flagged.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i)
    }

    pub fn normalize(&self, station: usize, value: f64) -> f64 {
        value / self.scales[station]
    }

    pub fn denormalize(&self, station: usize, value: f64) -> f64 {
        value * self.scales[station]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CalendarSpec;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn panel(rows: Vec<Vec<u64>>) -> RidershipPanel {
        let names = (0..rows.len()).map(|i| format!("s{i}")).collect();
        RidershipPanel::new(names, NaiveDate::from_ymd_opt(2018, 1, 1).unwrap(), rows, &CalendarSpec::default()).unwrap()
    }

    #[test]
    fn divides_by_training_max() {
        let p = panel(vec![vec![10, 1000, 500, 4000]]);
        let n = NormalizationState::fit_days(&p, 0..3).unwrap();
        assert_eq!(n.scale(0), 1000.0);
        assert_eq!(n.normalize(0, 250.0), 0.25);
        assert_eq!(n.normalize(0, 0.0), 0.0);
        // test-period values above the training max are not clipped
        assert_eq!(n.normalize(0, 4000.0), 4.0);
    }

    #[test]
    fn all_zero_station_is_flagged() {
        let p = panel(vec![vec![0, 0, 0, 9], vec![1, 2, 3, 4]]);
        let n = NormalizationState::fit_days(&p, 0..3).unwrap();
        assert_eq!(n.scale(0), 1.0);
        assert!(n.is_flagged(0));
        assert!(!n.is_flagged(1));
        assert_eq!(n.normalize(0, 7.0), 7.0);
        assert_eq!(n.flagged_stations().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn empty_range_is_error() {
        let p = panel(vec![vec![1, 2]]);
        assert!(matches!(
            NormalizationState::fit_days(&p, 1..1),
            Err(DataError::EmptyTrainingRange)
        ));
    }

    proptest! {
        #[test]
        fn denormalize_inverts_normalize(
            rows in prop::collection::vec(prop::collection::vec(0u64..100_000, 8), 1..6),
            x in 0.0f64..1e7,
        ) {
            let p = panel(rows);
            let n = NormalizationState::fit_days(&p, 0..5).unwrap();
            for s in 0..p.n_stations() {
                let back = n.denormalize(s, n.normalize(s, x));
                prop_assert!((back - x).abs() <= 1e-9 * x.max(f64::MIN_POSITIVE));
            }
        }
    }
}
