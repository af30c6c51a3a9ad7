use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{temporal_features, DataError, NormalizationState, Result, RidershipPanel, FEATURE_WIDTH};

/// Days of history fed to every model.
pub const LOOKBACK: usize = 21;
/// Days forecast from each origin.
pub const HORIZON: usize = 7;
pub const MIN_PANEL_DAYS: usize = LOOKBACK + HORIZON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputDesign {
    /// One model per station.
    Single,
    /// One model for all stations jointly.
    Multi,
}

impl OutputDesign {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Multi => "multi",
        }
    }
}

/// One supervised example anchored at a forecast origin.
///
/// Blocks are station-major: `lookback[s * LOOKBACK + k]` is station `s`
/// on day `origin - LOOKBACK + k`, `target[s * HORIZON + h]` is station `s`
/// on day `origin + h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedWindow {
    pub origin: usize,
    pub origin_day: NaiveDate,
    pub stations: Vec<usize>,
    pub lookback: Vec<f64>,
    /// One feature row per target day.
    pub temporal_features: [[f64; FEATURE_WIDTH]; HORIZON],
    pub target: Vec<f64>,
}

impl SupervisedWindow {
    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    /// Features of the origin day, which fix the weekday phase of the whole target week.
    pub fn origin_features(&self) -> &[f64; FEATURE_WIDTH] {
        &self.temporal_features[0]
    }
}

/// Origins with a full lookback and a full target inside a `n_days` panel.
pub fn valid_origins(n_days: usize, stride: usize) -> impl Iterator<Item = usize> {
    let stride = stride.max(1);
    let last = n_days.checked_sub(HORIZON);
    (LOOKBACK..=last.unwrap_or(0))
        .step_by(stride)
        .take_while(move |_| last.is_some())
}

/// Builds the window at `origin` for `stations`.
///
/// The caller guarantees `LOOKBACK <= origin` and `origin + HORIZON <= n_days`.
pub fn window_at(
    panel: &RidershipPanel,
    norm: &NormalizationState,
    stations: &[usize],
    origin: usize,
) -> SupervisedWindow {
    debug_assert!(origin >= LOOKBACK && origin + HORIZON <= panel.n_days());
    let mut lookback = Vec::with_capacity(stations.len() * LOOKBACK);
    let mut target = Vec::with_capacity(stations.len() * HORIZON);
    for &s in stations {
        let series = panel.series(s);
        lookback.extend(series[origin - LOOKBACK..origin].iter().map(|&c| norm.normalize(s, c as f64)));
        target.extend(series[origin..origin + HORIZON].iter().map(|&c| norm.normalize(s, c as f64)));
    }
    let mut temporal = [[0.0; FEATURE_WIDTH]; HORIZON];
    for (h, row) in temporal.iter_mut().enumerate() {
        *row = temporal_features(panel.date(origin + h), panel.flags(origin + h));
    }
    SupervisedWindow {
        origin,
        origin_day: panel.date(origin),
        stations: stations.to_vec(),
        lookback,
        temporal_features: temporal,
        target,
    }
}

/// All windows of the panel, grouped into streams: one stream per station for
/// the single-output design, a single all-station stream for multi-output.
pub fn make_windows(
    panel: &RidershipPanel,
    norm: &NormalizationState,
    design: OutputDesign,
    stride: usize,
) -> Result<Vec<Vec<SupervisedWindow>>> {
    if panel.n_days() < MIN_PANEL_DAYS {
        return Err(DataError::PanelTooShort {
            days: panel.n_days(),
            minimum: MIN_PANEL_DAYS,
        });
    }
    let groups: Vec<Vec<usize>> = match design {
        OutputDesign::Single => (0..panel.n_stations()).map(|s| vec![s]).collect(),
        OutputDesign::Multi => vec![(0..panel.n_stations()).collect()],
    };
    Ok(groups
        .iter()
        .map(|stations| {
            valid_origins(panel.n_days(), stride)
                .map(|o| window_at(panel, norm, stations, o))
                .collect()
        })
        .collect())
}
