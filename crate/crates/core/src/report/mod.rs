//! Charts and tables from metric series, regressions and timings.
//!
//! Every SVG is written next to a CSV holding the exact plotted numbers.
//! Output layout under the report root:
//!
//! ```text
//! summary.txt, summary.csv          best cell per condition (no timings)
//! evolution/<strategy>-<output>.*   rolling MAAPE, one panel per design
//! conditions/<condition>.*          effect bars with 95% intervals, all cells
//! timing/timing.*, timing/summary.txt
//! <experiment>/evolution.*, conditions.*, closed_stations.*
//! ```
//!
//! Wall-clock figures only appear under `timing/`, so everything else is
//! reproducible byte for byte.

mod charts;
mod summary;
mod svg;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use charts::{render_closed_stations, render_condition_bars, render_evolution, render_timing};
pub use summary::{render_summary, summarize, summary_csv, CellEstimate, SummaryRow};

use crate::analysis::{ConditionRegression, ConditionSpec};
use crate::metrics::{closed_station_report, MaapeSeries, DEFAULT_CLOSED_THRESHOLD};
use crate::runner::{ForecastLog, TimingReport};

#[derive(Debug, Error)]
#[error("{}: {source}", path.display())]
pub struct ReportError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Stable,
    Covid,
    Protest,
    Saturday,
    Holidays,
}

impl Condition {
    pub const ALL: [Self; 5] = [Self::Stable, Self::Covid, Self::Protest, Self::Saturday, Self::Holidays];
    /// Rows of the summary table.
    pub const HEADLINE: [Self; 3] = [Self::Stable, Self::Covid, Self::Protest];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stable => "stable",
            Self::Covid => "covid",
            Self::Protest => "protest",
            Self::Saturday => "saturday",
            Self::Holidays => "holidays",
        }
    }

    /// Regression term whose estimate measures the condition.
    pub fn term(self) -> &'static str {
        match self {
            Self::Stable => "Intercept",
            other => other.as_str(),
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Stable => "Stable",
            Self::Covid => "COVID-19",
            Self::Protest => "Protest",
            Self::Saturday => "Saturday",
            Self::Holidays => "Holidays",
        }
    }
}

/// An SVG chart and its data sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub stem: String,
    pub svg: String,
    pub csv: String,
}

impl Artifact {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
        let svg = dir.join(format!("{}.svg", self.stem));
        let csv = dir.join(format!("{}.csv", self.stem));
        write_file(&svg, &self.svg)?;
        write_file(&csv, &self.csv)?;
        Ok(vec![svg, csv])
    }

    fn named(mut self, stem: impl Into<String>) -> Self {
        self.stem = stem.into();
        self
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    let err = |source| ReportError {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(err)?;
    }
    fs::write(path, contents).map_err(err)
}

pub struct ReportInputs<'a> {
    pub series: &'a [MaapeSeries],
    pub fits: &'a [ConditionRegression],
    pub timings: &'a [TimingReport],
    pub logs: &'a [ForecastLog],
    pub conditions: &'a ConditionSpec,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub files: Vec<PathBuf>,
}

/// `strategy-output` part of an experiment id.
fn design_of(id: &str) -> &str {
    id.split_once('-').map_or(id, |(_, rest)| rest)
}

/// Writes every chart, sidecar and table under `root`.
pub fn write_report(root: &Path, inputs: &ReportInputs) -> Result<ReportBundle, ReportError> {
    let mut files = Vec::new();
    let experiments: BTreeSet<&str> = inputs
        .series
        .iter()
        .map(|s| s.experiment.as_str())
        .chain(inputs.fits.iter().map(|f| f.experiment.as_str()))
        .chain(inputs.logs.iter().map(|l| l.experiment.as_str()))
        .collect();
    for exp in &experiments {
        let dir = root.join(exp);
        let series: Vec<MaapeSeries> = inputs.series.iter().filter(|s| s.experiment == *exp).cloned().collect();
        if !series.is_empty() {
            files.extend(render_evolution(&series, inputs.conditions, &format!("{exp}: rolling MAAPE")).write(&dir)?);
        }
        let fits: Vec<ConditionRegression> = inputs.fits.iter().filter(|f| f.experiment == *exp).cloned().collect();
        if !fits.is_empty() {
            files.extend(render_condition_bars(&fits, &Condition::ALL, &format!("{exp}: condition effects")).write(&dir)?);
        }
        if let Some(log) = inputs.logs.iter().find(|l| l.experiment == *exp) {
            let closed = closed_station_report(log, DEFAULT_CLOSED_THRESHOLD);
            files.extend(render_closed_stations(log, &closed).write(&dir)?);
        }
    }
    let designs: BTreeSet<&str> = inputs.series.iter().map(|s| design_of(&s.experiment)).collect();
    for design in designs {
        let group: Vec<MaapeSeries> =
            inputs.series.iter().filter(|s| design_of(&s.experiment) == design).cloned().collect();
        let chart = render_evolution(&group, inputs.conditions, &format!("Rolling MAAPE: {design}"));
        files.extend(chart.named(design).write(&root.join("evolution"))?);
    }
    if !inputs.fits.is_empty() {
        for c in Condition::ALL {
            let chart = render_condition_bars(inputs.fits, &[c], &format!("MAAPE: {}", c.title()));
            files.extend(chart.named(c.as_str()).write(&root.join("conditions"))?);
        }
        let path = root.join("summary.txt");
        write_file(&path, &render_summary(inputs.fits, None))?;
        files.push(path);
        let path = root.join("summary.csv");
        write_file(&path, &summary_csv(&summarize(inputs.fits, None)))?;
        files.push(path);
    }
    if !inputs.timings.is_empty() {
        let dir = root.join("timing");
        files.extend(render_timing(inputs.timings).write(&dir)?);
        if !inputs.fits.is_empty() {
            let path = dir.join("summary.txt");
            write_file(&path, &render_summary(inputs.fits, Some(inputs.timings)))?;
            files.push(path);
        }
    }
    files.sort();
    Ok(ReportBundle { files })
}
