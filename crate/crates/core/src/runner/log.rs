use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Result, RunnerError};
use crate::data::HORIZON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastRecord {
    /// Index into [`ForecastLog::stations`].
    pub station: usize,
    pub origin: NaiveDate,
    /// Days ahead, 1 to 7.
    pub horizon: u8,
    /// Original units, clamped at zero.
    pub pred: f64,
    pub truth: f64,
}

/// A problem at one origin that was logged instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incident {
    pub origin: NaiveDate,
    /// Station name for single-output models; `None` for a multi-output model.
    pub station: Option<String>,
    pub stage: String,
    pub message: String,
}

/// Wall-clock samples in seconds. Single-output cells hold one sample per
/// station and step; multi-output cells one per step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingSamples {
    pub baseline: Vec<f64>,
    pub update: Vec<f64>,
    pub simulate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastLog {
    pub experiment: String,
    pub stations: Vec<String>,
    /// Sorted by origin, station, horizon.
    pub records: Vec<ForecastRecord>,
    pub timing: TimingSamples,
    pub incidents: Vec<Incident>,
}

const HEADER: [&str; 6] = ["experiment", "station", "origin", "horizon", "pred", "truth"];

impl ForecastLog {
    pub fn new(experiment: impl Into<String>, stations: Vec<String>) -> Self {
        Self {
            experiment: experiment.into(),
            stations,
            records: Vec::new(),
            timing: TimingSamples::default(),
            incidents: Vec::new(),
        }
    }

    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| (a.origin, a.station, a.horizon).cmp(&(b.origin, b.station, b.horizon)));
    }

    pub fn origins(&self) -> Vec<NaiveDate> {
        let mut o: Vec<NaiveDate> = self.records.iter().map(|r| r.origin).collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    /// One record per (station, origin, horizon) for every origin present.
    pub fn check_complete(&self) -> Result<()> {
        let origins = self.origins();
        let expected = origins.len() * self.stations.len() * HORIZON;
        let mut seen: HashMap<(NaiveDate, usize, u8), usize> = HashMap::with_capacity(self.records.len());
        for r in &self.records {
            *seen.entry((r.origin, r.station, r.horizon)).or_default() += 1;
        }
        let mut problems = Vec::new();
        'outer: for &o in &origins {
            for s in 0..self.stations.len() {
                for h in 1..=HORIZON as u8 {
                    match seen.get(&(o, s, h)).copied().unwrap_or(0) {
                        1 => {}
                        0 => problems.push(format!("{o} {} h{h} missing", self.stations[s])),
                        n => problems.push(format!("{o} {} h{h} repeated {n}×", self.stations[s])),
                    }
                    if problems.len() >= 10 {
                        break 'outer;
                    }
                }
            }
        }
        if problems.is_empty() && self.records.len() == expected {
            Ok(())
        } else {
            Err(RunnerError::Incomplete {
                experiment: self.experiment.clone(),
                problems,
            })
        }
    }

    /// `experiment,station,origin,horizon,pred,truth`; floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                self.experiment.as_str(),
                self.stations[r.station].as_str(),
                &r.origin.to_string(),
                &r.horizon.to_string(),
                &r.pred.to_string(),
                &r.truth.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| RunnerError::Csv(e.to_string()))
    }

    /// Reads one experiment's log; station order follows first appearance.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header != HEADER {
            return Err(RunnerError::Csv(format!("expected header {}, found {}", HEADER.join(","), header.join(","))));
        }
        let mut log = ForecastLog::new(String::new(), Vec::new());
        let mut index: HashMap<String, usize> = HashMap::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(csv_err)?;
            let line = i + 2;
            let field = |k: usize| row.get(k).unwrap_or("");
            if log.experiment.is_empty() {
                log.experiment = field(0).to_string();
            } else if field(0) != log.experiment {
                return Err(RunnerError::Csv(format!("line {line}: mixes experiments {} and {}", log.experiment, field(0))));
            }
            let station = *index.entry(field(1).to_string()).or_insert_with(|| {
                log.stations.push(field(1).to_string());
                log.stations.len() - 1
            });
            let parse_err = |what: &str| RunnerError::Csv(format!("line {line}: bad {what}"));
            log.records.push(ForecastRecord {
                station,
                origin: field(2).parse().map_err(|_| parse_err("origin"))?,
                horizon: field(3).parse().map_err(|_| parse_err("horizon"))?,
                pred: field(4).parse().map_err(|_| parse_err("pred"))?,
                truth: field(5).parse().map_err(|_| parse_err("truth"))?,
            });
        }
        Ok(log)
    }
}

fn csv_err(e: csv::Error) -> RunnerError {
    RunnerError::Csv(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub experiment: String,
    /// Separately trained models: stations for single-output, 1 for multi-output.
    pub models: usize,
    /// Summed over models; the comparable cost of one full training.
    pub baseline_seconds: f64,
    pub baseline_seconds_per_model: f64,
    pub update_seconds_mean: f64,
    pub update_samples: usize,
    pub simulate_seconds_mean: f64,
    pub simulate_samples: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Aggregates the wall-clock samples of a log. Per-step means are per model,
/// so single-output figures scale with the station count.
pub fn measure_timing(log: &ForecastLog) -> TimingReport {
    let t = &log.timing;
    let models = t.baseline.len();
    let clean = |v: &[f64]| v.iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
    let baseline = clean(&t.baseline);
    TimingReport {
        experiment: log.experiment.clone(),
        models,
        baseline_seconds: baseline.iter().sum(),
        baseline_seconds_per_model: mean(&baseline),
        update_seconds_mean: mean(&clean(&t.update)),
        update_samples: t.update.len(),
        simulate_seconds_mean: mean(&clean(&t.simulate)),
        simulate_samples: t.simulate.len(),
    }
}

pub fn write_timing_csv<W: Write>(reports: &[TimingReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RunnerError::Csv(e.to_string()))
}

pub fn read_timing_csv<R: Read>(input: R) -> Result<Vec<TimingReport>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}
