//! Config-driven `synth | ingest → run → analyze → report` workflow.
//!
//! All outputs live under the configured root:
//!
//! ```text
//! manifest.json                     config echo, command history, SHA-256 of every artifact
//! data/panel.csv                    date,station_id,count
//! data/scenario.json                synthetic scenario echo (synth)
//! data/ingest_report.json           repairs made while ingesting (ingest)
//! logs/<id>.csv                     experiment,station,origin,horizon,pred,truth
//! logs/<id>.incidents.csv           failures that were logged and carried forward
//! logs/<id>.audit.json              parameter checksums around every forecast
//! timing/timing.csv                 wall-clock timings
//! metrics/maape.csv                 experiment,date,maape,rolling7
//! metrics/closed_stations.csv       forecasts for zero-transaction station-days
//! metrics/closed_summary.csv
//! analysis/regressions.csv          one row per experiment and term
//! analysis/tables.txt               fixed-width coefficient tables
//! report/                           charts and summary tables
//! checkpoints/<id>/                 resumable state of unfinished cells
//! ```
//!
//! Only `manifest.json`, `timing/` and `report/timing/` hold wall-clock
//! data; every other file is a pure function of the config.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::Utc;
use thiserror::Error;

pub use config::{DataSection, GridSection, OutputSection, PipelineConfig};
pub use manifest::{sha256_file, CommandRecord, RunManifest, MANIFEST};

use crate::analysis::{fit_conditions, label_conditions, render_table, write_regressions_csv, AnalysisError, ConditionRegression};
use crate::data::{generate_synthetic, ingest_csv, read_panel_csv, write_panel_csv, DataError, IngestReport, RidershipPanel};
use crate::metrics::{closed_station_report, ClosedStationReport, MaapeSeries, MetricsError, DEFAULT_CLOSED_THRESHOLD};
use crate::report::{write_report, ReportBundle, ReportError, ReportInputs};
use crate::data::OutputDesign;
use crate::runner::{
    measure_timing, read_timing_csv, run_grid, write_timing_csv, ExperimentConfig, ForecastLog, GridSpec, RunOptions,
    RunnerError, Strategy, TimingReport,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("missing inputs: {}", .0.join(", "))]
    MissingInputs(Vec<String>),
    #[error(transparent)]
    Data(DataError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Runner(RunnerError),
    #[error(transparent)]
    Metrics(MetricsError),
    #[error("{experiment}: {source}")]
    Analysis {
        experiment: String,
        #[source]
        source: AnalysisError,
    },
    #[error(transparent)]
    Report(ReportError),
    #[error("verification failed: {}", .0.join("; "))]
    Verify(Vec<String>),
    #[error("{} experiment(s) failed: {}", .0.len(), .0.join("; "))]
    CellsFailed(Vec<String>),
}

impl PipelineError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 usage or config, 3 data, 4 model failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::MissingInputs(_) => 2,
            Self::Runner(RunnerError::InvalidConfig(_)) => 2,
            Self::Analysis {
                source: AnalysisError::RankDeficient { .. } | AnalysisError::TooFewObservations { .. },
                ..
            } => 2,
            Self::Data(_) | Self::Io { .. } | Self::Metrics(_) | Self::Report(_) | Self::Verify(_) => 3,
            Self::Runner(RunnerError::Data(_) | RunnerError::Csv(_) | RunnerError::Io { .. }) => 3,
            Self::Runner(_) | Self::Analysis { .. } | Self::CellsFailed(_) => 4,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    pub jobs: Option<usize>,
    /// Stop every cell after this many origins, keeping its checkpoint.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutcome {
    pub completed: Vec<String>,
    /// Cells stopped early with resumable checkpoints.
    pub interrupted: Vec<String>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub config_path: Option<PathBuf>,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(|e| PipelineError::io(p, e))?;
    }
    fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(|e| PipelineError::io(p, e))?;
    }
    fs::File::create(path).map_err(|e| PipelineError::io(path, e))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| PipelineError::io(path, e))
}

/// Canonical table order: single-static, multi-static, single-online, multi-online.
const DESIGNS: [(Strategy, OutputDesign, &str); 4] = [
    (Strategy::Static, OutputDesign::Single, "single-output, static training"),
    (Strategy::Static, OutputDesign::Multi, "multi-output, static training"),
    (Strategy::Online, OutputDesign::Single, "single-output, online training"),
    (Strategy::Online, OutputDesign::Multi, "multi-output, online training"),
];

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self {
            config,
            config_path: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self {
            config: PipelineConfig::load(path)?,
            config_path: Some(path.to_path_buf()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.config.output.root
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root().join(rel)
    }

    fn manifest(&self) -> Result<RunManifest> {
        Ok(RunManifest::load(self.root())?.unwrap_or_else(|| RunManifest::new(self.config_path.as_deref(), &self.config)))
    }

    /// Runs `body`, then records the command and refreshes artifact digests.
    fn record<T>(&self, command: &str, body: impl FnOnce(&mut RunManifest) -> Result<T>) -> Result<T> {
        let started = Utc::now();
        fs::create_dir_all(self.root()).map_err(|e| PipelineError::io(self.root(), e))?;
        let mut manifest = self.manifest()?;
        manifest.config = self.config.clone();
        manifest.config_path = self.config_path.clone().or(manifest.config_path);
        manifest.seed = self.config.seed;
        let out = body(&mut manifest);
        manifest.commands.push(CommandRecord {
            command: command.to_string(),
            started,
            finished: Utc::now(),
        });
        manifest.refresh(self.root())?;
        manifest.save(self.root())?;
        out
    }

    /// Generates the configured synthetic panel into `data/panel.csv`.
    pub fn synth(&self) -> Result<RidershipPanel> {
        let scenario = self
            .config
            .data
            .synthetic
            .clone()
            .ok_or_else(|| PipelineError::Usage("synth needs a [data.synthetic] section".into()))?;
        scenario.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        self.record("synth", |_| {
            let panel = generate_synthetic(&scenario, self.config.seed).map_err(PipelineError::Data)?;
            let path = self.path("data/panel.csv");
            write_panel_csv(&panel, create(&path)?).map_err(|e| PipelineError::io(&path, e))?;
            write(&self.path("data/scenario.json"), serde_json::to_vec_pretty(&scenario).expect("scenario serialises"))?;
            Ok(panel)
        })
    }

    /// Reads `data.panel`, repairs gaps and writes the dense panel to `data/panel.csv`.
    pub fn ingest(&self) -> Result<IngestReport> {
        let source = self
            .config
            .data
            .panel
            .clone()
            .ok_or_else(|| PipelineError::Usage("ingest needs data.panel".into()))?;
        let calendar = self.config.calendar()?;
        self.record("ingest", |_| {
            let ingested = ingest_csv(&source, &calendar).map_err(PipelineError::Data)?;
            let path = self.path("data/panel.csv");
            write_panel_csv(&ingested.panel, create(&path)?).map_err(|e| PipelineError::io(&path, e))?;
            write(
                &self.path("data/ingest_report.json"),
                serde_json::to_vec_pretty(&ingested.report).expect("report serialises"),
            )?;
            Ok(ingested.report)
        })
    }

    pub fn load_panel(&self) -> Result<RidershipPanel> {
        let path = self.path("data/panel.csv");
        if !path.exists() {
            return Err(PipelineError::MissingInputs(vec![format!(
                "{} (run `synth` or `ingest` first)",
                path.display()
            )]));
        }
        let calendar = self.config.calendar()?;
        Ok(read_panel_csv(open(&path)?, &calendar).map_err(PipelineError::Data)?.panel)
    }

    /// Validates every selected cell, then runs the grid. Failed cells are
    /// reported after all others have finished.
    pub fn run(&self, grid: &GridSpec, settings: &RunSettings) -> Result<RunOutcome> {
        let cells = self.config.experiments(grid)?;
        if self.config.output.checkpoint_every == 0 {
            return Err(PipelineError::Usage("output.checkpoint_every must be positive".into()));
        }
        let panel = self.load_panel()?;
        self.record("run", |manifest| {
            let opts = RunOptions {
                checkpoint_dir: Some(self.path("checkpoints")),
                checkpoint_every: self.config.output.checkpoint_every,
                stop_after: settings.stop_after,
                jobs: settings.jobs,
            };
            let results = run_grid(&panel, &cells, &opts);
            let mut outcome = RunOutcome::default();
            let mut failed = Vec::new();
            let mut timings: BTreeMap<String, TimingReport> = BTreeMap::new();
            let timing_path = self.path("timing/timing.csv");
            if timing_path.exists() {
                for t in read_timing_csv(open(&timing_path)?).map_err(PipelineError::Runner)? {
                    timings.insert(t.experiment.clone(), t);
                }
            }
            for (cfg, result) in cells.iter().zip(results) {
                let id = cfg.id();
                match result {
                    Ok(run) => {
                        let dir = self.path("logs");
                        let p = dir.join(format!("{id}.csv"));
                        run.log.write_csv(create(&p)?).map_err(PipelineError::Runner)?;
                        let p = dir.join(format!("{id}.incidents.csv"));
                        let mut w = csv::Writer::from_writer(create(&p)?);
                        w.write_record(["origin", "station", "stage", "message"])
                            .map_err(|e| PipelineError::io(&p, e.into()))?;
                        for i in &run.log.incidents {
                            w.write_record([i.origin.to_string(), i.station.clone().unwrap_or_default(), i.stage.clone(), i.message.clone()])
                                .map_err(|e| PipelineError::io(&p, e.into()))?;
                        }
                        w.flush().map_err(|e| PipelineError::io(&p, e))?;
                        write(
                            &dir.join(format!("{id}.audit.json")),
                            serde_json::to_vec_pretty(&run.audit).expect("audit serialises"),
                        )?;
                        timings.insert(id.clone(), measure_timing(&run.log));
                        let ckpt = self.path("checkpoints").join(&id);
                        if ckpt.exists() {
                            fs::remove_dir_all(&ckpt).map_err(|e| PipelineError::io(&ckpt, e))?;
                        }
                        if !manifest.experiments.iter().any(|e| e.id() == id) {
                            manifest.experiments.push(cfg.clone());
                        }
                        outcome.completed.push(id);
                    }
                    Err(RunnerError::Interrupted { .. }) => outcome.interrupted.push(id),
                    Err(e) => failed.push(e.to_string()),
                }
            }
            sort_experiments(&mut manifest.experiments);
            let mut ordered: Vec<TimingReport> =
                manifest.experiments.iter().filter_map(|e| timings.remove(&e.id())).collect();
            ordered.extend(timings.into_values());
            if !ordered.is_empty() {
                write_timing_csv(&ordered, create(&timing_path)?).map_err(PipelineError::Runner)?;
            }
            let ckpts = self.path("checkpoints");
            if ckpts.exists() && fs::read_dir(&ckpts).map(|mut d| d.next().is_none()).unwrap_or(false) {
                let _ = fs::remove_dir(&ckpts);
            }
            if failed.is_empty() {
                Ok(outcome)
            } else {
                Err(PipelineError::CellsFailed(failed))
            }
        })
    }

    fn logged_experiments(&self) -> Result<Vec<ExperimentConfig>> {
        let manifest = self.manifest()?;
        if manifest.experiments.is_empty() {
            return Err(PipelineError::MissingInputs(vec!["forecast logs (run `run` first)".into()]));
        }
        let missing: Vec<String> = manifest
            .experiments
            .iter()
            .map(|e| self.path(&format!("logs/{}.csv", e.id())))
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(PipelineError::MissingInputs(missing));
        }
        Ok(manifest.experiments)
    }

    fn read_log(&self, id: &str) -> Result<ForecastLog> {
        let mut log = ForecastLog::read_csv(open(&self.path(&format!("logs/{id}.csv")))?).map_err(PipelineError::Runner)?;
        log.experiment = id.to_string();
        Ok(log)
    }

    /// Daily MAAPE, closed-station tables and condition regressions.
    pub fn analyze(&self) -> Result<Vec<ConditionRegression>> {
        let spec = self
            .config
            .conditions
            .clone()
            .ok_or_else(|| PipelineError::Usage("analyze needs a [conditions] section".into()))?;
        let experiments = self.logged_experiments()?;
        let calendar = self.config.calendar()?;
        self.record("analyze", |_| {
            let mut series = Vec::new();
            let mut closed: Vec<ClosedStationReport> = Vec::new();
            let mut fits = Vec::new();
            for e in &experiments {
                let id = e.id();
                let log = self.read_log(&id)?;
                let s = MaapeSeries::from_log(&log).map_err(PipelineError::Metrics)?;
                let labels = label_conditions(&s.dates, &spec, &calendar);
                let fit = fit_conditions(&id, &s.system, &labels).map_err(|source| PipelineError::Analysis {
                    experiment: id.clone(),
                    source,
                })?;
                closed.push(closed_station_report(&log, DEFAULT_CLOSED_THRESHOLD));
                series.push(s);
                fits.push(fit);
            }
            MaapeSeries::write_csv(&series, create(&self.path("metrics/maape.csv"))?).map_err(PipelineError::Metrics)?;
            ClosedStationReport::write_csv(&closed, create(&self.path("metrics/closed_stations.csv"))?)
                .map_err(PipelineError::Metrics)?;
            let mut summary = String::from("experiment,closed_cells,threshold,nonzero_fraction,mean_prediction\n");
            for c in &closed {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                summary.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.experiment,
                    c.cells.len(),
                    c.threshold,
                    opt(c.nonzero_fraction()),
                    opt(c.mean_prediction())
                ));
            }
            write(&self.path("metrics/closed_summary.csv"), summary)?;
            write_regressions_csv(&fits, create(&self.path("analysis/regressions.csv"))?).map_err(|source| {
                PipelineError::Analysis {
                    experiment: "all".into(),
                    source,
                }
            })?;
            let mut tables = String::new();
            for (strategy, output, title) in DESIGNS {
                let group: Vec<ConditionRegression> = experiments
                    .iter()
                    .zip(&fits)
                    .filter(|(e, _)| e.strategy == strategy && e.output == output)
                    .map(|(_, f)| f.clone())
                    .collect();
                if !group.is_empty() {
                    tables.push_str(&render_table(&format!("Condition effects on daily MAAPE: {title}"), &group));
                    tables.push('\n');
                }
            }
            write(&self.path("analysis/tables.txt"), tables)?;
            Ok(fits)
        })
    }

    /// Charts and summary tables from the analysis outputs.
    pub fn report(&self) -> Result<ReportBundle> {
        let needed = ["metrics/maape.csv", "analysis/regressions.csv"];
        let missing: Vec<String> = needed
            .iter()
            .map(|r| self.path(r))
            .filter(|p| !p.exists())
            .map(|p| format!("{} (run `analyze` first)", p.display()))
            .collect();
        if !missing.is_empty() {
            return Err(PipelineError::MissingInputs(missing));
        }
        let experiments = self.logged_experiments()?;
        let conditions = self.config.conditions.clone().unwrap_or_default();
        self.record("report", |_| {
            let series = MaapeSeries::read_csv(open(&self.path("metrics/maape.csv"))?).map_err(PipelineError::Metrics)?;
            let fits = crate::analysis::read_regressions_csv(open(&self.path("analysis/regressions.csv"))?).map_err(
                |source| PipelineError::Analysis {
                    experiment: "all".into(),
                    source,
                },
            )?;
            let timing_path = self.path("timing/timing.csv");
            let timings = if timing_path.exists() {
                read_timing_csv(open(&timing_path)?).map_err(PipelineError::Runner)?
            } else {
                Vec::new()
            };
            let logs = experiments.iter().map(|e| self.read_log(&e.id())).collect::<Result<Vec<_>>>()?;
            let root = self.path("report");
            if root.exists() {
                fs::remove_dir_all(&root).map_err(|e| PipelineError::io(&root, e))?;
            }
            write_report(
                &root,
                &ReportInputs {
                    series: &series,
                    fits: &fits,
                    timings: &timings,
                    logs: &logs,
                    conditions: &conditions,
                },
            )
            .map_err(PipelineError::Report)
        })
    }

    /// Re-checks every recorded artifact digest.
    pub fn verify(&self) -> Result<usize> {
        let manifest = RunManifest::load(self.root())?
            .ok_or_else(|| PipelineError::MissingInputs(vec![self.path(MANIFEST).display().to_string()]))?;
        let problems = manifest.verify(self.root())?;
        if problems.is_empty() {
            Ok(manifest.artifacts.len())
        } else {
            Err(PipelineError::Verify(problems))
        }
    }
}

/// Grid order: family, then strategy, then output design.
fn sort_experiments(experiments: &mut [ExperimentConfig]) {
    experiments.sort_by_key(|e| (e.family, e.strategy, e.output as u8));
}
