use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::log::{ForecastLog, ForecastRecord, Incident, TimingSamples};
use super::{ExperimentConfig, ModelFamily, Result, RunnerError, Strategy};
use crate::arima::{self, ArimaError, ArimaFit, ArimaOrder, StepwiseConfig};
use crate::data::{make_windows, NormalizationState, OutputDesign, RidershipPanel, SupervisedWindow, HORIZON, LOOKBACK};
use crate::neural::{self, epoch_seed, Network, NetworkSpec};

const TAG_INIT: usize = 1;
const TAG_BASELINE: usize = 2;
const TAG_ONLINE: usize = 3;

fn stream(seed: u64, tag: usize, index: usize) -> u64 {
    epoch_seed(epoch_seed(seed, tag), index)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Root for per-experiment checkpoint directories; `None` disables them.
    pub checkpoint_dir: Option<PathBuf>,
    /// Origins between checkpoints.
    pub checkpoint_every: usize,
    /// Stop once this many test origins are done (a checkpoint is written
    /// first); a later run with the same directory resumes.
    pub stop_after: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            checkpoint_dir: None,
            checkpoint_every: 30,
            stop_after: None,
            jobs: None,
        }
    }
}

/// Parameter checksums observed around every forecast.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub experiment: String,
    pub forecasts_checked: usize,
    pub violations: Vec<String>,
    /// Combined model checksum before the first and before the last test forecast.
    pub first_checksum: Option<u64>,
    pub last_checksum: Option<u64>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.forecasts_checked > 0
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub log: ForecastLog,
    pub audit: AuditReport,
}

#[derive(Debug, Clone)]
pub(crate) enum ModelState {
    Arima(ArimaFit),
    Net(Box<Network>),
}

impl ModelState {
    fn checksum(&self) -> u64 {
        match self {
            Self::Arima(f) => f.checksum(),
            Self::Net(n) => n.checksum(),
        }
    }
}

/// Trained starting point shared by the static and online cells of a family.
#[derive(Debug, Clone)]
pub(crate) struct Baseline {
    models: Vec<ModelState>,
    seconds: Vec<f64>,
    incidents: Vec<Incident>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SlotAudit {
    committed: u64,
    first: Option<u64>,
    last: Option<u64>,
}

struct Slot {
    model: ModelState,
    audit: SlotAudit,
}

#[derive(Default)]
struct BlockOutput {
    records: Vec<ForecastRecord>,
    update: Vec<f64>,
    simulate: Vec<f64>,
    incidents: Vec<Incident>,
    checked: usize,
    violations: Vec<String>,
}

/// Everything derived from the panel and config that stays fixed during a run.
struct Context<'a> {
    panel: &'a RidershipPanel,
    cfg: &'a ExperimentConfig,
    norm: NormalizationState,
    train_days: Range<usize>,
    origins: Vec<usize>,
    /// Stations handled by each model.
    groups: Vec<Vec<usize>>,
    /// Neural only: per model, windows indexed by `origin - LOOKBACK`.
    windows: Vec<Vec<SupervisedWindow>>,
    /// Statistical only: normalised series per station.
    series: Vec<Vec<f64>>,
}

impl<'a> Context<'a> {
    fn new(panel: &'a RidershipPanel, cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let train_days = panel.index_range(cfg.train)?;
        let test_days = panel.index_range(cfg.test)?;
        let norm = NormalizationState::fit_days(panel, train_days.clone())?;
        let first_train_origin = train_days.start + LOOKBACK;
        if first_train_origin + HORIZON > train_days.end {
            return Err(RunnerError::InvalidConfig(format!(
                "{}: training range needs at least {} days",
                cfg.id(),
                LOOKBACK + HORIZON
            )));
        }
        let origins: Vec<usize> = test_days
            .clone()
            .filter(|&o| o >= first_train_origin && o + HORIZON <= test_days.end)
            .collect();
        if origins.is_empty() {
            return Err(RunnerError::InvalidConfig(format!(
                "{}: test range holds no complete {HORIZON}-day forecast",
                cfg.id()
            )));
        }
        let n = panel.n_stations();
        let groups: Vec<Vec<usize>> = match cfg.output {
            OutputDesign::Single => (0..n).map(|s| vec![s]).collect(),
            OutputDesign::Multi => vec![(0..n).collect()],
        };
        let (windows, series) = if cfg.family.is_statistical() {
            let series = (0..n)
                .map(|s| panel.series(s).iter().map(|&c| norm.normalize(s, c as f64)).collect())
                .collect();
            (Vec::new(), series)
        } else {
            (make_windows(panel, &norm, cfg.output, 1)?, Vec::new())
        };
        Ok(Self {
            panel,
            cfg,
            norm,
            train_days,
            origins,
            groups,
            windows,
            series,
        })
    }

    fn station_name(&self, s: usize) -> String {
        self.panel.stations()[s].clone()
    }

    fn model_label(&self, k: usize) -> Option<String> {
        match self.cfg.output {
            OutputDesign::Single => Some(self.station_name(self.groups[k][0])),
            OutputDesign::Multi => None,
        }
    }

    fn spec(&self, k: usize) -> NetworkSpec {
        let family = self.cfg.family.neural().expect("neural family");
        let width = self.groups[k].len();
        let mut spec = NetworkSpec::new(family, width, width);
        spec.filters = self.cfg.hyper.cnn_filters;
        spec.units = self.cfg.hyper.lstm_units;
        spec
    }

    /// Windows whose lookback and targets both lie in `days`, up to origin `last`.
    fn window_refs(&self, k: usize, first: usize, last: usize) -> Vec<&SupervisedWindow> {
        (first..=last).map(|o| &self.windows[k][o - LOOKBACK]).collect()
    }

    fn train_baseline(&self) -> Result<Baseline> {
        let outcomes: Vec<Result<(ModelState, f64, Option<Incident>)>> = (0..self.groups.len())
            .into_par_iter()
            .map(|k| {
                let start = Instant::now();
                let (model, incident) = self.train_model(k)?;
                Ok((model, start.elapsed().as_secs_f64(), incident))
            })
            .collect();
        let mut baseline = Baseline {
            models: Vec::new(),
            seconds: Vec::new(),
            incidents: Vec::new(),
        };
        for o in outcomes {
            let (m, secs, incident) = o?;
            baseline.models.push(m);
            baseline.seconds.push(secs);
            baseline.incidents.extend(incident);
        }
        Ok(baseline)
    }

    fn train_model(&self, k: usize) -> Result<(ModelState, Option<Incident>)> {
        let cfg = self.cfg;
        let model_err = |message: String| RunnerError::Model {
            experiment: cfg.id(),
            message,
        };
        if cfg.family.is_statistical() {
            let s = self.groups[k][0];
            let y = &self.series[s][self.train_days.clone()];
            let seasonal = cfg.family == ModelFamily::Sarima;
            let mut sw = StepwiseConfig::new(seasonal, cfg.hyper.seasonal_period);
            sw.max_models = cfg.hyper.stepwise_max_models;
            return match arima::stepwise_search(y, &sw) {
                Ok(r) => Ok((ModelState::Arima(r.best), None)),
                Err(e) => {
                    // Fall back to the mean model so the station still gets forecasts.
                    let fit = estimate_or_best(y, ArimaOrder::new(0, 0, 0).with_constant(true))
                        .map_err(|e2| model_err(format!("{}: order search failed ({e}); fallback failed ({e2})", self.station_name(s))))?;
                    let incident = Incident {
                        origin: self.panel.date(self.train_days.end - 1),
                        station: Some(self.station_name(s)),
                        stage: "baseline".into(),
                        message: format!("order search failed ({e}); using {}", fit.order),
                    };
                    Ok((ModelState::Arima(fit), Some(incident)))
                }
            };
        }
        let mut net = Network::new(self.spec(k), stream(cfg.seed, TAG_INIT, k)).map_err(|e| model_err(e.to_string()))?;
        let first = self.train_days.start + LOOKBACK;
        let last = self.train_days.end - HORIZON;
        let refs = self.window_refs(k, first, last);
        let train_cfg = cfg.hyper.baseline.to_train_config(stream(cfg.seed, TAG_BASELINE, k));
        neural::train(&mut net, &refs, &train_cfg).map_err(|e| model_err(e.to_string()))?;
        Ok((ModelState::Net(Box::new(net)), None))
    }

    /// Forecast then (online) update for each origin of `block`.
    fn advance(&self, slot: &mut Slot, k: usize, block: &[usize]) -> BlockOutput {
        let mut out = BlockOutput::default();
        let last_origin = *self.origins.last().expect("non-empty");
        for &t in block {
            let before = slot.model.checksum();
            if before != slot.audit.committed {
                out.violations.push(format!(
                    "{} model {k}: parameters changed between update and forecast at {}",
                    self.cfg.id(),
                    self.panel.date(t)
                ));
            }
            if t == self.origins[0] {
                slot.audit.first = Some(before);
            }
            if t == last_origin {
                slot.audit.last = Some(before);
            }
            let start = Instant::now();
            let preds = match self.forecast(&slot.model, k, t) {
                Ok(p) => p,
                Err(message) => {
                    out.incidents.push(Incident {
                        origin: self.panel.date(t),
                        station: self.model_label(k),
                        stage: "forecast".into(),
                        message: format!("{message}; repeating last observation"),
                    });
                    self.groups[k]
                        .iter()
                        .flat_map(|&s| std::iter::repeat_n(self.norm.normalize(s, self.panel.count(s, t - 1) as f64), HORIZON))
                        .collect()
                }
            };
            out.simulate.push(start.elapsed().as_secs_f64());
            if slot.model.checksum() != before {
                out.violations.push(format!("{} model {k}: forecast at {} mutated parameters", self.cfg.id(), self.panel.date(t)));
            }
            out.checked += 1;
            let origin = self.panel.date(t);
            for (i, &s) in self.groups[k].iter().enumerate() {
                for h in 0..HORIZON {
                    out.records.push(ForecastRecord {
                        station: s,
                        origin,
                        horizon: (h + 1) as u8,
                        pred: self.norm.denormalize(s, preds[i * HORIZON + h]).max(0.0),
                        truth: self.panel.count(s, t + h) as f64,
                    });
                }
            }
            if self.cfg.strategy == Strategy::Online {
                let start = Instant::now();
                match self.update(&slot.model, k, t) {
                    Ok((model, note)) => {
                        slot.model = model;
                        if let Some(message) = note {
                            out.incidents.push(Incident {
                                origin,
                                station: self.model_label(k),
                                stage: "update".into(),
                                message,
                            });
                        }
                    }
                    Err(message) => out.incidents.push(Incident {
                        origin,
                        station: self.model_label(k),
                        stage: "update".into(),
                        message: format!("{message}; keeping previous parameters"),
                    }),
                }
                out.update.push(start.elapsed().as_secs_f64());
                slot.audit.committed = slot.model.checksum();
            }
        }
        out
    }

    /// Normalised predictions, station-major, using only days before `t`.
    fn forecast(&self, model: &ModelState, k: usize, t: usize) -> std::result::Result<Vec<f64>, String> {
        match model {
            ModelState::Arima(fit) => {
                let s = self.groups[k][0];
                arima::forecast(fit, &self.series[s][self.train_days.start..t], HORIZON).map_err(|e| e.to_string())
            }
            ModelState::Net(net) => {
                let w = &self.windows[k][t - LOOKBACK];
                // Only the lookback and calendar features are read; the target block is ignored.
                net.forward(&[w]).map(|p| p.into_values()).map_err(|e| e.to_string())
            }
        }
    }

    /// Incorporates day `t`'s observations.
    fn update(&self, model: &ModelState, k: usize, t: usize) -> std::result::Result<(ModelState, Option<String>), String> {
        match model {
            ModelState::Arima(fit) => {
                let s = self.groups[k][0];
                let y = &self.series[s][self.train_days.start..=t];
                match arima::update(fit, y) {
                    Ok(f) => Ok((ModelState::Arima(f), None)),
                    Err(ArimaError::NotConverged { iterations, best, .. }) => Ok((
                        ModelState::Arima(*best),
                        Some(format!("re-estimation stopped after {iterations} iterations; kept best iterate")),
                    )),
                    Err(e) => Err(e.to_string()),
                }
            }
            ModelState::Net(net) => {
                // Windows whose targets end on or before day t.
                let newest = t + 1 - HORIZON;
                let first = (self.train_days.start + LOOKBACK).max((newest + 1).saturating_sub(self.cfg.hyper.online_window));
                let refs = self.window_refs(k, first, newest);
                let mut tuned = net.clone();
                let train_cfg = self
                    .cfg
                    .hyper
                    .online
                    .to_train_config(stream(stream(self.cfg.seed, TAG_ONLINE, k), 0, t));
                neural::fine_tune(&mut tuned, &refs, &train_cfg).map_err(|e| e.to_string())?;
                Ok((ModelState::Net(tuned), None))
            }
        }
    }
}

fn estimate_or_best(y: &[f64], order: ArimaOrder) -> std::result::Result<ArimaFit, ArimaError> {
    match arima::estimate(y, order) {
        Err(ArimaError::NotConverged { best, .. }) => Ok(*best),
        other => other,
    }
}

fn combined(slots: &[Slot], pick: impl Fn(&SlotAudit) -> Option<u64>) -> Option<u64> {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in slots {
        for b in pick(&s.audit)?.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    Some(h)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| RunnerError::InvalidConfig(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Trains the baseline and walks the test range for one grid cell.
pub fn run_experiment(panel: &RidershipPanel, config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentRun> {
    with_pool(opts.jobs, || run_cell(panel, config, opts, None))?
}

/// Runs every cell; cells that differ only in strategy reuse one baseline.
/// Failures stay confined to their cell.
pub fn run_grid(panel: &RidershipPanel, cells: &[ExperimentConfig], opts: &RunOptions) -> Vec<Result<ExperimentRun>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        groups.entry(c.baseline_key()).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let body = || {
        let done: Vec<Vec<(usize, Result<ExperimentRun>)>> = groups
            .par_iter()
            .map(|members| {
                let mut shared: Option<Result<(Baseline, f64)>> = None;
                members
                    .iter()
                    .map(|&i| {
                        let cfg = &cells[i];
                        let resumable = checkpoint_exists(opts, cfg);
                        let result = if resumable {
                            run_cell(panel, cfg, opts, None)
                        } else {
                            let base = shared.get_or_insert_with(|| {
                                let ctx = Context::new(panel, cfg)?;
                                let start = Instant::now();
                                let b = ctx.train_baseline()?;
                                Ok((b, start.elapsed().as_secs_f64()))
                            });
                            match base {
                                Ok((b, _)) => run_cell(panel, cfg, opts, Some(b.clone())),
                                Err(e) => Err(RunnerError::Model {
                                    experiment: cfg.id(),
                                    message: format!("baseline failed: {e}"),
                                }),
                            }
                        };
                        (i, result)
                    })
                    .collect()
            })
            .collect();
        let mut flat: Vec<(usize, Result<ExperimentRun>)> = done.into_iter().flatten().collect();
        flat.sort_by_key(|(i, _)| *i);
        flat.into_iter().map(|(_, r)| r).collect::<Vec<_>>()
    };
    match with_pool(opts.jobs, body) {
        Ok(v) => v,
        Err(e) => cells.iter().map(|_| Err(RunnerError::InvalidConfig(e.to_string()))).collect(),
    }
}

fn run_cell(
    panel: &RidershipPanel,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    baseline: Option<Baseline>,
) -> Result<ExperimentRun> {
    let ctx = Context::new(panel, cfg)?;
    let mut log = ForecastLog::new(cfg.id(), panel.stations().to_vec());
    let mut audit = AuditReport {
        experiment: cfg.id(),
        ..AuditReport::default()
    };
    let ckpt = opts.checkpoint_dir.as_ref().map(|d| d.join(cfg.id()));
    let mut pos = 0;
    let mut slots: Vec<Slot>;
    match ckpt.as_deref().filter(|d| d.join(PROGRESS).exists()) {
        Some(dir) => {
            let state = load_checkpoint(dir, cfg, &ctx)?;
            pos = state.completed;
            log = state.log;
            audit = state.audit;
            slots = state.slots;
        }
        None => {
            let b = match baseline {
                Some(b) => b,
                None => ctx.train_baseline()?,
            };
            log.timing.baseline = b.seconds;
            log.incidents = b.incidents;
            slots = b
                .models
                .into_iter()
                .map(|m| Slot {
                    audit: SlotAudit {
                        committed: m.checksum(),
                        first: None,
                        last: None,
                    },
                    model: m,
                })
                .collect();
        }
    }
    let every = opts.checkpoint_every.max(1);
    let total = ctx.origins.len();
    while pos < total {
        let mut end = (pos + every).min(total);
        if let Some(stop) = opts.stop_after {
            end = end.min(stop.max(pos + 1));
        }
        let block = &ctx.origins[pos..end];
        let outputs: Vec<BlockOutput> = slots
            .par_iter_mut()
            .enumerate()
            .map(|(k, slot)| ctx.advance(slot, k, block))
            .collect();
        for o in outputs {
            log.records.extend(o.records);
            log.timing.update.extend(o.update);
            log.timing.simulate.extend(o.simulate);
            log.incidents.extend(o.incidents);
            audit.forecasts_checked += o.checked;
            audit.violations.extend(o.violations);
        }
        pos = end;
        if let Some(dir) = &ckpt {
            save_checkpoint(dir, cfg, pos, &log, &audit, &slots)?;
        }
        if opts.stop_after.is_some_and(|s| pos >= s) && pos < total {
            return Err(RunnerError::Interrupted {
                experiment: cfg.id(),
                completed: pos,
                total,
            });
        }
    }
    audit.first_checksum = combined(&slots, |a| a.first);
    audit.last_checksum = combined(&slots, |a| a.last);
    log.sort();
    log.incidents.sort_by(|a, b| (a.origin, &a.station, &a.stage).cmp(&(b.origin, &b.station, &b.stage)));
    log.check_complete()?;
    Ok(ExperimentRun {
        config: cfg.clone(),
        log,
        audit,
    })
}

// Checkpoint directory layout, one directory per experiment id:
//   progress.json   config digest, completed origins, audit, incidents, timing samples
//   log.csv         forecast records so far
//   model-NNN.rbnn  network checkpoints, or model-NNN.arima fit records

const PROGRESS: &str = "progress.json";

#[derive(Serialize, Deserialize)]
struct Progress {
    config_digest: String,
    completed: usize,
    audit: AuditReport,
    slots: Vec<SlotAudit>,
    incidents: Vec<Incident>,
    baseline_seconds: Vec<f64>,
    update_seconds: Vec<f64>,
    simulate_seconds: Vec<f64>,
}

struct Restored {
    completed: usize,
    log: ForecastLog,
    audit: AuditReport,
    slots: Vec<Slot>,
}

fn digest(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(cfg).expect("config serialises")))
}

fn checkpoint_exists(opts: &RunOptions, cfg: &ExperimentConfig) -> bool {
    opts.checkpoint_dir
        .as_ref()
        .is_some_and(|d| d.join(cfg.id()).join(PROGRESS).exists())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn save_checkpoint(
    dir: &Path,
    cfg: &ExperimentConfig,
    completed: usize,
    log: &ForecastLog,
    audit: &AuditReport,
    slots: &[Slot],
) -> Result<()> {
    let tmp = dir.with_extension("tmp");
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
    let progress = Progress {
        config_digest: digest(cfg),
        completed,
        audit: audit.clone(),
        slots: slots.iter().map(|s| s.audit.clone()).collect(),
        incidents: log.incidents.clone(),
        baseline_seconds: log.timing.baseline.clone(),
        update_seconds: log.timing.update.clone(),
        simulate_seconds: log.timing.simulate.clone(),
    };
    let p = tmp.join(PROGRESS);
    fs::write(&p, serde_json::to_vec_pretty(&progress).expect("progress serialises")).map_err(io_err(&p))?;
    let p = tmp.join("log.csv");
    let mut sorted = log.clone();
    sorted.sort();
    sorted.write_csv(fs::File::create(&p).map_err(io_err(&p))?)?;
    for (k, slot) in slots.iter().enumerate() {
        match &slot.model {
            ModelState::Arima(fit) => {
                let p = tmp.join(format!("model-{k:03}.arima"));
                fs::write(&p, fit.to_record()).map_err(io_err(&p))?;
            }
            ModelState::Net(net) => {
                let p = tmp.join(format!("model-{k:03}.rbnn"));
                let mut bytes = Vec::new();
                neural::write_checkpoint(net, &mut bytes).map_err(|e| RunnerError::Checkpoint(e.to_string()))?;
                fs::write(&p, bytes).map_err(io_err(&p))?;
            }
        }
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::rename(&tmp, dir).map_err(io_err(dir))
}

fn load_checkpoint(dir: &Path, cfg: &ExperimentConfig, ctx: &Context) -> Result<Restored> {
    let p = dir.join(PROGRESS);
    let progress: Progress = serde_json::from_slice(&fs::read(&p).map_err(io_err(&p))?)
        .map_err(|e| RunnerError::Checkpoint(format!("{}: {e}", p.display())))?;
    if progress.config_digest != digest(cfg) {
        return Err(RunnerError::Checkpoint(format!(
            "{} was written for a different configuration of {}",
            dir.display(),
            cfg.id()
        )));
    }
    if progress.slots.len() != ctx.groups.len() {
        return Err(RunnerError::Checkpoint(format!("{}: model count changed", dir.display())));
    }
    let p = dir.join("log.csv");
    let mut log = ForecastLog::read_csv(fs::File::open(&p).map_err(io_err(&p))?)?;
    // Station indices must follow the panel, not first appearance in the file.
    let index: std::collections::HashMap<&str, usize> =
        ctx.panel.stations().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    for r in &mut log.records {
        let name = log.stations[r.station].as_str();
        r.station = *index
            .get(name)
            .ok_or_else(|| RunnerError::Checkpoint(format!("unknown station {name} in {}", p.display())))?;
    }
    log.experiment = cfg.id();
    log.stations = ctx.panel.stations().to_vec();
    log.incidents = progress.incidents;
    log.timing = TimingSamples {
        baseline: progress.baseline_seconds,
        update: progress.update_seconds,
        simulate: progress.simulate_seconds,
    };
    let mut slots = Vec::with_capacity(progress.slots.len());
    for (k, audit) in progress.slots.into_iter().enumerate() {
        let model = if cfg.family.is_statistical() {
            let p = dir.join(format!("model-{k:03}.arima"));
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            ModelState::Arima(ArimaFit::from_record(&text).map_err(|e| RunnerError::Checkpoint(e.to_string()))?)
        } else {
            let p = dir.join(format!("model-{k:03}.rbnn"));
            let bytes = fs::read(&p).map_err(io_err(&p))?;
            ModelState::Net(Box::new(
                neural::read_checkpoint(bytes.as_slice()).map_err(|e| RunnerError::Checkpoint(e.to_string()))?,
            ))
        };
        slots.push(Slot { model, audit });
    }
    Ok(Restored {
        completed: progress.completed,
        log,
        audit: progress.audit,
        slots,
    })
}
