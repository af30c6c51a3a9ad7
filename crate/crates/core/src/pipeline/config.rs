use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::analysis::ConditionSpec;
use crate::data::{CalendarSpec, DateRange, OutputDesign, SyntheticScenario};
use crate::runner::{ExperimentConfig, GridSpec, Hyperparameters, ModelFamily, Strategy};

/// Declarative description of a whole benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSection,
    pub grid: GridSection,
    #[serde(default)]
    pub conditions: Option<ConditionSpec>,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Scenario for `synth`.
    #[serde(default)]
    pub synthetic: Option<SyntheticScenario>,
    /// Long-format `date,station_id,count` file for `ingest`.
    #[serde(default)]
    pub panel: Option<PathBuf>,
    /// One `YYYY-MM-DD` per line; used with `panel`.
    #[serde(default)]
    pub holidays: Option<PathBuf>,
    #[serde(default = "yes")]
    pub treat_sundays_as_holiday: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub train: DateRange,
    pub test: DateRange,
    #[serde(default = "all_families")]
    pub families: Vec<ModelFamily>,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "all_outputs")]
    pub outputs: Vec<OutputDesign>,
}

fn all_families() -> Vec<ModelFamily> {
    ModelFamily::ALL.to_vec()
}

fn all_strategies() -> Vec<Strategy> {
    vec![Strategy::Static, Strategy::Online]
}

fn all_outputs() -> Vec<OutputDesign> {
    vec![OutputDesign::Single, OutputDesign::Multi]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_root")]
    pub root: PathBuf,
    #[serde(default = "default_every")]
    pub checkpoint_every: usize,
}

fn default_root() -> PathBuf {
    PathBuf::from("out")
}

fn default_every() -> usize {
    30
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            root: default_root(),
            checkpoint_every: default_every(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Usage(format!("config: {e}")))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output.root);
        if let Some(p) = cfg.data.panel.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.data.holidays.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            families: self.grid.families.clone(),
            strategies: self.grid.strategies.clone(),
            outputs: self.grid.outputs.clone(),
        }
    }

    pub fn template(&self) -> ExperimentConfig {
        let mut t = ExperimentConfig::new(
            ModelFamily::Mlp,
            Strategy::Static,
            OutputDesign::Single,
            self.grid.train,
            self.grid.test,
        );
        t.hyper = self.hyperparameters.clone();
        t.seed = self.seed;
        t
    }

    /// Grid cells, each validated.
    pub fn experiments(&self, grid: &GridSpec) -> Result<Vec<ExperimentConfig>> {
        let cells = grid.cells(&self.template());
        if cells.is_empty() {
            return Err(PipelineError::Usage("the grid selects no experiments".into()));
        }
        for c in &cells {
            c.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        }
        Ok(cells)
    }

    pub fn calendar(&self) -> Result<CalendarSpec> {
        if let Some(s) = &self.data.synthetic {
            return Ok(s.calendar.clone());
        }
        match &self.data.holidays {
            Some(p) => CalendarSpec::from_file(p, self.data.treat_sundays_as_holiday).map_err(PipelineError::Data),
            None => Ok(CalendarSpec::new([], self.data.treat_sundays_as_holiday)),
        }
    }
}
