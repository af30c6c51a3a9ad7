use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Result, RunnerError};
use crate::data::{DateRange, OutputDesign};
use crate::neural::{Family, Optimizer, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Arima,
    Sarima,
    Mlp,
    Cnn,
    Lstm,
}

impl ModelFamily {
    pub const ALL: [Self; 5] = [Self::Arima, Self::Sarima, Self::Mlp, Self::Cnn, Self::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Arima => "arima",
            Self::Sarima => "sarima",
            Self::Mlp => "mlp",
            Self::Cnn => "cnn",
            Self::Lstm => "lstm",
        }
    }

    pub fn is_statistical(self) -> bool {
        matches!(self, Self::Arima | Self::Sarima)
    }

    pub fn neural(self) -> Option<Family> {
        match self {
            Self::Mlp => Some(Family::Mlp),
            Self::Cnn => Some(Family::Cnn),
            Self::Lstm => Some(Family::Lstm),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Trained once on the training range, then frozen.
    Static,
    /// Updated after every forecast origin.
    Online,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Online => "online",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Static, Self::Online].into_iter().find(|v| v.as_str().eq_ignore_ascii_case(s))
    }
}

pub fn parse_output(s: &str) -> Option<OutputDesign> {
    [OutputDesign::Single, OutputDesign::Multi]
        .into_iter()
        .find(|v| v.as_str().eq_ignore_ascii_case(s))
}

/// Gradient-descent settings; seeds come from the experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
}

impl Schedule {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed,
        }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub baseline: Schedule,
    /// Daily fine-tune of online neural cells.
    pub online: Schedule,
    /// Most recent fully observed windows replayed by each online update.
    pub online_window: usize,
    pub seasonal_period: usize,
    pub stepwise_max_models: usize,
    pub cnn_filters: usize,
    pub lstm_units: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            baseline: Schedule::default(),
            online: Schedule {
                epochs: 1,
                ..Schedule::default()
            },
            online_window: 90,
            seasonal_period: 7,
            stepwise_max_models: 50,
            cnn_filters: 256,
            lstm_units: 32,
        }
    }
}

/// One cell of the strategy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: ModelFamily,
    pub strategy: Strategy,
    pub output: OutputDesign,
    pub train: DateRange,
    pub test: DateRange,
    #[serde(default)]
    pub hyper: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(family: ModelFamily, strategy: Strategy, output: OutputDesign, train: DateRange, test: DateRange) -> Self {
        Self {
            family,
            strategy,
            output,
            train,
            test,
            hyper: Hyperparameters::default(),
            seed: 0,
        }
    }

    /// `family-strategy-output`, e.g. `lstm-online-multi`.
    pub fn id(&self) -> String {
        format!("{}-{}-{}", self.family.as_str(), self.strategy.as_str(), self.output.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunnerError::InvalidConfig(format!("{}: {m}", self.id())));
        if self.family.is_statistical() && (self.strategy != Strategy::Online || self.output != OutputDesign::Single) {
            return bad(format!(
                "{} supports only the online single-output design (univariate, re-estimated daily)",
                self.family.as_str()
            ));
        }
        if self.train.is_empty() || self.test.is_empty() {
            return bad("training and test ranges must be non-empty".into());
        }
        if self.test.start <= self.train.end {
            return bad("test range must start after the training range ends".into());
        }
        let h = &self.hyper;
        for (name, s) in [("baseline", &h.baseline), ("online", &h.online)] {
            if s.batch_size == 0 || !(s.learning_rate >= 0.0 && s.learning_rate.is_finite()) {
                return bad(format!("{name} schedule needs batch_size ≥ 1 and a finite learning_rate ≥ 0"));
            }
        }
        if h.baseline.epochs == 0 {
            return bad("baseline epochs must be at least 1".into());
        }
        if self.family == ModelFamily::Sarima && h.seasonal_period < 2 {
            return bad("seasonal_period must be at least 2".into());
        }
        if h.online_window == 0 || h.cnn_filters == 0 || h.lstm_units == 0 || h.stepwise_max_models == 0 {
            return bad("online_window, cnn_filters, lstm_units and stepwise_max_models must be positive".into());
        }
        Ok(())
    }

    /// Identifies the baseline: cells differing only in strategy share it.
    pub(crate) fn baseline_key(&self) -> String {
        let mut c = self.clone();
        c.strategy = Strategy::Static;
        c.test = c.train;
        c.hyper.online = Schedule::default();
        c.hyper.online_window = 0;
        serde_json::to_string(&c).expect("config serialises")
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Subset of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub families: Vec<ModelFamily>,
    pub strategies: Vec<Strategy>,
    pub outputs: Vec<OutputDesign>,
}

impl GridSpec {
    /// All twelve neural cells plus online single-output ARIMA and SARIMA.
    pub fn full() -> Self {
        Self {
            families: ModelFamily::ALL.to_vec(),
            strategies: vec![Strategy::Static, Strategy::Online],
            outputs: vec![OutputDesign::Single, OutputDesign::Multi],
        }
    }

    pub fn neural() -> Self {
        Self {
            families: vec![ModelFamily::Mlp, ModelFamily::Cnn, ModelFamily::Lstm],
            ..Self::full()
        }
    }

    /// Expands to cell configs, silently skipping statistical cells outside
    /// their single supported design.
    pub fn cells(&self, template: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &strategy in &self.strategies {
                for &output in &self.outputs {
                    if family.is_statistical() && (strategy != Strategy::Online || output != OutputDesign::Single) {
                        continue;
                    }
                    out.push(ExperimentConfig {
                        family,
                        strategy,
                        output,
                        ..template.clone()
                    });
                }
            }
        }
        out
    }
}
