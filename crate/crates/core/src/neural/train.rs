use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Network, NeuralError, Optimizer, Result};
use crate::data::SupervisedWindow;

/// Training hyperparameters. The loss is always mean squared error on
/// normalised values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Daily online update: one pass at the same learning rate.
    pub fn online_default() -> Self {
        Self {
            epochs: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NeuralError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss per epoch, measured before each batch's update.
    pub loss_trace: Vec<f64>,
}

/// Trains from the network's current parameters.
pub fn train(net: &mut Network, windows: &[&SupervisedWindow], config: &TrainConfig) -> Result<TrainReport> {
    if config.epochs == 0 {
        return Err(NeuralError::InvalidConfig("epochs must be at least 1".into()));
    }
    run_epochs(net, windows, config)
}

/// Continues descent on `recent` only; zero epochs leaves the network untouched.
pub fn fine_tune(net: &mut Network, recent: &[&SupervisedWindow], config: &TrainConfig) -> Result<TrainReport> {
    if config.epochs == 0 {
        config.validate()?;
        return Ok(TrainReport { loss_trace: Vec::new() });
    }
    run_epochs(net, recent, config)
}

pub(crate) fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn run_epochs(net: &mut Network, windows: &[&SupervisedWindow], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if windows.is_empty() {
        return Err(NeuralError::NoWindows);
    }
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed(config.seed, epoch)));
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SupervisedWindow> = chunk.iter().map(|&i| windows[i]).collect();
            net.zero_grad();
            let loss = net.backward(&batch)?;
            if !loss.is_finite() {
                return Err(NeuralError::Diverged {
                    epoch,
                    learning_rate: config.learning_rate,
                    loss,
                });
            }
            let opt = config.optimizer;
            let Network { params, optimizer, .. } = net;
            optimizer.apply(&opt, config.learning_rate, params);
            total += loss * chunk.len() as f64;
        }
        loss_trace.push(total / windows.len() as f64);
    }
    Ok(TrainReport { loss_trace })
}
