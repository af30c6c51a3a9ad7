//! Small reverse-mode autodiff engine and the three neural forecasters.
//!
//! Every network maps a 21-day lookback block plus the origin day's
//! temporal features to a 7-day forecast per output station:
//!
//! * MLP: flattened inputs, one ReLU hidden layer, linear head.
//! * CNN: stations as channels, one causal conv layer (kernel 2,
//!   dilation 7) with ReLU, flattened and joined with the features.
//! * LSTM: one layer run over the 21 daily station vectors; the final
//!   hidden state is joined with the features.
//!
//! Outputs are linear and unclamped.

mod checkpoint;
mod network;
mod optim;
mod pool;
pub mod tape;
mod tensor;
mod train;

use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use network::{dense, lstm_cell, Batch, Family, LstmParams, Network, NetworkSpec};
pub use optim::{Optimizer, OptimizerState};
pub use tensor::Tensor;
pub use train::{fine_tune, train, TrainConfig, TrainReport};

pub(crate) use train::epoch_seed;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {layer}: expected {expected}, found {found}")]
    Shape {
        layer: String,
        expected: String,
        found: String,
    },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training windows")]
    NoWindows,
    #[error("loss became {loss} in epoch {epoch} (learning rate {learning_rate})")]
    Diverged {
        epoch: usize,
        learning_rate: f64,
        loss: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;
