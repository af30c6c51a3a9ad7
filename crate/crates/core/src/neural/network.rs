use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Conv, Graph, Var};
use super::{pool, NeuralError, OptimizerState, Result, Tensor};
use crate::data::{SupervisedWindow, FEATURE_WIDTH, HORIZON, LOOKBACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Mlp,
    Cnn,
    Lstm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mlp => "mlp",
            Self::Cnn => "cnn",
            Self::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub family: Family,
    pub stations_in: usize,
    pub stations_out: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub feature_width: usize,
    /// Hidden width of the MLP.
    pub hidden: usize,
    pub filters: usize,
    pub kernel: usize,
    pub dilation: usize,
    /// LSTM units.
    pub units: usize,
}

impl NetworkSpec {
    pub fn new(family: Family, stations_in: usize, stations_out: usize) -> Self {
        let mut spec = Self {
            family,
            stations_in,
            stations_out,
            lookback: LOOKBACK,
            horizon: HORIZON,
            feature_width: FEATURE_WIDTH,
            hidden: 0,
            filters: 256,
            kernel: 2,
            dilation: 7,
            units: 32,
        };
        spec.hidden = (spec.input_width() + spec.output_width()).div_ceil(2);
        spec
    }

    pub fn mlp(stations_in: usize, stations_out: usize) -> Self {
        Self::new(Family::Mlp, stations_in, stations_out)
    }

    pub fn cnn(stations_in: usize, stations_out: usize) -> Self {
        Self::new(Family::Cnn, stations_in, stations_out)
    }

    pub fn lstm(stations_in: usize, stations_out: usize) -> Self {
        Self::new(Family::Lstm, stations_in, stations_out)
    }

    pub fn input_width(&self) -> usize {
        self.stations_in * self.lookback + self.feature_width
    }

    pub fn output_width(&self) -> usize {
        self.stations_out * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let mut sizes = vec![
            ("stations_in", self.stations_in),
            ("stations_out", self.stations_out),
            ("lookback", self.lookback),
            ("horizon", self.horizon),
        ];
        match self.family {
            Family::Mlp => sizes.push(("hidden", self.hidden)),
            Family::Cnn => sizes.extend([("filters", self.filters), ("kernel", self.kernel), ("dilation", self.dilation)]),
            Family::Lstm => sizes.push(("units", self.units)),
        }
        match sizes.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(NeuralError::InvalidSpec(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }

    /// `(name, shape)` of every parameter in storage order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let out = self.output_width();
        let f = self.feature_width;
        let head_in = match self.family {
            Family::Mlp => self.hidden,
            Family::Cnn => self.lookback * self.filters + f,
            Family::Lstm => self.units + f,
        };
        let mut shapes: Vec<(&str, Vec<usize>)> = match self.family {
            Family::Mlp => vec![("hidden.w", vec![self.input_width(), self.hidden]), ("hidden.b", vec![self.hidden])],
            Family::Cnn => vec![
                ("conv.w", vec![self.stations_in * self.kernel, self.filters]),
                ("conv.b", vec![self.filters]),
            ],
            Family::Lstm => vec![
                ("lstm.wx", vec![self.stations_in, 4 * self.units]),
                ("lstm.wh", vec![self.units, 4 * self.units]),
                ("lstm.b", vec![4 * self.units]),
            ],
        };
        shapes.push(("head.w", vec![head_in, out]));
        shapes.push(("head.b", vec![out]));
        shapes.into_iter().map(|(n, s)| (n.to_string(), s)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

/// A network and its optimiser state; owned by one training loop at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    pub(crate) params: Vec<Tensor>,
    pub(crate) optimizer: OptimizerState,
}

/// Batched model inputs.
pub struct Batch {
    pub rows: usize,
    lookback: Vec<f64>,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Network {
    /// Uniform fan-in initialisation: weights in `±1/√fan_in`, biases zero,
    /// LSTM forget-gate bias one.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for (name, shape) in spec.parameter_shapes() {
            let n: usize = shape.iter().product();
            let values = if name.ends_with(".b") {
                let mut b = vec![0.0; n];
                if name == "lstm.b" {
                    b[spec.units..2 * spec.units].iter_mut().for_each(|v| *v = 1.0);
                }
                b
            } else {
                let fan_in = if name == "lstm.wx" || name == "lstm.wh" {
                    spec.stations_in + spec.units
                } else {
                    shape[0]
                };
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            };
            params.push(Tensor::new(shape, values)?);
        }
        Ok(Self {
            spec,
            params,
            optimizer: OptimizerState::default(),
        })
    }

    pub(crate) fn from_parts(spec: NetworkSpec, params: Vec<Tensor>, optimizer: OptimizerState) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.parameter_shapes();
        if shapes.len() != params.len() || shapes.iter().zip(&params).any(|((_, s), p)| s.as_slice() != p.shape()) {
            return Err(NeuralError::InvalidSpec("parameter shapes do not match the network spec".into()));
        }
        Ok(Self { spec, params, optimizer })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// FNV-1a over parameter bits; the leakage audit compares these.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.params.iter().flat_map(|p| p.values()) {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn batch(&self, windows: &[&SupervisedWindow]) -> Result<Batch> {
        let s = &self.spec;
        let mut lookback = Vec::with_capacity(windows.len() * s.stations_in * s.lookback);
        let mut features = Vec::with_capacity(windows.len() * s.feature_width);
        let mut targets = Vec::with_capacity(windows.len() * s.output_width());
        for w in windows {
            if w.lookback.len() != s.stations_in * s.lookback {
                return Err(NeuralError::Shape {
                    layer: "input".into(),
                    expected: format!("{} lookback values", s.stations_in * s.lookback),
                    found: format!("{}", w.lookback.len()),
                });
            }
            if w.target.len() != s.output_width() {
                return Err(NeuralError::Shape {
                    layer: "target".into(),
                    expected: format!("{} target values", s.output_width()),
                    found: format!("{}", w.target.len()),
                });
            }
            lookback.extend_from_slice(&w.lookback);
            features.extend_from_slice(&w.origin_features()[..s.feature_width]);
            targets.extend_from_slice(&w.target);
        }
        Ok(Batch {
            rows: windows.len(),
            lookback,
            features,
            targets,
        })
    }

    /// Records the forward pass; returns the prediction node.
    pub fn build(&self, g: &mut Graph, batch: &Batch) -> Result<Var> {
        let s = &self.spec;
        let n = batch.rows;
        let p: Vec<Var> = self.params.iter().enumerate().map(|(i, t)| g.param(i, t)).collect();
        let features = g.input(Tensor::matrix(n, s.feature_width, batch.features.clone())?);
        let (head_in, head_w, head_b) = match s.family {
            Family::Mlp => {
                let look = g.input(Tensor::matrix(n, s.stations_in * s.lookback, batch.lookback.clone())?);
                let x = g.concat(&[look, features])?;
                let h = dense(g, x, p[0], p[1])?;
                (g.relu(h), p[2], p[3])
            }
            Family::Cnn => {
                let look = g.input(Tensor::matrix(n, s.stations_in * s.lookback, batch.lookback.clone())?);
                let conv = g.conv(Conv {
                    x: look,
                    w: p[0],
                    b: p[1],
                    channels: s.stations_in,
                    steps: s.lookback,
                    kernel: s.kernel,
                    dilation: s.dilation,
                    filters: s.filters,
                })?;
                let act = g.relu(conv);
                (g.concat(&[act, features])?, p[2], p[3])
            }
            Family::Lstm => {
                let zeros = Tensor::matrix(n, s.units, vec![0.0; n * s.units])?;
                let mut h = g.input(zeros.clone());
                let mut c = g.input(zeros);
                for k in 0..s.lookback {
                    let step: Vec<f64> = (0..n)
                        .flat_map(|i| (0..s.stations_in).map(move |st| (i, st)))
                        .map(|(i, st)| batch.lookback[(i * s.stations_in + st) * s.lookback + k])
                        .collect();
                    let x = g.input(Tensor::matrix(n, s.stations_in, step)?);
                    (h, c) = lstm_cell(g, x, h, c, LstmParams { wx: p[0], wh: p[1], b: p[2] }, s.units)?;
                }
                (g.concat(&[h, features])?, p[3], p[4])
            }
        };
        dense(g, head_in, head_w, head_b)
    }

    /// Predictions `[batch × output_width]` in normalised units.
    pub fn forward(&self, windows: &[&SupervisedWindow]) -> Result<Tensor> {
        let batch = self.batch(windows)?;
        let mut g = Graph::new();
        let out = self.build(&mut g, &batch)?;
        Ok(g.value(out).clone())
    }

    /// Mean squared error of the batch; gradients are added to each
    /// parameter's gradient buffer.
    pub fn backward(&mut self, windows: &[&SupervisedWindow]) -> Result<f64> {
        let batch = self.batch(windows)?;
        self.backward_batch(&batch)
    }

    pub fn backward_batch(&mut self, batch: &Batch) -> Result<f64> {
        let mut g = Graph::new();
        let pred = self.build(&mut g, batch)?;
        let target = g.input(Tensor::matrix(batch.rows, self.spec.output_width(), batch.targets.clone())?);
        let loss = g.mse(pred, target)?;
        let value = g.value(loss).values()[0];
        for (i, grad) in g.backward(loss) {
            let buf = self.params[i].grad_mut();
            buf.iter_mut().zip(&grad).for_each(|(a, b)| *a += b);
            pool::give(grad);
        }
        Ok(value)
    }
}

/// `x · w + b`.
pub fn dense(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.matmul(x, w)?;
    g.add_bias(y, b)
}

#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    /// `[inputs × 4·units]`, gate blocks ordered input, forget, cell, output.
    pub wx: Var,
    /// `[units × 4·units]`.
    pub wh: Var,
    pub b: Var,
}

/// One LSTM step; returns the new `(h, c)`.
pub fn lstm_cell(g: &mut Graph, x: Var, h: Var, c: Var, p: LstmParams, units: usize) -> Result<(Var, Var)> {
    let zx = g.matmul(x, p.wx)?;
    let zh = g.matmul(h, p.wh)?;
    let z = g.add(zx, zh)?;
    let z = g.add_bias(z, p.b)?;
    let gate = |g: &mut Graph, k: usize| g.slice(z, k * units, units);
    let i = gate(g, 0)?;
    let f = gate(g, 1)?;
    let cand = gate(g, 2)?;
    let o = gate(g, 3)?;
    let i = g.sigmoid(i);
    let f = g.sigmoid(f);
    let cand = g.tanh(cand);
    let o = g.sigmoid(o);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_new = g.add(keep, write)?;
    let squashed = g.tanh(c_new);
    let h_new = g.mul(o, squashed)?;
    Ok((h_new, c_new))
}
