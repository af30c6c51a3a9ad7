mod common;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ridebench::data::{OutputDesign, Shock, SupervisedWindow, HORIZON, LOOKBACK};
use ridebench::neural::tape::{Conv, Graph, Var};
use ridebench::neural::{
    dense, fine_tune, lstm_cell, read_checkpoint, train, write_checkpoint, Family, LstmParams, Network, NetworkSpec,
    NeuralError, Optimizer, Tensor, TrainConfig,
};

fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn window(stations: usize, rng: &mut ChaCha8Rng) -> SupervisedWindow {
    SupervisedWindow {
        origin: 21,
        origin_day: NaiveDate::from_ymd_opt(2019, 3, 4).unwrap(),
        stations: (0..stations).collect(),
        lookback: (0..stations * LOOKBACK).map(|_| rng.random_range(0.0..1.0)).collect(),
        temporal_features: [[0.0, 0.0, 0.0, 1.0, 0.3, 0.95]; HORIZON],
        target: (0..stations * HORIZON).map(|_| rng.random_range(0.0..1.0)).collect(),
    }
}

/// Relative error with an absolute floor for gradients that are essentially zero.
fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Builds a scalar loss from a list of parameter tensors.
type LossFn = dyn Fn(&mut Graph, &[Var]) -> Var;

fn loss_value(params: &[Tensor], build: &LossFn) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().enumerate().map(|(i, t)| g.param(i, t)).collect();
    let loss = build(&mut g, &vars);
    g.value(loss).values()[0]
}

/// Compares every listed parameter entry against a central difference with h = 1e-5.
fn check_gradients(params: &[Tensor], build: &LossFn, picks: &[(usize, usize)]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().enumerate().map(|(i, t)| g.param(i, t)).collect();
    let loss = build(&mut g, &vars);
    let grads = g.backward(loss);
    let mut worst: f64 = 0.0;
    for &(p, e) in picks {
        let analytic = grads.iter().find(|(i, _)| *i == p).map(|(_, v)| v[e]).unwrap();
        let h = 1e-5;
        let mut plus = params.to_vec();
        plus[p].values_mut()[e] += h;
        let mut minus = params.to_vec();
        minus[p].values_mut()[e] -= h;
        let numeric = (loss_value(&plus, build) - loss_value(&minus, build)) / (2.0 * h);
        worst = worst.max(rel_err(analytic, numeric));
    }
    worst
}

fn picks(rng: &mut ChaCha8Rng, params: &[Tensor], n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|_| {
            let p = rng.random_range(0..params.len());
            (p, rng.random_range(0..params[p].len()))
        })
        .collect()
}

#[test]
fn dense_layer_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (n, i, o) = (rng.random_range(1..5), rng.random_range(1..8), rng.random_range(1..6));
        let x = rand_tensor(&mut rng, n, i, 1.0);
        let t = rand_tensor(&mut rng, n, o, 1.0);
        let params = vec![rand_tensor(&mut rng, i, o, 1.0), rand_tensor(&mut rng, 1, o, 1.0)];
        let build = move |g: &mut Graph, v: &[Var]| {
            let xi = g.input(x.clone());
            let y = dense(g, xi, v[0], v[1]).unwrap();
            let y = g.tanh(y);
            let ti = g.input(t.clone());
            g.mse(y, ti).unwrap()
        };
        let sel = picks(&mut rng, &params, 6);
        let err = check_gradients(&params, &build, &sel);
        assert!(err < 1e-4, "dense relative error {err}");
    }
}

#[test]
fn dilated_conv_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let channels = rng.random_range(1..4);
        let steps = rng.random_range(8..22);
        let filters = rng.random_range(1..6);
        let dilation = rng.random_range(1..8);
        let n = rng.random_range(1..4);
        let x = rand_tensor(&mut rng, n, channels * steps, 1.0);
        let t = rand_tensor(&mut rng, n, steps * filters, 1.0);
        // The input is trainable here too, so input gradients are checked as well.
        let params = vec![
            rand_tensor(&mut rng, channels * 2, filters, 1.0),
            rand_tensor(&mut rng, 1, filters, 1.0),
            x,
        ];
        let build = move |g: &mut Graph, v: &[Var]| {
            let y = g
                .conv(Conv {
                    x: v[2],
                    w: v[0],
                    b: v[1],
                    channels,
                    steps,
                    kernel: 2,
                    dilation,
                    filters,
                })
                .unwrap();
            let ti = g.input(t.clone());
            g.mse(y, ti).unwrap()
        };
        let sel = picks(&mut rng, &params, 6);
        let err = check_gradients(&params, &build, &sel);
        assert!(err < 1e-4, "conv relative error {err}");
    }
}

#[test]
fn lstm_cell_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let inputs = rng.random_range(1..4);
        let units = rng.random_range(1..5);
        let n = rng.random_range(1..4);
        let steps = rng.random_range(1..6);
        let xs: Vec<Tensor> = (0..steps).map(|_| rand_tensor(&mut rng, n, inputs, 1.0)).collect();
        let t = rand_tensor(&mut rng, n, units, 1.0);
        let params = vec![
            rand_tensor(&mut rng, inputs, 4 * units, 1.0),
            rand_tensor(&mut rng, units, 4 * units, 1.0),
            rand_tensor(&mut rng, 1, 4 * units, 1.0),
        ];
        let build = move |g: &mut Graph, v: &[Var]| {
            let zeros = Tensor::zeros(vec![n, units]);
            let mut h = g.input(zeros.clone());
            let mut c = g.input(zeros);
            for x in &xs {
                let xi = g.input(x.clone());
                (h, c) = lstm_cell(g, xi, h, c, LstmParams { wx: v[0], wh: v[1], b: v[2] }, units).unwrap();
            }
            let both = g.add(h, c).unwrap();
            let ti = g.input(t.clone());
            g.mse(both, ti).unwrap()
        };
        let sel = picks(&mut rng, &params, 6);
        let err = check_gradients(&params, &build, &sel);
        assert!(err < 1e-4, "lstm relative error {err}");
    }
}

/// Whole-network check; entries whose difference quotient moves with the step
/// size sit on a ReLU kink and are skipped.
#[test]
fn network_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for family in [Family::Mlp, Family::Cnn, Family::Lstm] {
        let mut spec = NetworkSpec::new(family, 2, 2);
        spec.filters = 8;
        spec.units = 6;
        let mut net = Network::new(spec, 5).unwrap();
        let batch: Vec<SupervisedWindow> = (0..3).map(|_| window(2, &mut rng)).collect();
        let refs: Vec<&SupervisedWindow> = batch.iter().collect();
        net.zero_grad();
        net.backward(&refs).unwrap();
        let loss_at = |net: &Network| {
            let pred = net.forward(&refs).unwrap();
            let t: Vec<f64> = refs.iter().flat_map(|w| w.target.iter().copied()).collect();
            pred.values().iter().zip(&t).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / t.len() as f64
        };
        let (mut checked, mut skipped) = (0, 0);
        for _ in 0..60 {
            let p = rng.random_range(0..net.params().len());
            let e = rng.random_range(0..net.params()[p].len());
            let analytic = net.params()[p].grad().unwrap()[e];
            let fd = |h: f64| {
                let mut a = net.clone();
                a.params_mut()[p].values_mut()[e] += h;
                let mut b = net.clone();
                b.params_mut()[p].values_mut()[e] -= h;
                (loss_at(&a) - loss_at(&b)) / (2.0 * h)
            };
            let (n1, n2) = (fd(1e-5), fd(1e-6));
            if rel_err(n1, n2) > 1e-3 {
                skipped += 1;
                continue;
            }
            checked += 1;
            assert!(rel_err(analytic, n1) < 1e-4, "{family:?} param {p}[{e}]: {analytic} vs {n1}");
        }
        assert!(skipped * 10 <= checked, "{family:?}: {skipped} kinks vs {checked} checked");
    }
}

#[test]
fn parameter_counts_follow_closed_forms() {
    for (si, so) in [(1, 1), (3, 3), (20, 20), (5, 1)] {
        let input = si * 21 + 6;
        let output = so * 7;
        let hidden = (input + output + 1) / 2;
        let mlp = input * hidden + hidden + hidden * output + output;
        let cnn = si * 2 * 256 + 256 + (21 * 256 + 6) * output + output;
        let lstm = 4 * 32 * (si + 32 + 1) + (32 + 6) * output + output;
        for (family, expect) in [(Family::Mlp, mlp), (Family::Cnn, cnn), (Family::Lstm, lstm)] {
            let spec = NetworkSpec::new(family, si, so);
            assert_eq!(spec.parameter_count(), expect, "{family:?} {si}->{so}");
            assert_eq!(Network::new(spec, 0).unwrap().parameter_count(), expect);
        }
    }
}

#[test]
fn mlp_hidden_width_is_mean_of_input_and_output() {
    let spec = NetworkSpec::mlp(1, 1);
    assert_eq!(spec.input_width(), 27);
    assert_eq!(spec.output_width(), 7);
    assert_eq!(spec.hidden, 17);
}

#[test]
fn conv_receptive_field_is_t_and_t_minus_7() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let channels = 2;
    let x0 = rand_tensor(&mut rng, 1, channels * 21, 1.0);
    let w = rand_tensor(&mut rng, channels * 2, 5, 1.0);
    let b = rand_tensor(&mut rng, 1, 5, 1.0);
    let run = |x: &Tensor| {
        let mut g = Graph::new();
        let (xi, wi, bi) = (g.input(x.clone()), g.input(w.clone()), g.input(b.clone()));
        let y = g
            .conv(Conv {
                x: xi,
                w: wi,
                b: bi,
                channels,
                steps: 21,
                kernel: 2,
                dilation: 7,
                filters: 5,
            })
            .unwrap();
        g.value(y).values().to_vec()
    };
    let base = run(&x0);
    for ch in 0..channels {
        for day in 0..21 {
            let mut x = x0.clone();
            x.values_mut()[ch * 21 + day] += 0.37;
            let out = run(&x);
            let changed: Vec<usize> = (0..21)
                .filter(|&t| (0..5).any(|f| out[t * 5 + f] != base[t * 5 + f]))
                .collect();
            let expect: Vec<usize> = [day, day + 7].into_iter().filter(|&t| t < 21).collect();
            assert_eq!(changed, expect, "channel {ch} day {day}");
        }
    }
}

#[test]
fn lstm_final_state_repeats_from_reset() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let params = [
        rand_tensor(&mut rng, 3, 16, 0.5),
        rand_tensor(&mut rng, 4, 16, 0.5),
        rand_tensor(&mut rng, 1, 16, 0.5),
    ];
    let xs: Vec<Tensor> = (0..21).map(|_| rand_tensor(&mut rng, 2, 3, 1.0)).collect();
    let run = || {
        let mut g = Graph::new();
        let v: Vec<Var> = params.iter().enumerate().map(|(i, t)| g.param(i, t)).collect();
        let mut h = g.input(Tensor::zeros(vec![2, 4]));
        let mut c = g.input(Tensor::zeros(vec![2, 4]));
        for x in &xs {
            let xi = g.input(x.clone());
            (h, c) = lstm_cell(&mut g, xi, h, c, LstmParams { wx: v[0], wh: v[1], b: v[2] }, 4).unwrap();
        }
        (g.value(h).clone(), g.value(c).clone())
    };
    assert_eq!(run(), run());
}

fn sample_windows(stations: usize, n: usize, seed: u64) -> Vec<SupervisedWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| window(stations, &mut rng)).collect()
}

#[test]
fn forward_is_deterministic_and_pure() {
    for family in [Family::Mlp, Family::Cnn, Family::Lstm] {
        let ws = sample_windows(3, 5, 1);
        let refs: Vec<&SupervisedWindow> = ws.iter().collect();
        let a = Network::new(NetworkSpec::new(family, 3, 3), 9).unwrap();
        let b = Network::new(NetworkSpec::new(family, 3, 3), 9).unwrap();
        let p1 = a.forward(&refs).unwrap();
        assert_eq!(p1.shape(), &[5, 21]);
        assert_eq!(p1, a.forward(&refs).unwrap());
        assert_eq!(p1, b.forward(&refs).unwrap());
    }
}

#[test]
fn zero_parameters_predict_zero() {
    for family in [Family::Mlp, Family::Cnn, Family::Lstm] {
        let mut net = Network::new(NetworkSpec::new(family, 2, 2), 3).unwrap();
        for p in net.params_mut() {
            p.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let ws = sample_windows(2, 4, 2);
        let refs: Vec<&SupervisedWindow> = ws.iter().collect();
        assert!(net.forward(&refs).unwrap().values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn perfect_targets_give_zero_loss_and_gradient() {
    for family in [Family::Mlp, Family::Cnn, Family::Lstm] {
        let mut net = Network::new(NetworkSpec::new(family, 1, 1), 4).unwrap();
        let mut ws = sample_windows(1, 3, 3);
        let refs: Vec<&SupervisedWindow> = ws.iter().collect();
        let pred = net.forward(&refs).unwrap();
        for (i, w) in ws.iter_mut().enumerate() {
            w.target = pred.row(i).to_vec();
        }
        let refs: Vec<&SupervisedWindow> = ws.iter().collect();
        net.zero_grad();
        assert_eq!(net.backward(&refs).unwrap(), 0.0);
        assert!(net.params().iter().all(|p| p.grad().unwrap().iter().all(|&g| g == 0.0)));
    }
}

#[test]
fn mismatched_window_names_the_layer() {
    let net = Network::new(NetworkSpec::cnn(3, 3), 0).unwrap();
    let ws = sample_windows(2, 1, 0);
    let err = net.forward(&[&ws[0]]).unwrap_err();
    assert!(matches!(err, NeuralError::Shape { ref layer, .. } if layer == "input"), "{err}");
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let ws = sample_windows(1, 40, 5);
    let refs: Vec<&SupervisedWindow> = ws.iter().collect();
    for optimizer in [Optimizer::default(), Optimizer::sgd(0.9)] {
        let mut net = Network::new(NetworkSpec::lstm(1, 1), 1).unwrap();
        let before = net.params().iter().map(|p| p.values().to_vec()).collect::<Vec<_>>();
        let cfg = TrainConfig {
            epochs: 4,
            learning_rate: 0.0,
            optimizer,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &refs, &cfg).unwrap();
        let after = net.params().iter().map(|p| p.values().to_vec()).collect::<Vec<_>>();
        assert_eq!(before, after);
        let first = report.loss_trace[0];
        assert!(report.loss_trace.iter().all(|l| (l - first).abs() <= 1e-12 * first));
    }
}

#[test]
fn same_seed_same_trace() {
    let ws = sample_windows(2, 50, 6);
    let refs: Vec<&SupervisedWindow> = ws.iter().collect();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 8,
        seed: 77,
        ..TrainConfig::default()
    };
    let run = || {
        let mut net = Network::new(NetworkSpec::cnn(2, 2), 2).unwrap();
        let r = train(&mut net, &refs, &cfg).unwrap();
        (r.loss_trace, net.checksum())
    };
    assert_eq!(run(), run());
}

#[test]
fn mlp_fits_noiseless_linear_task() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let coef: Vec<f64> = (0..LOOKBACK).map(|_| rng.random_range(-0.1..0.1)).collect();
    let ws: Vec<SupervisedWindow> = (0..256)
        .map(|_| {
            let mut w = window(1, &mut rng);
            let base: f64 = w.lookback.iter().zip(&coef).map(|(x, c)| x * c).sum();
            w.target = (0..HORIZON).map(|h| base + 0.05 * h as f64).collect();
            w
        })
        .collect();
    let refs: Vec<&SupervisedWindow> = ws.iter().collect();
    let mut net = Network::new(NetworkSpec::mlp(1, 1), 3).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 32,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let report = train(&mut net, &refs, &cfg).unwrap();
    let last = *report.loss_trace.last().unwrap();
    assert!(last < 1e-3, "final loss {last}");
}

#[test]
fn divergence_reports_epoch_and_rate() {
    let ws = sample_windows(1, 16, 9);
    let refs: Vec<&SupervisedWindow> = ws.iter().collect();
    let mut net = Network::new(NetworkSpec::mlp(1, 1), 0).unwrap();
    let cfg = TrainConfig {
        epochs: 50,
        learning_rate: 1e300,
        optimizer: Optimizer::sgd(0.0),
        ..TrainConfig::default()
    };
    match train(&mut net, &refs, &cfg) {
        Err(NeuralError::Diverged { learning_rate, .. }) => assert_eq!(learning_rate, 1e300),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn zero_epoch_fine_tune_is_identity() {
    let ws = sample_windows(1, 10, 10);
    let refs: Vec<&SupervisedWindow> = ws.iter().collect();
    let mut net = Network::new(NetworkSpec::cnn(1, 1), 0).unwrap();
    let before = net.clone();
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::online_default()
    };
    fine_tune(&mut net, &refs, &cfg).unwrap();
    assert_eq!(net, before);
    assert!(train(&mut net, &refs, &cfg).is_err());
}

#[test]
fn checkpoint_round_trip_resumes_exactly() {
    let ws = sample_windows(2, 30, 12);
    let refs: Vec<&SupervisedWindow> = ws.iter().collect();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        ..TrainConfig::default()
    };
    for family in [Family::Mlp, Family::Cnn, Family::Lstm] {
        let mut net = Network::new(NetworkSpec::new(family, 2, 2), 1).unwrap();
        train(&mut net, &refs, &cfg).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&net, &mut bytes).unwrap();
        let mut restored = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(restored, net);
        train(&mut net, &refs, &cfg).unwrap();
        train(&mut restored, &refs, &cfg).unwrap();
        assert_eq!(restored.checksum(), net.checksum());

        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(read_checkpoint(wrong.as_slice()).is_err());
    }
}

fn one_step_mse(net: &Network, windows: &[&SupervisedWindow]) -> f64 {
    let pred = net.forward(windows).unwrap();
    windows
        .iter()
        .enumerate()
        .map(|(i, w)| (pred.row(i)[0] - w.target[0]).powi(2))
        .sum::<f64>()
        / windows.len() as f64
}

/// Daily fine-tuning as the runner does it: after day `t` is observed, the
/// newest 90 fully observed windows are replayed once.
fn observable<'a>(all: &'a [SupervisedWindow], day: usize, w: usize) -> Vec<&'a SupervisedWindow> {
    let newest = all.iter().filter(|x| x.origin + HORIZON <= day).collect::<Vec<_>>();
    newest[newest.len().saturating_sub(w)..].to_vec()
}

// A frozen MLP follows a pure level shift through its lookback inputs, so
// the comparison uses the LSTM, whose saturating gates do not.
#[test]
fn fine_tuning_recovers_from_level_shift() {
    let shift = 500;
    let sc = common::scenario(
        1,
        shift + 80,
        vec![Shock {
            start_day: shift,
            duration: None,
            level_multiplier: 0.4,
            closed_stations: vec![],
        }],
    );
    let panel = ridebench::data::generate_synthetic(&sc, 3).unwrap();
    let streams = common::windows(&panel, OutputDesign::Single, shift);
    let all = &streams[0];
    let train_set = observable(all, shift, usize::MAX);
    let mut net = Network::new(NetworkSpec::lstm(1, 1), 2).unwrap();
    let base = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    train(&mut net, &train_set, &base).unwrap();
    let frozen = net.clone();
    let online = TrainConfig::online_default();
    for day in shift + 1..=shift + 30 {
        let recent = observable(all, day, 90);
        fine_tune(&mut net, &recent, &TrainConfig { seed: day as u64, ..online.clone() }).unwrap();
    }
    let eval: Vec<&SupervisedWindow> = all.iter().filter(|w| w.origin > shift + 30).collect();
    let (tuned, still) = (one_step_mse(&net, &eval), one_step_mse(&frozen, &eval));
    assert!(tuned <= 0.5 * still, "fine-tuned {tuned} vs frozen {still}");
}

#[test]
fn fine_tuning_on_same_distribution_is_stable() {
    let panel = common::panel(1, 700, 4);
    let streams = common::windows(&panel, OutputDesign::Single, 600);
    let all = &streams[0];
    let train_set = observable(all, 600, usize::MAX);
    let mut net = Network::new(NetworkSpec::lstm(1, 1), 5).unwrap();
    train(&mut net, &train_set, &TrainConfig { epochs: 30, ..TrainConfig::default() }).unwrap();
    let eval: Vec<&SupervisedWindow> = all.iter().filter(|w| w.origin >= 600).collect();
    let before = one_step_mse(&net, &eval);
    for day in 600..630 {
        let recent = observable(all, day, 90);
        fine_tune(&mut net, &recent, &TrainConfig { seed: day as u64, ..TrainConfig::online_default() }).unwrap();
    }
    let after = one_step_mse(&net, &eval);
    assert!(after <= 1.1 * before, "loss grew from {before} to {after}");
}
