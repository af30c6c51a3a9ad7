//! Reverse-mode tape over matrix-valued nodes.
//!
//! Nodes are appended in evaluation order, so a single reverse sweep visits
//! every node after all of its consumers.

use super::{pool, NeuralError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Conv(Conv),
    Mse(Var, Var),
}

/// Causal 1-D convolution over `channels` series of `steps` each.
///
/// Input rows hold the series channel-major (`c * steps + t`); output rows
/// are time-major (`t * filters + f`). Tap `k` of a kernel of size `K`
/// reads step `t - (K - 1 - k) * dilation`, with zeros before the start.
/// Weights are `[(channels * K) × filters]`, row `c * K + k`.
#[derive(Debug, Clone, Copy)]
pub struct Conv {
    pub x: Var,
    pub w: Var,
    pub b: Var,
    pub channels: usize,
    pub steps: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub filters: usize,
}

impl Conv {
    fn offset(&self, k: usize) -> usize {
        (self.kernel - 1 - k) * self.dilation
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Drop for Graph {
    fn drop(&mut self) {
        for node in self.nodes.drain(..) {
            pool::give(node.value.into_values());
        }
    }
}

fn shape_err(layer: &str, expected: String, found: String) -> NeuralError {
    NeuralError::Shape {
        layer: layer.to_string(),
        expected,
        found,
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    /// Constant input; receives no gradient outside this graph.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Trainable leaf tagged with its index in the caller's parameter list.
    pub fn param(&mut self, index: usize, value: &Tensor) -> Var {
        self.push(value.detached(), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.dims(a);
        let (k2, m) = self.dims(b);
        if k != k2 {
            return Err(shape_err("matmul", format!("inner dimension {k}"), format!("{k2}")));
        }
        let av = self.value(a).values();
        let bv = self.value(b).values();
        let out = if narrow(k, m) {
            let bt = transpose(bv, k, m);
            let mut out = pool::with_capacity(n * m);
            for i in 0..n {
                let arow = &av[i * k..(i + 1) * k];
                out.extend(bt.chunks_exact(k).map(|col| dot(arow, col)));
            }
            out
        } else {
            let mut out = pool::zeros(n * m);
            for (i0, oblock) in (0..n).step_by(4).zip(out.chunks_mut(4 * m)) {
                let rows = oblock.len() / m;
                for kk in 0..k {
                    let brow = &bv[kk * m..(kk + 1) * m];
                    let coef: [f64; 4] = std::array::from_fn(|r| if r < rows { av[(i0 + r) * k + kk] } else { 0.0 });
                    axpy_rows(&coef, brow, oblock, m);
                }
            }
            out
        };
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::MatMul(a, b)))
    }

    /// Adds a `1 × cols` bias to every row.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (n, m) = self.dims(x);
        if self.value(b).len() != m {
            return Err(shape_err("bias", format!("{m} values"), format!("{}", self.value(b).len())));
        }
        let bv = self.value(b).values();
        let mut out = pool::copy(self.value(x).values());
        for row in out.chunks_mut(m) {
            row.iter_mut().zip(bv).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::AddBias(x, b)))
    }

    fn same_shape(&self, layer: &str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(shape_err(layer, format!("{da:?}"), format!("{db:?}")));
        }
        Ok(da)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, m) = self.same_shape("add", a, b)?;
        let out = zip_map(self.value(a).values(), self.value(b).values(), |x, y| x + y);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, m) = self.same_shape("mul", a, b)?;
        let out = zip_map(self.value(a).values(), self.value(b).values(), |x, y| x * y);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Mul(a, b)))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (n, m) = self.dims(x);
        let mut out = pool::with_capacity(n * m);
        out.extend(self.value(x).values().iter().map(|&v| f(v)));
        self.push(Tensor::matrix(n, m, out).expect("shape preserved"), op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let n = parts.first().map(|&p| self.dims(p).0).unwrap_or(0);
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims(p);
            if r != n {
                return Err(shape_err("concat", format!("{n} rows"), format!("{r}")));
            }
            widths.push(c);
        }
        let m: usize = widths.iter().sum();
        let mut out = pool::with_capacity(n * m);
        for i in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..start + width`.
    pub fn slice(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let (n, m) = self.dims(x);
        if start + width > m || width == 0 {
            return Err(shape_err("slice", format!("columns within {m}"), format!("{start}..{}", start + width)));
        }
        let mut out = pool::with_capacity(n * width);
        for i in 0..n {
            out.extend_from_slice(&self.value(x).row(i)[start..start + width]);
        }
        Ok(self.push(Tensor::matrix(n, width, out)?, Op::Slice { x, start }))
    }

    pub fn conv(&mut self, c: Conv) -> Result<Var> {
        let (n, m) = self.dims(c.x);
        if m != c.channels * c.steps {
            return Err(shape_err("conv", format!("{} input columns", c.channels * c.steps), format!("{m}")));
        }
        let (wr, wc) = self.dims(c.w);
        if wr != c.channels * c.kernel || wc != c.filters {
            return Err(shape_err(
                "conv",
                format!("weights {}x{}", c.channels * c.kernel, c.filters),
                format!("{wr}x{wc}"),
            ));
        }
        if self.value(c.b).len() != c.filters {
            return Err(shape_err("conv", format!("{} biases", c.filters), format!("{}", self.value(c.b).len())));
        }
        let (f, t_len) = (c.filters, c.steps);
        let xv = self.value(c.x).values();
        let wv = self.value(c.w).values();
        let bv = self.value(c.b).values();
        let mut out = pool::zeros(n * t_len * f);
        for i in 0..n {
            let xrow = &xv[i * m..(i + 1) * m];
            for t in 0..t_len {
                let orow = &mut out[(i * t_len + t) * f..(i * t_len + t + 1) * f];
                orow.copy_from_slice(bv);
                for ch in 0..c.channels {
                    for k in 0..c.kernel {
                        let Some(src) = t.checked_sub(c.offset(k)) else { continue };
                        let x = xrow[ch * t_len + src];
                        if x != 0.0 {
                            let r = ch * c.kernel + k;
                            axpy(x, &wv[r * f..(r + 1) * f], orow);
                        }
                    }
                }
            }
        }
        Ok(self.push(Tensor::matrix(n, t_len * f, out)?, Op::Conv(c)))
    }

    /// Mean over all entries of `(pred - target)²`, as a `1 × 1` node.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse", pred, target)?;
        let p = self.value(pred).values();
        let t = self.value(target).values();
        let loss = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len().max(1) as f64;
        Ok(self.push(Tensor::matrix(1, 1, vec![loss])?, Op::Mse(pred, target)))
    }

    /// Back-propagates from the scalar `root`; returns `(param index, gradient)`
    /// for every parameter leaf reached, in leaf creation order.
    pub fn backward(&self, root: Var) -> Vec<(usize, Vec<f64>)> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0; self.value(root).len()]);
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(_) => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (n, k) = self.dims(*a);
                    let m = self.dims(*b).1;
                    let av = self.value(*a).values();
                    let bv = self.value(*b).values();
                    if narrow(k, m) {
                        self.matmul_backward_narrow(&mut grads, (*a, *b), (n, k, m), &g);
                        pool::give(g);
                        continue;
                    }
                    if self.wants(*a) {
                        let ga = slot(&mut grads, *a, n * k);
                        for i in 0..n {
                            let grow = &g[i * m..(i + 1) * m];
                            for kk in 0..k {
                                ga[i * k + kk] += dot(grow, &bv[kk * m..(kk + 1) * m]);
                            }
                        }
                    }
                    if self.wants(*b) {
                        let gb = slot(&mut grads, *b, k * m);
                        for i0 in (0..n).step_by(4) {
                            let rows = (n - i0).min(4);
                            let gblock = &g[i0 * m..(i0 + rows) * m];
                            for kk in 0..k {
                                let coef: [f64; 4] =
                                    std::array::from_fn(|r| if r < rows { av[(i0 + r) * k + kk] } else { 0.0 });
                                gather_rows(&coef, gblock, &mut gb[kk * m..(kk + 1) * m], m);
                            }
                        }
                    }
                }
                Op::AddBias(x, b) => {
                    let m = self.dims(*x).1;
                    if self.wants(*b) {
                        let gb = slot(&mut grads, *b, m);
                        for row in g.chunks(m) {
                            gb.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                        }
                    }
                    self.accumulate(&mut grads, *x, g);
                    continue;
                }
                Op::Add(a, b) => {
                    if self.wants(*a) {
                        self.accumulate(&mut grads, *a, pool::copy(&g));
                    }
                    self.accumulate(&mut grads, *b, g);
                    continue;
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).values();
                    let bv = self.value(*b).values();
                    if self.wants(*a) {
                        let ga = slot(&mut grads, *a, g.len());
                        for i in 0..g.len() {
                            ga[i] += g[i] * bv[i];
                        }
                    }
                    if self.wants(*b) {
                        let gb = slot(&mut grads, *b, g.len());
                        for i in 0..g.len() {
                            gb[i] += g[i] * av[i];
                        }
                    }
                }
                Op::Relu(x) => {
                    let xv = self.value(*x).values();
                    let d = scaled(&g, xv, |v| if v > 0.0 { 1.0 } else { 0.0 });
                    self.accumulate(&mut grads, *x, d);
                }
                Op::Sigmoid(x) => {
                    let y = node.value.values();
                    let d = scaled(&g, y, |y| y * (1.0 - y));
                    self.accumulate(&mut grads, *x, d);
                }
                Op::Tanh(x) => {
                    let y = node.value.values();
                    let d = scaled(&g, y, |y| 1.0 - y * y);
                    self.accumulate(&mut grads, *x, d);
                }
                Op::Concat(parts) => {
                    let n = node.value.rows();
                    let m = node.value.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.dims(p).1;
                        if self.wants(p) {
                            let gp = slot(&mut grads, p, n * w);
                            for i in 0..n {
                                let src = &g[i * m + offset..i * m + offset + w];
                                gp[i * w..(i + 1) * w].iter_mut().zip(src).for_each(|(a, s)| *a += s);
                            }
                        }
                        offset += w;
                    }
                }
                Op::Slice { x, start } => {
                    if self.wants(*x) {
                        let (n, m) = self.dims(*x);
                        let w = node.value.cols();
                        let gx = slot(&mut grads, *x, n * m);
                        for i in 0..n {
                            let dst = &mut gx[i * m + start..i * m + start + w];
                            dst.iter_mut().zip(&g[i * w..(i + 1) * w]).for_each(|(a, s)| *a += s);
                        }
                    }
                }
                Op::Conv(c) => self.conv_backward(&mut grads, c, &g),
                Op::Mse(p, t) => {
                    let pv = self.value(*p).values();
                    let tv = self.value(*t).values();
                    let scale = 2.0 * g[0] / pv.len().max(1) as f64;
                    let d = zip_map(pv, tv, |a, b| scale * (a - b));
                    if self.wants(*t) {
                        let neg = d.iter().map(|v| -v).collect();
                        self.accumulate(&mut grads, *t, neg);
                    }
                    self.accumulate(&mut grads, *p, d);
                }
            }
            pool::give(g);
        }
        self.nodes
            .iter()
            .enumerate()
            .take(root.0 + 1)
            .filter_map(|(i, n)| match n.op {
                Op::Param(p) => Some((p, grads[i].take().unwrap_or_else(|| pool::zeros(n.value.len())))),
                _ => None,
            })
            .collect()
    }

    /// Same products as the wide path, organised along `k` so the inner
    /// loops stay long when the output is only a few columns wide.
    fn matmul_backward_narrow(
        &self,
        grads: &mut [Option<Vec<f64>>],
        (a, b): (Var, Var),
        (n, k, m): (usize, usize, usize),
        g: &[f64],
    ) {
        let av = self.value(a).values();
        let bv = self.value(b).values();
        if self.wants(a) {
            let bt = transpose(bv, k, m);
            let ga = slot(grads, a, n * k);
            for i in 0..n {
                let garow = &mut ga[i * k..(i + 1) * k];
                for (j, col) in bt.chunks_exact(k).enumerate() {
                    let x = g[i * m + j];
                    if x != 0.0 {
                        axpy(x, col, garow);
                    }
                }
            }
        }
        if self.wants(b) {
            let mut gbt = vec![0.0; m * k];
            for i in 0..n {
                let arow = &av[i * k..(i + 1) * k];
                for (j, acc) in gbt.chunks_exact_mut(k).enumerate() {
                    let x = g[i * m + j];
                    if x != 0.0 {
                        axpy(x, arow, acc);
                    }
                }
            }
            let gb = slot(grads, b, k * m);
            for (j, col) in gbt.chunks_exact(k).enumerate() {
                for (kk, v) in col.iter().enumerate() {
                    gb[kk * m + j] += v;
                }
            }
        }
    }

    fn conv_backward(&self, grads: &mut [Option<Vec<f64>>], c: &Conv, g: &[f64]) {
        let (n, m) = self.dims(c.x);
        let (f, t_len) = (c.filters, c.steps);
        let xv = self.value(c.x).values();
        let wv = self.value(c.w).values();
        if self.wants(c.b) {
            let gb = slot(grads, c.b, f);
            for row in g.chunks(f) {
                gb.iter_mut().zip(row).for_each(|(a, r)| *a += r);
            }
        }
        if self.wants(c.w) {
            let gw = slot(grads, c.w, c.channels * c.kernel * f);
            for i in 0..n {
                for t in 0..t_len {
                    let grow = &g[(i * t_len + t) * f..(i * t_len + t + 1) * f];
                    for ch in 0..c.channels {
                        for k in 0..c.kernel {
                            let Some(src) = t.checked_sub(c.offset(k)) else { continue };
                            let x = xv[i * m + ch * t_len + src];
                            if x != 0.0 {
                                let r = ch * c.kernel + k;
                                axpy(x, grow, &mut gw[r * f..(r + 1) * f]);
                            }
                        }
                    }
                }
            }
        }
        if self.wants(c.x) {
            let gx = slot(grads, c.x, n * m);
            for i in 0..n {
                for t in 0..t_len {
                    let grow = &g[(i * t_len + t) * f..(i * t_len + t + 1) * f];
                    for ch in 0..c.channels {
                        for k in 0..c.kernel {
                            let Some(src) = t.checked_sub(c.offset(k)) else { continue };
                            let r = ch * c.kernel + k;
                            gx[i * m + ch * t_len + src] += dot(grow, &wv[r * f..(r + 1) * f]);
                        }
                    }
                }
            }
        }
    }

    /// Plain inputs never need gradients.
    fn wants(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Leaf)
    }

    /// Adds `g` into `v`'s gradient, taking ownership when the slot is empty.
    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
        if !self.wants(v) {
            pool::give(g);
            return;
        }
        match grads[v.0].as_mut() {
            Some(acc) => {
                acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                pool::give(g);
            }
            None => grads[v.0] = Some(g),
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| pool::zeros(len))
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = pool::with_capacity(a.len());
    out.extend(a.iter().zip(b).map(|(&x, &y)| f(x, y)));
    out
}

/// `g ⊙ d(x)` into a pooled buffer.
fn scaled(g: &[f64], x: &[f64], d: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = pool::with_capacity(g.len());
    out.extend(g.iter().zip(x).map(|(g, &x)| g * d(x)));
    out
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `out_r += coef_r · x` for each of up to four rows of width `m`.
#[inline]
fn axpy_rows(coef: &[f64; 4], x: &[f64], out: &mut [f64], m: usize) {
    let rows = out.len() / m;
    if rows == 4 {
        let (r0, rest) = out.split_at_mut(m);
        let (r1, rest) = rest.split_at_mut(m);
        let (r2, r3) = rest.split_at_mut(m);
        for j in 0..m {
            let v = x[j];
            r0[j] += coef[0] * v;
            r1[j] += coef[1] * v;
            r2[j] += coef[2] * v;
            r3[j] += coef[3] * v;
        }
    } else {
        for (r, row) in out.chunks_mut(m).enumerate() {
            axpy(coef[r], x, row);
        }
    }
}

/// `out += Σ_r coef_r · x_r` over up to four rows of `x`.
#[inline]
fn gather_rows(coef: &[f64; 4], x: &[f64], out: &mut [f64], m: usize) {
    let rows = x.len() / m;
    if rows == 4 {
        let (x0, rest) = x.split_at(m);
        let (x1, rest) = rest.split_at(m);
        let (x2, x3) = rest.split_at(m);
        for j in 0..m {
            out[j] += coef[0] * x0[j] + coef[1] * x1[j] + coef[2] * x2[j] + coef[3] * x3[j];
        }
    } else {
        for (r, row) in x.chunks(m).enumerate() {
            axpy(coef[r], row, out);
        }
    }
}

/// Four independent accumulators so the loop vectorises.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Narrow outputs with a long inner dimension use the transposed kernels.
fn narrow(k: usize, m: usize) -> bool {
    m < 16 && k >= 4 * m
}

fn transpose(v: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; v.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = v[r * cols + c];
        }
    }
    t
}
