//! Conditional-sum-of-squares estimation.
//!
//! Residuals are computed on the differenced series `w` with pre-sample
//! deviations `w − μ` and pre-sample innovations set to zero, so every
//! candidate order with the same differencing is scored on the same `n`
//! observations and AIC values are directly comparable.

use serde::{Deserialize, Serialize};

use super::{
    difference, is_stationary, minimize_bfgs, multiply_lag_polynomials, ArimaError, ArimaOrder, BfgsOptions,
    Result, ROOT_MARGIN,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub seasonal_ar: Vec<f64>,
    pub seasonal_ma: Vec<f64>,
    /// Mean (d + D = 0) or drift (d + D = 1) of the differenced series; 0 without a constant.
    pub constant: f64,
    pub sigma2: f64,
    pub aic: f64,
    /// Length of the undifferenced series the fit was estimated on.
    pub n_obs: usize,
}

impl ArimaFit {
    /// Optimiser parameter vector `[φ, θ, Φ, Θ, μ?]`.
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.order.n_params());
        v.extend(&self.ar);
        v.extend(&self.ma);
        v.extend(&self.seasonal_ar);
        v.extend(&self.seasonal_ma);
        if self.order.with_constant {
            v.push(self.constant);
        }
        v
    }

    /// Expanded AR lag polynomial `1 − Σ a_k B^k` (returns `a`).
    pub fn full_ar(&self) -> Vec<f64> {
        multiply_lag_polynomials(&self.ar, &self.seasonal_ar, self.order.period, 1.0)
    }

    /// Expanded MA lag polynomial `1 + Σ b_k B^k` (returns `b`).
    pub fn full_ma(&self) -> Vec<f64> {
        multiply_lag_polynomials(&self.ma, &self.seasonal_ma, self.order.period, -1.0)
    }

    /// Bit-level fingerprint of every parameter, for leakage audits.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv::default();
        for v in self.params().iter().chain([self.sigma2, self.aic].iter()) {
            h.write(&v.to_bits().to_le_bytes());
        }
        h.write(&(self.n_obs as u64).to_le_bytes());
        h.0
    }
}

#[derive(Default)]
struct Fnv(u64);

impl Fnv {
    fn write(&mut self, bytes: &[u8]) {
        if self.0 == 0 {
            self.0 = 0xcbf2_9ce4_8422_2325;
        }
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

struct Unpacked<'a> {
    ar: &'a [f64],
    ma: &'a [f64],
    sar: &'a [f64],
    sma: &'a [f64],
    mu: f64,
}

fn unpack<'a>(order: &ArimaOrder, x: &'a [f64]) -> Unpacked<'a> {
    let (ar, rest) = x.split_at(order.p);
    let (ma, rest) = rest.split_at(order.q);
    let (sar, rest) = rest.split_at(order.seasonal_p);
    let (sma, rest) = rest.split_at(order.seasonal_q);
    Unpacked {
        ar,
        ma,
        sar,
        sma,
        mu: if order.with_constant { rest[0] } else { 0.0 },
    }
}

/// Stationarity / invertibility of every factor, with root margin.
fn admissible(order: &ArimaOrder, u: &Unpacked<'_>) -> bool {
    let seasonal_margin = (1.0 + ROOT_MARGIN).powi(order.period.max(1) as i32) - 1.0;
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    is_stationary(u.ar, ROOT_MARGIN)
        && is_stationary(&neg(u.ma), ROOT_MARGIN)
        && is_stationary(u.sar, seasonal_margin)
        && is_stationary(&neg(u.sma), seasonal_margin)
}

/// Residuals `e_t` of the ARMA recursion on `w` (returned alongside the expanded polynomials).
pub(crate) fn residuals(order: &ArimaOrder, x: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let u = unpack(order, x);
    if !admissible(order, &u) || !u.mu.is_finite() {
        return None;
    }
    let a = multiply_lag_polynomials(u.ar, u.sar, order.period, 1.0);
    let b = multiply_lag_polynomials(u.ma, u.sma, order.period, -1.0);
    let a_nz: Vec<(usize, f64)> = a.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (i + 1, *c)).collect();
    let b_nz: Vec<(usize, f64)> = b.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (i + 1, *c)).collect();
    let mut e = Vec::with_capacity(w.len());
    for t in 0..w.len() {
        let mut v = w[t] - u.mu;
        for &(k, c) in &a_nz {
            if k <= t {
                v -= c * (w[t - k] - u.mu);
            }
        }
        for &(k, c) in &b_nz {
            if k <= t {
                v -= c * e[t - k];
            }
        }
        e.push(v);
    }
    Some(e)
}

#[derive(Debug, Clone, Default)]
pub struct EstimateOptions {
    pub bfgs: BfgsOptions,
    /// Warm start; zeros when absent.
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Estimation {
    pub fit: ArimaFit,
    /// Scaled CSS objective at the start and after each optimiser step.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

pub fn estimate(series: &[f64], order: ArimaOrder) -> Result<ArimaFit> {
    estimate_with(series, order, &EstimateOptions::default()).map(|e| e.fit)
}

pub fn estimate_with(series: &[f64], order: ArimaOrder, opts: &EstimateOptions) -> Result<Estimation> {
    order.validate()?;
    let needed = order.min_series_len();
    if series.len() < needed {
        return Err(ArimaError::SeriesTooShort {
            len: series.len(),
            needed,
        });
    }
    let w = difference(series, order.d, order.seasonal_d, order.seasonal_lag())?;
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    // scale-free objective: the tolerance means the same thing for any series scale
    let scale = if var > 0.0 { var } else { 1.0 };

    let objective = |x: &[f64]| match residuals(&order, x, &w) {
        Some(e) => e.iter().map(|v| v * v).sum::<f64>() / (n * scale),
        None => f64::INFINITY,
    };

    let start = match &opts.start {
        Some(s) if s.len() == order.n_params() => s.clone(),
        Some(s) => {
            return Err(ArimaError::InvalidOrder(format!(
                "warm start has {} parameters, order {order} needs {}",
                s.len(),
                order.n_params()
            )))
        }
        None => vec![0.0; order.n_params()],
    };
    if !objective(&start).is_finite() {
        return Err(ArimaError::InfeasibleStart);
    }

    let out = minimize_bfgs(objective, start, &opts.bfgs);
    let fit = build_fit(order, &out.x, &w, series.len());
    if !out.converged {
        return Err(ArimaError::NotConverged {
            iterations: out.iterations,
            objective: out.value,
            best: Box::new(fit),
        });
    }
    Ok(Estimation {
        fit,
        trace: out.trace,
        iterations: out.iterations,
    })
}

fn build_fit(order: ArimaOrder, x: &[f64], w: &[f64], n_obs: usize) -> ArimaFit {
    let e = residuals(&order, x, w).expect("optimiser returned an inadmissible point");
    let n = w.len() as f64;
    let sigma2 = (e.iter().map(|v| v * v).sum::<f64>() / n).max(f64::MIN_POSITIVE);
    let k = (order.n_params() + 1) as f64;
    let u = unpack(&order, x);
    ArimaFit {
        order,
        ar: u.ar.to_vec(),
        ma: u.ma.to_vec(),
        seasonal_ar: u.sar.to_vec(),
        seasonal_ma: u.sma.to_vec(),
        constant: u.mu,
        sigma2,
        aic: n * sigma2.ln() + 2.0 * k,
        n_obs,
    }
}

/// Re-estimates `fit`'s order on `extended`, a series that begins with the
/// observations `fit` was estimated on, warm-starting from its parameters.
pub fn update(fit: &ArimaFit, extended: &[f64]) -> Result<ArimaFit> {
    update_with(fit, extended, &BfgsOptions::default())
}

pub(crate) fn update_with(fit: &ArimaFit, extended: &[f64], bfgs: &BfgsOptions) -> Result<ArimaFit> {
    if extended.len() < fit.n_obs {
        return Err(ArimaError::SeriesShorterThanFit {
            len: extended.len(),
            n_obs: fit.n_obs,
        });
    }
    let opts = EstimateOptions {
        bfgs: *bfgs,
        start: Some(fit.params()),
    };
    estimate_with(extended, fit.order, &opts).map(|e| e.fit)
}
