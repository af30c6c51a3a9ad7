use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::labels::{ConditionLabels, REGRESSORS};
use super::{AnalysisError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

impl Coefficient {
    pub fn stars(&self) -> &'static str {
        stars(self.t_stat)
    }

    /// 95% normal confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.estimate - Z05 * self.std_error, self.estimate + Z05 * self.std_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRegression {
    pub experiment: String,
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n: usize,
}

impl ConditionRegression {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.coefficients.iter().map(|c| c.name.as_str())
    }
}

/// Two-sided standard normal critical values at 10%, 5% and 1%.
const Z10: f64 = 1.644_853_626_951_472_2;
const Z05: f64 = 1.959_963_984_540_054;
const Z01: f64 = 2.575_829_303_548_900_4;

/// Significance marks for a t statistic; ties go to the weaker mark.
pub fn stars(t: f64) -> &'static str {
    let a = t.abs();
    if a > Z01 {
        "***"
    } else if a > Z05 {
        "**"
    } else if a > Z10 {
        "*"
    } else {
        ""
    }
}

fn p_value(t: f64) -> f64 {
    erfc(t.abs() / std::f64::consts::SQRT_2)
}

/// Columns that add no rank to the columns before them.
fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let scale = x.norm().max(1.0);
    let mut kept: Vec<usize> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let mut cols = kept.clone();
        cols.push(j);
        let sub = x.select_columns(&cols);
        if sub.svd(false, false).rank(1e-10 * scale) == cols.len() {
            kept.push(j);
        } else {
            bad.push(names[j].clone());
        }
    }
    bad
}

/// Ordinary least squares of `y` on the columns of `x`.
pub fn fit_ols(experiment: &str, y: &[f64], x: &DMatrix<f64>, names: &[String]) -> Result<ConditionRegression> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(AnalysisError::LengthMismatch {
            what: "response length",
            expected: n,
            found: y.len(),
        });
    }
    if names.len() != k {
        return Err(AnalysisError::LengthMismatch {
            what: "column names",
            expected: k,
            found: names.len(),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite(i));
    }
    if n < k + 2 {
        return Err(AnalysisError::TooFewObservations { n, k });
    }
    let bad = collinear_columns(x, names);
    if !bad.is_empty() {
        return Err(AnalysisError::RankDeficient { columns: bad });
    }
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| AnalysisError::RankDeficient { columns: names.to_vec() })?;
    let resid = &yv - x * &beta;
    let rss = resid.norm_squared();
    let mean = yv.mean();
    let tss: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let sigma2 = rss / (n - k) as f64;
    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| AnalysisError::RankDeficient { columns: names.to_vec() })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let coefficients = (0..k)
        .map(|j| {
            let se = (sigma2 * xtx_inv[(j, j)]).sqrt();
            let t = beta[j] / se;
            Coefficient {
                name: names[j].clone(),
                estimate: beta[j],
                std_error: se,
                t_stat: t,
                p_value: if se > 0.0 { p_value(t) } else { 0.0 },
            }
        })
        .collect();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / (n - k) as f64;
    Ok(ConditionRegression {
        experiment: experiment.to_string(),
        coefficients,
        r_squared,
        adj_r_squared,
        n,
    })
}

/// Fits the condition model to one daily MAAPE series.
pub fn fit_conditions(experiment: &str, maape: &[f64], labels: &ConditionLabels) -> Result<ConditionRegression> {
    if maape.len() != labels.len() {
        return Err(AnalysisError::LengthMismatch {
            what: "labels",
            expected: maape.len(),
            found: labels.len(),
        });
    }
    let x = DMatrix::from_fn(labels.len(), REGRESSORS.len(), |i, j| labels.row(i)[j]);
    let names: Vec<String> = REGRESSORS.iter().map(|s| s.to_string()).collect();
    fit_ols(experiment, maape, &x, &names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub difference: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

impl Comparison {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// z-test of one coefficient between two independently fitted cells.
pub fn compare_cells(a: &ConditionRegression, b: &ConditionRegression, name: &str) -> Result<Comparison> {
    if !a.names().eq(b.names()) {
        return Err(AnalysisError::RegressorMismatch);
    }
    let (ca, cb) = match (a.coefficient(name), b.coefficient(name)) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(AnalysisError::MissingCoefficient(name.to_string())),
    };
    let difference = ca.estimate - cb.estimate;
    let std_error = (ca.std_error.powi(2) + cb.std_error.powi(2)).sqrt();
    let z = if difference == 0.0 { 0.0 } else { difference / std_error };
    Ok(Comparison {
        name: name.to_string(),
        difference,
        std_error,
        z,
        p_value: p_value(z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(stars(-3.0), "***");
        assert_eq!(stars(1.0), "");
        for (z, alpha) in [(Z10, 0.10), (Z05, 0.05), (Z01, 0.01)] {
            assert!((p_value(z) - alpha).abs() < 1e-9, "{z}: {}", p_value(z));
        }
    }
}
