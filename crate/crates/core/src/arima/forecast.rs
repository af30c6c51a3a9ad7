use super::estimate::residuals;
use super::{difference, differencing_polynomial, ArimaError, ArimaFit, Result};

/// Point forecasts for the `horizon` steps after the end of `series`.
///
/// The ARMA recursion runs on the differenced scale with future innovations
/// set to zero; forecasts are then integrated back through the differencing
/// polynomial.
pub fn forecast(fit: &ArimaFit, series: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(ArimaError::InvalidHorizon);
    }
    let order = &fit.order;
    let w = difference(series, order.d, order.seasonal_d, order.seasonal_lag())?;
    let e = residuals(order, &fit.params(), &w).ok_or_else(|| {
        ArimaError::InvalidOrder("fit parameters are outside the stationary/invertible region".into())
    })?;
    let a = fit.full_ar();
    let b = fit.full_ma();
    let mu = fit.constant;
    let n = w.len();

    let mut x: Vec<f64> = w.iter().map(|v| v - mu).collect();
    for h in 0..horizon {
        let t = n + h;
        let mut v = 0.0;
        for (k, c) in a.iter().enumerate() {
            if let Some(i) = t.checked_sub(k + 1) {
                v += c * x[i];
            }
        }
        for (k, c) in b.iter().enumerate() {
            if let Some(i) = t.checked_sub(k + 1) {
                if i < n {
                    v += c * e[i];
                }
            }
        }
        x.push(v);
    }

    let delta = differencing_polynomial(order.d, order.seasonal_d, order.seasonal_lag());
    let mut y = series.to_vec();
    for h in 0..horizon {
        let t = y.len();
        let mut v = x[n + h] + mu;
        for (i, c) in delta.iter().enumerate().skip(1) {
            v -= *c as f64 * y[t - i];
        }
        y.push(v);
    }
    Ok(y.split_off(series.len()))
}
