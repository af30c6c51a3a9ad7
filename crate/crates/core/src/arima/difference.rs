use std::ops::{Add, Mul};

use super::{ArimaError, Result};

/// Coefficients `δ_0..δ_L` of `(1 − B)^d (1 − B^m)^D`, `δ_0 = 1`.
pub fn differencing_polynomial(d: usize, seasonal_d: usize, period: usize) -> Vec<i64> {
    let mut poly = vec![1i64];
    for _ in 0..d {
        poly = multiply(&poly, &[1, -1]);
    }
    if period > 0 {
        let mut seasonal = vec![0i64; period + 1];
        seasonal[0] = 1;
        seasonal[period] = -1;
        for _ in 0..seasonal_d {
            poly = multiply(&poly, &seasonal);
        }
    }
    poly
}

fn multiply(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Applies `(1 − B)^d (1 − B^m)^D`. The output is `d + D·m` shorter than the input.
///
/// Works on any ring-like scalar, so integer input is differenced exactly.
pub fn difference<T>(series: &[T], d: usize, seasonal_d: usize, period: usize) -> Result<Vec<T>>
where
    T: Copy + Add<Output = T> + Mul<Output = T> + From<i32>,
{
    let lag = if period > 0 { period } else { 0 };
    let loss = d + seasonal_d * lag;
    if series.len() <= loss {
        return Err(ArimaError::SeriesTooShort {
            len: series.len(),
            needed: loss + 1,
        });
    }
    let delta = differencing_polynomial(d, if period > 0 { seasonal_d } else { 0 }, period);
    let weights: Vec<(usize, T)> = delta
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0)
        .map(|(i, &c)| (i, T::from(c as i32)))
        .collect();
    Ok((loss..series.len())
        .map(|t| {
            let mut acc = T::from(0);
            for &(i, c) in &weights {
                acc = acc + c * series[t - i];
            }
            acc
        })
        .collect())
}
