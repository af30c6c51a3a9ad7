//! KPSS level-stationarity test with a Bartlett-kernel long-run variance.

use super::{ArimaError, Result};

/// 5% critical value of the level-stationarity statistic.
pub const KPSS_CRITICAL_5PCT: f64 = 0.463;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpssResult {
    pub statistic: f64,
    pub bandwidth: usize,
    /// True when the statistic exceeds the 5% critical value.
    pub nonstationary: bool,
}

/// `⌊4 (n/100)^{1/4}⌋`.
pub fn kpss_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

pub fn kpss_stationarity(series: &[f64]) -> Result<KpssResult> {
    let n = series.len();
    if n < 12 {
        return Err(ArimaError::SeriesTooShort { len: n, needed: 12 });
    }
    let bandwidth = kpss_bandwidth(n);
    let mean = series.iter().sum::<f64>() / n as f64;
    let resid: Vec<f64> = series.iter().map(|x| x - mean).collect();

    let nf = n as f64;
    let mut lrv = resid.iter().map(|e| e * e).sum::<f64>() / nf;
    for lag in 1..=bandwidth.min(n - 1) {
        let gamma: f64 = resid[lag..].iter().zip(&resid).map(|(a, b)| a * b).sum::<f64>() / nf;
        let weight = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
        lrv += 2.0 * weight * gamma;
    }

    let mut partial = 0.0;
    let mut sum_sq = 0.0;
    for e in &resid {
        partial += e;
        sum_sq += partial * partial;
    }
    // a constant series has zero residuals and zero long-run variance
    let statistic = if lrv <= f64::EPSILON * mean.abs().max(1.0) || sum_sq == 0.0 {
        0.0
    } else {
        sum_sq / (nf * nf * lrv)
    };
    Ok(KpssResult {
        statistic,
        bandwidth,
        nonstationary: statistic > KPSS_CRITICAL_5PCT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_series_is_stationary() {
        let r = kpss_stationarity(&[3.5; 40]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.nonstationary);
    }

    #[test]
    fn bandwidth_formula() {
        assert_eq!(kpss_bandwidth(100), 4);
        assert_eq!(kpss_bandwidth(500), 5);
        assert_eq!(kpss_bandwidth(2000), 8);
        assert_eq!(kpss_bandwidth(12), 2);
    }

    #[test]
    fn too_short() {
        assert!(kpss_stationarity(&[1.0; 11]).is_err());
    }

    #[test]
    fn random_walks_are_rejected() {
        let rejected = (0..100)
            .filter(|&seed| {
                let walk: Vec<f64> = noise(seed, 500)
                    .iter()
                    .scan(0.0, |acc, z| {
                        *acc += z;
                        Some(*acc)
                    })
                    .collect();
                kpss_stationarity(&walk).unwrap().nonstationary
            })
            .count();
        assert!(rejected >= 95, "only {rejected}/100 random walks rejected");
    }

    #[test]
    fn white_noise_is_accepted() {
        let accepted = (0..100)
            .filter(|&seed| !kpss_stationarity(&noise(1000 + seed, 500)).unwrap().nonstationary)
            .count();
        assert!(accepted >= 90, "only {accepted}/100 white-noise series accepted");
    }
}
