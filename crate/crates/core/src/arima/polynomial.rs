/// Roots must have modulus above `1 + ROOT_MARGIN`.
pub const ROOT_MARGIN: f64 = 1e-6;

/// True when every root of `1 − c₁z − … − c_k z^k` satisfies `|z| > 1 + margin`.
///
/// Runs the Durbin–Levinson recursion backwards (step-down) on the
/// coefficients rescaled by `(1 + margin)^i`; the polynomial is stable iff
/// every reflection coefficient has modulus below one.
pub fn is_stationary(coeffs: &[f64], margin: f64) -> bool {
    let k = match coeffs.iter().rposition(|c| *c != 0.0) {
        Some(i) => i + 1,
        None => return true,
    };
    if coeffs[..k].iter().any(|c| !c.is_finite()) {
        return false;
    }
    let scale = 1.0 + margin;
    let mut a: Vec<f64> = coeffs[..k]
        .iter()
        .enumerate()
        .map(|(i, c)| c * scale.powi(i as i32 + 1))
        .collect();
    for order in (1..=k).rev() {
        let kappa = a[order - 1];
        if kappa.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - kappa * kappa;
        let prev: Vec<f64> = (0..order - 1)
            .map(|j| (a[j] + kappa * a[order - 2 - j]) / denom)
            .collect();
        a = prev;
    }
    true
}

/// Coefficients of `(1 − Σ a_i B^i)(1 − Σ b_j B^{j·lag})`, returned as the
/// `c` in `1 − Σ c_k B^k`. `sign = −1` gives the MA convention `1 + Σ`.
pub fn multiply_lag_polynomials(a: &[f64], b: &[f64], lag: usize, sign: f64) -> Vec<f64> {
    let len = a.len() + b.len() * lag;
    let mut full = vec![0.0; len + 1];
    // work with 1 + Σ sign·(-x) B^i style coefficients explicitly
    let mut pa = vec![0.0; a.len() + 1];
    pa[0] = 1.0;
    for (i, x) in a.iter().enumerate() {
        pa[i + 1] = -sign * x;
    }
    let mut pb = vec![0.0; b.len() * lag + 1];
    pb[0] = 1.0;
    for (j, x) in b.iter().enumerate() {
        pb[(j + 1) * lag] = -sign * x;
    }
    for (i, x) in pa.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in pb.iter().enumerate() {
            full[i + j] += x * y;
        }
    }
    full[1..].iter().map(|c| -sign * c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_boundary() {
        assert!(is_stationary(&[0.99], ROOT_MARGIN));
        assert!(!is_stationary(&[1.0], ROOT_MARGIN));
        assert!(!is_stationary(&[-1.01], ROOT_MARGIN));
        assert!(is_stationary(&[], ROOT_MARGIN));
        assert!(is_stationary(&[0.0, 0.0], ROOT_MARGIN));
        assert!(!is_stationary(&[f64::NAN], ROOT_MARGIN));
    }

    #[test]
    fn ar2_triangle() {
        // stationary iff φ2 + φ1 < 1, φ2 − φ1 < 1, |φ2| < 1
        for &(p1, p2, ok) in &[
            (0.5, -0.3, true),
            (0.5, 0.49, true),
            (0.5, 0.51, false),
            (-0.5, 0.51, false),
            (0.0, -0.99, true),
            (0.0, -1.01, false),
            (1.8, -0.9, true),
        ] {
            assert_eq!(is_stationary(&[p1, p2], 0.0), ok, "({p1}, {p2})");
        }
    }

    #[test]
    fn product_expansion() {
        // (1 − 0.5B)(1 − 0.3B²) = 1 − 0.5B − 0.3B² + 0.15B³
        let c = multiply_lag_polynomials(&[0.5], &[0.3], 2, 1.0);
        let expect = [0.5, 0.3, -0.15];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        // MA: (1 + 0.5B)(1 + 0.3B²) = 1 + 0.5B + 0.3B² + 0.15B³
        let c = multiply_lag_polynomials(&[0.5], &[0.3], 2, -1.0);
        let expect = [0.5, 0.3, 0.15];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(multiply_lag_polynomials(&[], &[], 7, 1.0).is_empty());
    }
}
