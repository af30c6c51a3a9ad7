//! BFGS with central-difference gradients and an Armijo backtracking line search.

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop once the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            fd_step: 6e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step; never increases.
    pub trace: Vec<f64>,
}

fn numerical_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], fx: f64, rel_step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            match (up.is_finite(), down.is_finite()) {
                (true, true) => (up - down) / (2.0 * h),
                (true, false) => (up - fx) / h,
                (false, true) => (fx - down) / h,
                (false, false) => 0.0,
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimises `f` from `x0`. Non-finite objective values are treated as
/// infeasible and rejected by the line search.
pub fn minimize_bfgs(f: impl Fn(&[f64]) -> f64, x0: Vec<f64>, opts: &BfgsOptions) -> BfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut trace = vec![fx];
    if n == 0 || !fx.is_finite() {
        return BfgsOutcome {
            x,
            value: fx,
            iterations: 0,
            converged: n == 0 && fx.is_finite(),
            trace,
        };
    }
    let mut g = numerical_gradient(&f, &x, fx, opts.fd_step);
    let mut h = identity(n);
    let mut scaled = false;

    for iter in 0..opts.max_iterations {
        if max_abs(&g) <= opts.gradient_tolerance {
            return BfgsOutcome {
                x,
                value: fx,
                iterations: iter,
                converged: true,
                trace,
            };
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 || !slope.is_finite() {
            h = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let fc = f(&cand);
            if fc.is_finite() && fc <= fx + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            // no descent left at finite-difference resolution
            return BfgsOutcome {
                x,
                value: fx,
                iterations: iter,
                converged: true,
                trace,
            };
        };
        let gn = numerical_gradient(&f, &xn, fn_, opts.fd_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().enumerate().for_each(|(i, row)| row[i] = gamma);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = xn;
        fx = fn_;
        g = gn;
        trace.push(fx);
    }
    let converged = max_abs(&g) <= opts.gradient_tolerance;
    BfgsOutcome {
        x,
        value: fx,
        iterations: opts.max_iterations,
        converged,
        trace,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Inverse-Hessian update `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + x[0] * x[1];
        let out = minimize_bfgs(f, vec![0.0, 0.0], &BfgsOptions::default());
        assert!(out.converged);
        // ∇ = 0: 2(x0−3) + x1 = 0, 20(x1+1) + x0 = 0
        let x1 = -23.0 / 19.5;
        let x0 = 3.0 - x1 / 2.0;
        assert!((out.x[0] - x0).abs() < 1e-6 && (out.x[1] - x1).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn rosenbrock_monotone_trace() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize_bfgs(f, vec![-1.2, 1.0], &BfgsOptions::default());
        assert!((out.x[0] - 1.0).abs() < 1e-4, "{:?}", out.x);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_infeasible_region() {
        // minimum at x = 2 but the objective is +∞ beyond 1
        let f = |x: &[f64]| if x[0] >= 1.0 { f64::INFINITY } else { (x[0] - 2.0).powi(2) };
        let out = minimize_bfgs(f, vec![0.0], &BfgsOptions::default());
        assert!(out.value.is_finite());
        assert!(out.x[0] < 1.0 && out.x[0] > 0.99);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = BfgsOptions {
            max_iterations: 2,
            ..Default::default()
        };
        let out = minimize_bfgs(f, vec![-1.2, 1.0], &opts);
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
