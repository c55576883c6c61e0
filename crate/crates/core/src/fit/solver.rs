//! IRLS outer loop with cyclic coordinate descent on each quadratic surrogate.
//!
//! Around the current parameters the negative log-likelihood is replaced by
//! `1/2 sum_t w_t (z_t - x_t' theta)^2`. Expanding the square gives
//! `1/2 theta' G theta - b' theta + const` with `G = X' W X` and `b = X' W z`,
//! so the coordinate updates run on the `p x p` Gram system ("covariance
//! updates") rather than on the rows. The partial-residual sums of the
//! row-wise updates are `b_j - sum_{k != j} G_jk theta_k`.

use super::design::Design;
use super::{soft_threshold, FitOptions, NeuronFit};

/// Penalized weighted least-squares problem for one series.
#[derive(Debug, Clone)]
pub struct Surrogate {
    p: usize,
    d: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
    theta: Vec<f64>,
    /// `G * theta`, maintained incrementally.
    fitted: Vec<f64>,
}

impl Surrogate {
    /// Builds `G = X' W X` and `b = X' W z` from a linearization.
    pub fn new(design: &Design, z: &[f64], w: &[f64], theta: Vec<f64>) -> Self {
        let p = design.p();
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for k in 0..design.rows() {
            let row = design.row(k);
            let wk = w[k];
            let wz = wk * z[k];
            for a in 0..p {
                let xa = row[a];
                if xa == 0.0 {
                    continue;
                }
                rhs[a] += wz * xa;
                let wa = wk * xa;
                let g = &mut gram[a * p..(a + 1) * p];
                for b in a..p {
                    g[b] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[a * p + b] = gram[b * p + a];
            }
        }
        Self::from_gram(gram, rhs, design.d(), theta)
    }

    /// Surrogate from an explicit Gram matrix (row-major `p x p`) and
    /// right-hand side; parameters are `[intercept, d lags, rest]`.
    pub fn from_gram(gram: Vec<f64>, rhs: Vec<f64>, d: usize, theta: Vec<f64>) -> Self {
        let p = rhs.len();
        assert_eq!(gram.len(), p * p);
        assert_eq!(theta.len(), p);
        assert!(p > d);
        let mut s = Self {
            p,
            d,
            gram,
            rhs,
            theta,
            fitted: vec![0.0; p],
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        for a in 0..self.p {
            self.fitted[a] = (0..self.p).map(|b| self.gram[a * self.p + b] * self.theta[b]).sum();
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    #[inline]
    fn diag(&self, j: usize) -> f64 {
        self.gram[j * self.p + j]
    }

    /// `sum_t w_t x_tj (z_t - fitted_t without coordinate j)`.
    #[inline]
    fn partial(&self, j: usize) -> f64 {
        self.rhs[j] - self.fitted[j] + self.diag(j) * self.theta[j]
    }

    fn set(&mut self, j: usize, value: f64) -> f64 {
        let delta = value - self.theta[j];
        if delta != 0.0 {
            self.theta[j] = value;
            let col = &self.gram[j * self.p..(j + 1) * self.p];
            for (f, g) in self.fitted.iter_mut().zip(col) {
                *f += delta * g;
            }
        }
        delta
    }

    /// Lasso update of lag coefficient `j` (0-based series index). A predictor
    /// that is never active gets coefficient 0.
    pub fn update_gamma(&mut self, j: usize, lambda: f64) -> f64 {
        let idx = 1 + j;
        let denom = self.diag(idx);
        let value = if denom > 0.0 {
            soft_threshold(self.partial(idx), lambda) / denom
        } else {
            0.0
        };
        self.set(idx, value)
    }

    /// Weighted mean of the partial residuals.
    pub fn update_intercept(&mut self) -> f64 {
        let denom = self.diag(0);
        let value = if denom > 0.0 { self.partial(0) / denom } else { 0.0 };
        self.set(0, value)
    }

    /// Unpenalized update of spline coefficient `k`; a degenerate column gets 0.
    pub fn update_spline(&mut self, k: usize) -> f64 {
        let idx = 1 + self.d + k;
        let denom = self.diag(idx);
        let value = if denom > 1e-300 { self.partial(idx) / denom } else { 0.0 };
        self.set(idx, value)
    }

    /// One sweep in the order lags, intercept, splines; returns the largest
    /// absolute coordinate change.
    pub fn sweep(&mut self, lambda: f64) -> f64 {
        let mut largest = 0.0f64;
        for j in 0..self.d {
            largest = largest.max(self.update_gamma(j, lambda).abs());
        }
        largest = largest.max(self.update_intercept().abs());
        for k in 0..self.p - 1 - self.d {
            largest = largest.max(self.update_spline(k).abs());
        }
        largest
    }

    /// Sweeps until the largest change drops below `tol`; returns the number
    /// of sweeps and whether the tolerance was met.
    pub fn solve(&mut self, lambda: f64, tol: f64, max_sweeps: usize) -> (usize, bool) {
        for sweep in 1..=max_sweeps {
            if self.sweep(lambda) < tol {
                self.refresh();
                return (sweep, true);
            }
            // Incremental updates drift slowly; rebuild periodically.
            if sweep % 64 == 0 {
                self.refresh();
            }
        }
        self.refresh();
        (max_sweeps, false)
    }

    /// Largest violation of the lasso optimality conditions at the current
    /// point: gradient of the unpenalized coordinates, subgradient condition on
    /// the lags. Inactive predictors (zero diagonal) are skipped.
    pub fn kkt_violation(&self, lambda: f64) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.p {
            if self.diag(j) <= 0.0 {
                continue;
            }
            let grad = self.rhs[j] - self.fitted[j];
            let lag = (1..=self.d).contains(&j);
            let v = if !lag {
                grad.abs()
            } else if self.theta[j] != 0.0 {
                (grad - lambda * self.theta[j].signum()).abs()
            } else {
                (grad.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }

    /// `1/2 theta' G theta - b' theta + lambda ||gamma||_1`.
    pub fn objective(&self, lambda: f64) -> f64 {
        let quad: f64 = (0..self.p)
            .map(|a| 0.5 * self.theta[a] * self.fitted[a] - self.rhs[a] * self.theta[a])
            .sum();
        quad + lambda * self.theta[1..=self.d].iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Gradient of the unpenalized quadratic, `G theta - b`.
    pub fn gradient(&self) -> Vec<f64> {
        self.fitted.iter().zip(&self.rhs).map(|(f, r)| f - r).collect()
    }
}

/// Penalized objective: negative log-likelihood plus `lambda * ||gamma||_1`.
pub fn penalized_objective(design: &Design, i: usize, theta: &[f64], lambda: f64) -> f64 {
    let l1: f64 = theta[1..=design.d()].iter().map(|v| v.abs()).sum();
    let pen = if l1 == 0.0 { 0.0 } else { lambda * l1 };
    design.neg_loglik(i, theta) + pen
}

/// Spline coefficients are identified only up to a constant shift because
/// the centered columns sum to zero across `k`; pin the representative with
/// zero coefficient sum.
fn canonicalize(theta: &mut [f64], d: usize) {
    let splines = &mut theta[1 + d..];
    if splines.len() > 1 {
        let mean = splines.iter().sum::<f64>() / splines.len() as f64;
        splines.iter_mut().for_each(|c| *c -= mean);
    }
}

const HALVINGS: usize = 30;

/// Fits series `i` at penalty `lambda` starting from `init` (or from the
/// default start: zero lags and splines, intercept at the logit of the spike
/// fraction).
pub fn fit_neuron_from(
    design: &Design,
    i: usize,
    lambda: f64,
    opts: &FitOptions,
    init: Option<&[f64]>,
) -> NeuronFit {
    let d = design.d();
    let eps = opts.weight_floor;
    let mut theta = match init {
        Some(t) => t.to_vec(),
        None => {
            let mut t = vec![0.0; design.p()];
            let frac = design.target_mean(i).clamp(eps, 1.0 - eps);
            t[0] = (frac / (1.0 - frac)).ln();
            t
        }
    };
    let inner_tol = opts.tol * 1e-3;
    let mut objective = penalized_objective(design, i, &theta, lambda);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;
    let mut halvings = 0;
    let mut kkt = f64::INFINITY;

    for outer in 1..=opts.max_outer_iters {
        iterations = outer;
        let (z, w) = design.linearize(i, &theta, eps);
        let mut surrogate = Surrogate::new(design, &z, &w, theta.clone());
        surrogate.solve(lambda, inner_tol, opts.max_inner_iters);
        kkt = surrogate.kkt_violation(lambda);
        let mut candidate = surrogate.into_theta();
        canonicalize(&mut candidate, d);

        let mut cand_obj = penalized_objective(design, i, &candidate, lambda);
        let slack = 1e-8 * objective.abs().max(1.0);
        let mut tries = 0;
        while !(cand_obj <= objective + slack) && tries < HALVINGS {
            for (c, t) in candidate.iter_mut().zip(&theta) {
                *c = 0.5 * (*c + t);
            }
            cand_obj = penalized_objective(design, i, &candidate, lambda);
            tries += 1;
        }
        halvings += tries;
        if !(cand_obj <= objective + slack) {
            // No descent along the IRLS direction: already at the optimum up
            // to rounding.
            converged = true;
            break;
        }
        let change = candidate
            .iter()
            .zip(&theta)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        theta = candidate;
        objective = cand_obj;
        trace.push(objective);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let neg_loglik = design.neg_loglik(i, &theta);
    NeuronFit {
        beta: theta[0],
        gamma: theta[1..=d].to_vec(),
        spline_coefs: theta[1 + d..].to_vec(),
        lambda,
        neg_loglik,
        objective,
        iterations,
        converged,
        halvings,
        kkt_violation: kkt,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> Surrogate {
        // G = [[4, 1, 0], [1, 2, 0], [0, 0, 1]] with parameters (beta, gamma_1, c_1)
        let gram = vec![4.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0];
        Surrogate::from_gram(gram, vec![8.0, 3.0, 0.5], 1, vec![0.0; 3])
    }

    #[test]
    fn intercept_is_weighted_partial_residual_mean() {
        let mut s = two_by_two();
        s.update_intercept();
        assert_eq!(s.theta()[0], 2.0);
    }

    #[test]
    fn gamma_update_soft_thresholds() {
        let mut s = two_by_two();
        // partial = 3, lambda 1 -> (3 - 1) / 2 = 1
        s.update_gamma(0, 1.0);
        assert_eq!(s.theta()[1], 1.0);
        s.update_gamma(0, 5.0);
        assert_eq!(s.theta()[1], 0.0);
    }

    #[test]
    fn inactive_predictor_gets_zero() {
        let gram = vec![1.0, 0.0, 0.0, 0.0];
        let mut s = Surrogate::from_gram(gram, vec![1.0, 7.0], 1, vec![0.0, 3.0]);
        s.update_gamma(0, 0.0);
        assert_eq!(s.theta()[1], 0.0);
    }

    #[test]
    fn spline_orthogonal_design_one_pass() {
        let mut s = two_by_two();
        s.update_spline(0);
        assert_eq!(s.theta()[2], 0.5);
        assert_eq!(s.update_spline(0), 0.0);
    }

    #[test]
    fn unpenalized_solution_solves_normal_equations() {
        let mut s = two_by_two();
        let (_, ok) = s.solve(0.0, 1e-14, 10_000);
        assert!(ok);
        // [[4,1],[1,2]] x = [8, 3] -> x = (13/7, 4/7)
        assert!((s.theta()[0] - 13.0 / 7.0).abs() < 1e-12);
        assert!((s.theta()[1] - 4.0 / 7.0).abs() < 1e-12);
        assert!(s.kkt_violation(0.0) < 1e-12);
    }

    #[test]
    fn soft_threshold_only_on_lags() {
        let mut s = two_by_two();
        s.solve(100.0, 1e-14, 10_000);
        assert_eq!(s.theta()[1], 0.0);
        assert!((s.theta()[0] - 2.0).abs() < 1e-12);
        assert!(s.kkt_violation(100.0) < 1e-12);
    }

    #[test]
    fn canonical_splines_sum_to_zero() {
        let mut t = vec![1.0, 2.0, 3.0, 5.0, 7.0];
        canonicalize(&mut t, 1);
        assert_eq!(&t[..2], &[1.0, 2.0]);
        assert!((t[2..].iter().sum::<f64>()).abs() < 1e-15);
    }
}
