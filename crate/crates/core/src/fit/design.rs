//! Lagged design shared by all per-series regressions.
//!
//! Row `(trial, t)` for `t = 2..n` (1-based) is `[1, y[t-1, 1..d], phi~(t/n)]`,
//! so the first bin of each trial only serves as a lag. The same rows are used
//! for every target series; only the response column changes.

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::panel::SpikePanel;

use super::{inv_logit, softplus};

/// Dense row-major design plus the binary responses of all series.
#[derive(Debug, Clone)]
pub struct Design {
    rows: usize,
    d: usize,
    m: usize,
    x: Vec<f64>,
    targets: Vec<u8>,
}

impl Design {
    pub fn new(panel: &SpikePanel, basis: &BasisMatrix) -> Result<Self> {
        if !basis.is_centered() {
            return Err(Error::Basis("fitting requires a centered basis".into()));
        }
        if basis.n() != panel.n() {
            return Err(Error::Dimension(format!(
                "basis has {} rows but trials have {} bins",
                basis.n(),
                panel.n()
            )));
        }
        if panel.n() < 2 {
            return Err(Error::Dimension("trials need at least two bins".into()));
        }
        let (d, m) = (panel.d(), basis.m());
        let p = 1 + d + m;
        let rows = panel.n_effective();
        let mut x = Vec::with_capacity(rows * p);
        let mut targets = Vec::with_capacity(rows * d);
        for r in 0..panel.trials() {
            for bin in 1..panel.n() {
                x.push(1.0);
                x.extend(panel.row(r, bin - 1).iter().map(|&v| v as f64));
                // 1-based time of this bin is bin + 1.
                x.extend((0..m).map(|k| basis.get(bin + 1, k)));
                targets.extend_from_slice(panel.row(r, bin));
            }
        }
        Ok(Self {
            rows,
            d,
            m,
            x,
            targets,
        })
    }

    /// Number of lag-valid observations.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Parameters per regression: intercept, `d` lags, `m` spline coefficients.
    pub fn p(&self) -> usize {
        1 + self.d + self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        let p = self.p();
        &self.x[k * p..(k + 1) * p]
    }

    #[inline]
    pub fn target(&self, k: usize, i: usize) -> f64 {
        self.targets[k * self.d + i] as f64
    }

    /// Linear predictor for every row.
    pub fn eta(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|k| self.row(k).iter().zip(theta).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Spike fraction of series `i` over lag-valid rows.
    pub fn target_mean(&self, i: usize) -> f64 {
        let s: f64 = (0..self.rows).map(|k| self.target(k, i)).sum();
        s / self.rows as f64
    }

    /// Unpenalized negative log-likelihood of series `i`, summed over rows.
    pub fn neg_loglik(&self, i: usize, theta: &[f64]) -> f64 {
        (0..self.rows)
            .map(|k| {
                let eta: f64 = self.row(k).iter().zip(theta).map(|(a, b)| a * b).sum();
                softplus(eta) - self.target(k, i) * eta
            })
            .sum()
    }

    /// Score of the summed log-likelihood, `sum_t (y_t - p_t) x_t` (all `p` coordinates).
    pub fn score(&self, i: usize, theta: &[f64]) -> Vec<f64> {
        let p = self.p();
        let mut out = vec![0.0; p];
        for k in 0..self.rows {
            let row = self.row(k);
            let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
            let resid = self.target(k, i) - inv_logit(eta);
            for (o, &v) in out.iter_mut().zip(row) {
                *o += resid * v;
            }
        }
        out
    }

    /// Working response `z` and weights `w` at `theta`. Probabilities are
    /// clamped to `[floor, 1 - floor]` before use, so `w >= floor * (1 - floor)`.
    pub fn linearize(&self, i: usize, theta: &[f64], floor: f64) -> (Vec<f64>, Vec<f64>) {
        let mut z = Vec::with_capacity(self.rows);
        let mut w = Vec::with_capacity(self.rows);
        for k in 0..self.rows {
            let eta: f64 = self.row(k).iter().zip(theta).map(|(a, b)| a * b).sum();
            let prob = inv_logit(eta).clamp(floor, 1.0 - floor);
            let weight = prob * (1.0 - prob);
            z.push(eta + (self.target(k, i) - prob) / weight);
            w.push(weight);
        }
        (z, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::SpikePanel;

    fn tiny() -> (SpikePanel, BasisMatrix) {
        let panel = SpikePanel::from_trials(
            vec![vec![1, 0, 0, 1, 1, 1, 0, 0], vec![0, 1, 1, 1, 0, 0, 1, 0]],
            4,
            SpikePanel::default_ids(2),
            vec![0, 1],
            1.0,
        )
        .unwrap();
        (panel, BasisMatrix::centered_cubic(4, 4).unwrap())
    }

    #[test]
    fn rows_skip_first_bin_of_each_trial() {
        let (panel, basis) = tiny();
        let design = Design::new(&panel, &basis).unwrap();
        assert_eq!(design.rows(), 6);
        assert_eq!(design.p(), 7);
        // trial 1, bin 1: lags are trial 1 bin 0 = (0, 1), target (1, 1)
        let row = design.row(3);
        assert_eq!(&row[..3], &[1.0, 0.0, 1.0]);
        assert_eq!(row[3], basis.get(2, 0));
        assert_eq!(design.target(3, 0), 1.0);
        assert_eq!(design.target(3, 1), 1.0);
    }

    #[test]
    fn null_parameters_give_log_two_per_row() {
        let (panel, basis) = tiny();
        let design = Design::new(&panel, &basis).unwrap();
        let nll = design.neg_loglik(0, &vec![0.0; design.p()]);
        // (T - 1) * l * log 2 with T = 4, l = 2
        assert!((nll - 6.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn requires_centered_matching_basis() {
        let (panel, _) = tiny();
        let raw = crate::basis::BasisSpec::cubic(4).unwrap().build_design(4).unwrap();
        assert!(Design::new(&panel, &raw).is_err());
        let wrong = BasisMatrix::centered_cubic(4, 5).unwrap();
        assert!(Design::new(&panel, &wrong).is_err());
    }

    #[test]
    fn linearization_at_half() {
        // one row, y = 1, eta = 0
        let panel = SpikePanel::from_trials(vec![vec![0, 1]], 2, SpikePanel::default_ids(1), vec![0], 1.0)
            .unwrap();
        let design = Design::new(&panel, &BasisMatrix::empty(2)).unwrap();
        let (z, w) = design.linearize(0, &[0.0, 0.0], 1e-5);
        assert_eq!(w, vec![0.25]);
        assert_eq!(z, vec![2.0]);
    }

    #[test]
    fn clamp_bounds_weights() {
        let panel = SpikePanel::from_trials(vec![vec![0, 1]], 2, SpikePanel::default_ids(1), vec![0], 1.0)
            .unwrap();
        let design = Design::new(&panel, &BasisMatrix::empty(2)).unwrap();
        let (z, w) = design.linearize(0, &[40.0, 0.0], 1e-5);
        assert!((w[0] / (1e-5 * (1.0 - 1e-5)) - 1.0).abs() < 1e-9);
        assert!(z[0].is_finite());
    }
}
