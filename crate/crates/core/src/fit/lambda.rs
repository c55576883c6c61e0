//! Penalty grid anchored at `lambda_max` and BIC-based selection.

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::panel::SpikePanel;

use super::design::Design;
use super::solver::fit_neuron_from;
use super::{FitOptions, NeuronFit};

/// Smallest penalty with an all-zero lag vector: the largest absolute lag
/// score at the fit with lags excluded (intercept and splines at their MLE).
/// Scaled up by a relative 1e-9 so that fitting at exactly this value
/// reproduces the zero solution in floating point.
pub fn lambda_max(design: &Design, i: usize, opts: &FitOptions) -> f64 {
    let null = null_fit(design, i, opts);
    let score = design.score(i, &null.theta());
    let top = score[1..=design.d()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    top * (1.0 + 1e-9)
}

/// Fit with every lag coefficient held at zero.
pub fn null_fit(design: &Design, i: usize, opts: &FitOptions) -> NeuronFit {
    let tight = FitOptions {
        tol: opts.tol.min(1e-10),
        ..opts.clone()
    };
    fit_neuron_from(design, i, f64::INFINITY, &tight, None)
}

/// `2 * negloglik + ln(n) * (k + 1 + m)`, `k` the number of nonzero lags.
pub fn bic(neg_loglik: f64, nonzeros: usize, m: usize, n_effective: usize) -> f64 {
    2.0 * neg_loglik + (n_effective as f64).ln() * (nonzeros + 1 + m) as f64
}

impl NeuronFit {
    pub fn nonzeros(&self) -> usize {
        self.gamma.iter().filter(|&&g| g != 0.0).count()
    }

    pub fn bic(&self, n_effective: usize) -> f64 {
        bic(self.neg_loglik, self.nonzeros(), self.spline_coefs.len(), n_effective)
    }

    pub(crate) fn theta(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(1 + self.gamma.len() + self.spline_coefs.len());
        t.push(self.beta);
        t.extend_from_slice(&self.gamma);
        t.extend_from_slice(&self.spline_coefs);
        t
    }
}

/// `size` log-spaced values from `top` down to `ratio * top`.
pub fn lambda_grid(top: f64, ratio: f64, size: usize) -> Result<Vec<f64>> {
    if size == 0 || !(top > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "empty lambda grid (size {size}, lambda_max {top})"
        )));
    }
    if size == 1 {
        return Ok(vec![top]);
    }
    let step = ratio.ln() / (size - 1) as f64;
    Ok((0..size).map(|k| top * (step * k as f64).exp()).collect())
}

/// Warm-started fits along a decreasing grid.
pub fn lambda_path(design: &Design, i: usize, grid: &[f64], opts: &FitOptions) -> Vec<NeuronFit> {
    let mut out: Vec<NeuronFit> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let init = out.last().map(|f| f.theta());
        out.push(fit_neuron_from(design, i, lambda, opts, init.as_deref()));
    }
    out
}

/// BIC scan for one series: the grid, each fit's criterion and the minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct BicScan {
    pub grid: Vec<f64>,
    pub bic: Vec<f64>,
    pub nonzeros: Vec<usize>,
    pub best: usize,
}

impl BicScan {
    pub fn best_lambda(&self) -> f64 {
        self.grid[self.best]
    }
}

pub fn bic_scan(design: &Design, i: usize, opts: &FitOptions) -> Result<BicScan> {
    let top = lambda_max(design, i, opts);
    // A series whose lags carry no signal at all has lambda_max = 0.
    if !(top > 0.0) {
        return Ok(BicScan {
            grid: vec![0.0],
            bic: vec![fit_neuron_from(design, i, 0.0, opts, None).bic(design.rows())],
            nonzeros: vec![0],
            best: 0,
        });
    }
    let grid = lambda_grid(top, opts.lambda_min_ratio, opts.lambda_grid_size)?;
    let fits = lambda_path(design, i, &grid, opts);
    let bic: Vec<f64> = fits.iter().map(|f| f.bic(design.rows())).collect();
    let nonzeros = fits.iter().map(NeuronFit::nonzeros).collect();
    // Ties resolve to the larger penalty.
    let best = bic
        .iter()
        .enumerate()
        .fold(0, |b, (k, v)| if *v < bic[b] { k } else { b });
    Ok(BicScan {
        grid,
        bic,
        nonzeros,
        best,
    })
}

/// Outcome of penalty selection over one or more training panels.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaSelection {
    /// Mean over panels of the per-panel mean of per-series optima.
    pub lambda_star: f64,
    /// `per_series[panel][i]`: BIC-minimizing penalty of series `i`.
    pub per_series: Vec<Vec<f64>>,
}

/// BIC-selected shared penalty.
pub fn select_lambda(
    panels: &[SpikePanel],
    basis: &BasisMatrix,
    opts: &FitOptions,
) -> Result<LambdaSelection> {
    if panels.is_empty() {
        return Err(Error::InvalidArgument("lambda selection needs a training panel".into()));
    }
    opts.validate()?;
    let mut per_series = Vec::with_capacity(panels.len());
    for panel in panels {
        let design = Design::new(panel, basis)?;
        let optima: Result<Vec<f64>> = (0..panel.d())
            .into_par_iter()
            .map(|i| bic_scan(&design, i, opts).map(|s| s.best_lambda()))
            .collect();
        per_series.push(optima?);
    }
    let lambda_star = per_series
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len().max(1) as f64)
        .sum::<f64>()
        / per_series.len() as f64;
    Ok(LambdaSelection {
        lambda_star,
        per_series,
    })
}
