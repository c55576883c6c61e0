//! l1-penalized maximum likelihood for the per-series logistic regressions.
//!
//! Series are conditionally independent given the past, so the joint fit
//! splits into `d` problems sharing one design. Each problem is solved by IRLS
//! with cyclic coordinate descent; only the lag coefficients are penalized.
//! Trials enter as independent blocks of the same likelihood.

mod design;
mod lambda;
mod solver;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::netsim::InteractionMatrix;
use crate::panel::SpikePanel;

pub use design::Design;
pub use lambda::{
    bic, bic_scan, lambda_grid, lambda_max, lambda_path, null_fit, select_lambda, BicScan,
    LambdaSelection,
};
pub use solver::{fit_neuron_from, penalized_objective, Surrogate};

/// Logistic function, stable for large `|a|`.
#[inline]
pub fn inv_logit(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(a))` without overflow.
#[inline]
pub fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// `sign(a) * max(|a| - kappa, 0)`.
#[inline]
pub fn soft_threshold(a: f64, kappa: f64) -> f64 {
    if kappa >= a.abs() {
        0.0
    } else if a > 0.0 {
        a - kappa
    } else {
        a + kappa
    }
}

fn default_outer() -> usize {
    50
}
fn default_inner() -> usize {
    1000
}
fn default_tol() -> f64 {
    1e-7
}
fn default_floor() -> f64 {
    1e-5
}
fn default_grid() -> usize {
    50
}
fn default_ratio() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// IRLS steps.
    #[serde(default = "default_outer")]
    pub max_outer_iters: usize,
    /// Coordinate-descent sweeps per IRLS step.
    #[serde(default = "default_inner")]
    pub max_inner_iters: usize,
    /// Stop when no parameter moves by more than this in an IRLS step.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Probabilities are clamped to `[weight_floor, 1 - weight_floor]`.
    #[serde(default = "default_floor")]
    pub weight_floor: f64,
    #[serde(default = "default_grid")]
    pub lambda_grid_size: usize,
    #[serde(default = "default_ratio")]
    pub lambda_min_ratio: f64,
    /// Fit each series at its own BIC optimum instead of the shared mean.
    #[serde(default)]
    pub per_neuron_lambda: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: default_outer(),
            max_inner_iters: default_inner(),
            tol: default_tol(),
            weight_floor: default_floor(),
            lambda_grid_size: default_grid(),
            lambda_min_ratio: default_ratio(),
            per_neuron_lambda: false,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 || self.lambda_grid_size == 0 {
            return Err(Error::InvalidArgument("iteration caps and grid size must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.weight_floor > 0.0 && self.weight_floor < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "weight_floor must lie in (0, 0.5), got {}",
                self.weight_floor
            )));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda_min_ratio must lie in (0, 1), got {}",
                self.lambda_min_ratio
            )));
        }
        Ok(())
    }
}

/// Estimates for one series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeuronFit {
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub spline_coefs: Vec<f64>,
    pub lambda: f64,
    /// Unpenalized negative log-likelihood at the solution.
    pub neg_loglik: f64,
    /// Penalized objective at the solution.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step halvings applied across all IRLS steps.
    pub halvings: usize,
    /// Largest optimality-condition violation on the last surrogate.
    pub kkt_violation: f64,
    /// Penalized objective after initialization and after each accepted step.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Fits of all series on one panel.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub fits: Vec<NeuronFit>,
    pub basis: BasisMatrix,
    pub interaction: InteractionMatrix,
    pub lambda_star: f64,
}

impl ModelFit {
    pub fn d(&self) -> usize {
        self.fits.len()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.beta).collect()
    }

    /// Fitted trend of series `i` at `t = 1..n`.
    pub fn trend(&self, i: usize) -> Vec<f64> {
        self.basis
            .curve(&self.fits[i].spline_coefs)
            .expect("coefficients match the basis by construction")
    }

    pub fn all_converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }
}

/// Fits series `i` of `panel` at penalty `lambda`.
pub fn fit_neuron(
    panel: &SpikePanel,
    basis: &BasisMatrix,
    i: usize,
    lambda: f64,
    opts: &FitOptions,
) -> Result<NeuronFit> {
    opts.validate()?;
    if i >= panel.d() {
        return Err(Error::Dimension(format!("series {i} of {}", panel.d())));
    }
    let design = Design::new(panel, basis)?;
    Ok(fit_neuron_from(&design, i, lambda, opts, None))
}

/// Fits every series at a shared penalty.
pub fn fit_network(
    panel: &SpikePanel,
    basis: &BasisMatrix,
    lambda: f64,
    opts: &FitOptions,
) -> Result<ModelFit> {
    fit_network_with(panel, basis, &vec![lambda; panel.d()], opts)
}

/// Fits every series at its own penalty.
pub fn fit_network_with(
    panel: &SpikePanel,
    basis: &BasisMatrix,
    lambdas: &[f64],
    opts: &FitOptions,
) -> Result<ModelFit> {
    opts.validate()?;
    if lambdas.len() != panel.d() {
        return Err(Error::Dimension(format!(
            "{} penalties for {} series",
            lambdas.len(),
            panel.d()
        )));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidArgument(format!("penalty must be >= 0, got {l}")));
    }
    let design = Design::new(panel, basis)?;
    let fits: Vec<NeuronFit> = (0..panel.d())
        .into_par_iter()
        .map(|i| fit_neuron_from(&design, i, lambdas[i], opts, None))
        .collect();
    let rows: Vec<Vec<f64>> = fits.iter().map(|f| f.gamma.clone()).collect();
    let interaction = InteractionMatrix::from_rows(&rows)?;
    let lambda_star = lambdas.iter().sum::<f64>() / lambdas.len().max(1) as f64;
    Ok(ModelFit {
        fits,
        basis: basis.clone(),
        interaction,
        lambda_star,
    })
}
