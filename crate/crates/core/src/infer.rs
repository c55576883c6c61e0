//! Desparsified lag estimates and per-edge confidence intervals.
//!
//! For each series the lasso estimate is corrected by one Newton-type step in
//! the lag block, `gamma_desp = gamma_hat - Theta * score`, where `Theta` is
//! an (approximate) inverse of the lag Fisher information. Intercept and
//! spline coefficients stay at their penalized values.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::fit::{inv_logit, Design, ModelFit, NeuronFit};
use crate::netsim::InteractionMatrix;
use crate::panel::SpikePanel;

/// Fisher matrices with a larger condition number are ridge-regularized.
pub const MAX_CONDITION: f64 = 1e10;

/// How the lag Fisher information of one series was inverted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionInfo {
    /// Ratio of extreme eigenvalues; infinite when singular.
    pub condition: f64,
    /// Ridge added to the diagonal, if any.
    pub ridge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedInverse {
    pub theta: DMatrix<f64>,
    pub info: ConditionInfo,
}

#[derive(Debug, Clone)]
pub struct DesparsifiedFit {
    /// Row `i` is the corrected lag vector of series `i`.
    pub gamma_desp: DMatrix<f64>,
    /// Asymptotic standard deviations, `sqrt(diag(Theta Sigma Theta))` per row.
    pub sigma: DMatrix<f64>,
    pub theta_condition: Vec<ConditionInfo>,
    pub n_effective: usize,
}

impl DesparsifiedFit {
    pub fn d(&self) -> usize {
        self.gamma_desp.nrows()
    }

    pub fn ridge_events(&self) -> usize {
        self.theta_condition.iter().filter(|c| c.ridge.is_some()).count()
    }
}

#[derive(Debug, Clone)]
pub struct CIMatrix {
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    pub alpha: f64,
    /// `significant[i][j]` iff the interval excludes zero.
    pub significant: Vec<Vec<bool>>,
}

impl CIMatrix {
    pub fn d(&self) -> usize {
        self.lower.nrows()
    }

    pub fn length(&self, i: usize, j: usize) -> f64 {
        self.upper[(i, j)] - self.lower[(i, j)]
    }

    pub fn contains(&self, i: usize, j: usize, v: f64) -> bool {
        self.lower[(i, j)] <= v && v <= self.upper[(i, j)]
    }

    pub fn significant_count(&self) -> usize {
        self.significant.iter().flatten().filter(|&&s| s).count()
    }
}

/// `Phi^{-1}(p)` for the standard normal.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in (0, 1), got {p}")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}

fn lag_score(design: &Design, i: usize, theta: &[f64]) -> DVector<f64> {
    let d = design.d();
    let mut s = DVector::zeros(d);
    for k in 0..design.rows() {
        let row = design.row(k);
        let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        let resid = design.target(k, i) - inv_logit(eta);
        for j in 0..d {
            s[j] += resid * row[1 + j];
        }
    }
    s * (-1.0 / design.rows() as f64)
}

fn lag_fisher(design: &Design, theta: &[f64]) -> DMatrix<f64> {
    let d = design.d();
    let mut sigma = DMatrix::zeros(d, d);
    let mut active = Vec::with_capacity(d);
    for k in 0..design.rows() {
        let row = design.row(k);
        active.clear();
        active.extend((0..d).filter(|&j| row[1 + j] != 0.0));
        if active.is_empty() {
            continue;
        }
        let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        let p = inv_logit(eta);
        let w = p * (1.0 - p);
        for (a, &ja) in active.iter().enumerate() {
            let va = w * row[1 + ja];
            for &jb in &active[a..] {
                sigma[(ja, jb)] += va * row[1 + jb];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            sigma[(a, b)] = sigma[(b, a)];
        }
    }
    sigma / design.rows() as f64
}

/// Sample-mean score of the negative log-likelihood in the lag block,
/// `-(1/n) sum_t (y_t - p_t) y_{t-1}`, at the fitted parameters of series `i`.
pub fn score_gamma(fit: &NeuronFit, panel: &SpikePanel, basis: &BasisMatrix, i: usize) -> Result<Vec<f64>> {
    let design = Design::new(panel, basis)?;
    check_series(&design, fit, i)?;
    Ok(lag_score(&design, i, &fit.theta()).iter().copied().collect())
}

/// Lag Fisher information `(1/n) sum_t p_t (1 - p_t) y_{t-1} y_{t-1}'`.
pub fn fisher_gamma(fit: &NeuronFit, panel: &SpikePanel, basis: &BasisMatrix, i: usize) -> Result<DMatrix<f64>> {
    let design = Design::new(panel, basis)?;
    check_series(&design, fit, i)?;
    Ok(lag_fisher(&design, &fit.theta()))
}

fn check_series(design: &Design, fit: &NeuronFit, i: usize) -> Result<()> {
    if i >= design.d() {
        return Err(Error::Dimension(format!("series {i} of {}", design.d())));
    }
    if fit.gamma.len() != design.d() || fit.spline_coefs.len() != design.m() {
        return Err(Error::Dimension(format!(
            "fit has {} lags and {} spline coefficients, design has {} and {}",
            fit.gamma.len(),
            fit.spline_coefs.len(),
            design.d(),
            design.m()
        )));
    }
    Ok(())
}

/// Inverse of a symmetric PSD matrix. Inverts exactly when the condition
/// number is at most [`MAX_CONDITION`]; otherwise adds `ridge` to the diagonal,
/// with `None` meaning `1e-6 * trace / d`.
pub fn relaxed_inverse(sigma: &DMatrix<f64>, ridge: Option<f64>) -> Result<RelaxedInverse> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::Inference(format!("{}x{} matrix is not square", d, sigma.ncols())));
    }
    let scale = sigma.amax().max(f64::MIN_POSITIVE);
    for a in 0..d {
        for b in 0..a {
            if (sigma[(a, b)] - sigma[(b, a)]).abs() > 1e-12 * scale {
                return Err(Error::Inference(format!("matrix is not symmetric at ({a}, {b})")));
            }
        }
    }
    if d == 0 {
        return Ok(RelaxedInverse {
            theta: DMatrix::zeros(0, 0),
            info: ConditionInfo { condition: 1.0, ridge: None },
        });
    }
    let eig = SymmetricEigen::new(sigma.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition <= MAX_CONDITION {
        if let Some(ch) = sigma.clone().cholesky() {
            return Ok(RelaxedInverse {
                theta: ch.inverse(),
                info: ConditionInfo { condition, ridge: None },
            });
        }
    }
    let r = ridge.unwrap_or(1e-6 * sigma.trace() / d as f64);
    if !(r > 0.0) {
        return Err(Error::Inference("singular matrix with zero trace cannot be regularized".into()));
    }
    let shifted = sigma + DMatrix::identity(d, d) * r;
    let ch = shifted
        .cholesky()
        .ok_or_else(|| Error::Inference("ridge-regularized matrix is not positive definite".into()))?;
    warn!("condition number {condition:.3e} exceeds {MAX_CONDITION:e}; using ridge {r:.3e}");
    Ok(RelaxedInverse {
        theta: ch.inverse(),
        info: ConditionInfo { condition, ridge: Some(r) },
    })
}

struct RowResult {
    gamma_desp: Vec<f64>,
    sigma: Vec<f64>,
    info: ConditionInfo,
}

fn desparsify_row(design: &Design, fit: &NeuronFit, i: usize) -> Result<RowResult> {
    let theta = fit.theta();
    let score = lag_score(design, i, &theta);
    let fisher = lag_fisher(design, &theta);
    let inv = relaxed_inverse(&fisher, None)?;
    let step = &inv.theta * &score;
    let gamma_desp = fit.gamma.iter().zip(step.iter()).map(|(g, s)| g - s).collect();
    let sandwich = &inv.theta * &fisher * &inv.theta;
    let sigma = (0..design.d()).map(|j| sandwich[(j, j)].max(0.0).sqrt()).collect();
    Ok(RowResult {
        gamma_desp,
        sigma,
        info: inv.info,
    })
}

/// Desparsified lag estimates for every series of `model`.
pub fn desparsify(model: &ModelFit, panel: &SpikePanel) -> Result<DesparsifiedFit> {
    let design = Design::new(panel, &model.basis)?;
    if model.d() != panel.d() {
        return Err(Error::Dimension(format!("fit has {} series, panel {}", model.d(), panel.d())));
    }
    for (i, f) in model.fits.iter().enumerate() {
        check_series(&design, f, i)?;
    }
    let rows: Result<Vec<RowResult>> = (0..panel.d())
        .into_par_iter()
        .map(|i| desparsify_row(&design, &model.fits[i], i))
        .collect();
    let rows = rows?;
    let d = panel.d();
    Ok(DesparsifiedFit {
        gamma_desp: DMatrix::from_fn(d, d, |i, j| rows[i].gamma_desp[j]),
        sigma: DMatrix::from_fn(d, d, |i, j| rows[i].sigma[j]),
        theta_condition: rows.iter().map(|r| r.info).collect(),
        n_effective: design.rows(),
    })
}

/// `gamma_desp +/- Phi^{-1}(1 - alpha/2) * sigma / sqrt(n_effective)`.
pub fn confidence_intervals(desp: &DesparsifiedFit, alpha: f64) -> Result<CIMatrix> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let scale = z / (desp.n_effective as f64).sqrt();
    let half = desp.sigma.map(|s| s * scale);
    let lower = &desp.gamma_desp - &half;
    let upper = &desp.gamma_desp + &half;
    let d = desp.d();
    let significant = (0..d)
        .map(|i| (0..d).map(|j| lower[(i, j)] > 0.0 || upper[(i, j)] < 0.0).collect())
        .collect();
    Ok(CIMatrix {
        lower,
        upper,
        alpha,
        significant,
    })
}

/// Penalized interaction matrix with insignificant entries set to zero.
pub fn significance_filter(gamma: &InteractionMatrix, cis: &CIMatrix) -> Result<InteractionMatrix> {
    if gamma.d() != cis.d() {
        return Err(Error::Dimension(format!("{} series vs {} intervals", gamma.d(), cis.d())));
    }
    let mut out = gamma.clone();
    for i in 0..gamma.d() {
        for j in 0..gamma.d() {
            if !cis.significant[i][j] {
                out.set(i, j, 0.0);
            }
        }
    }
    Ok(out)
}
