//! Synthetic scenarios and the replicate harness behind `simulate` and `eval`.
//!
//! A scenario fixes the ground truth (network, intercepts, trends) from the
//! run seed. Replicate `r` simulates its panel from `derive(seed, Replicate, r)`
//! and training panel `k` from `derive(seed, Training, k)`, so replicates can
//! run in any order on any number of threads.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::fit::{fit_network, select_lambda, FitOptions, LambdaSelection, ModelFit};
use crate::infer::{confidence_intervals, desparsify, significance_filter, CIMatrix, DesparsifiedFit};
use crate::metrics::{auc_support, coverage_stats, mse_vector, rmse_gamma, EvalReport};
use crate::netsim::{
    calibrate_amplitude, simulate_bapla, trend_curve, InteractionMatrix, NetworkKind, NetworkSpec,
    TrendCurve, TrendFamily,
};
use crate::panel::SpikePanel;
use crate::seed::{derive, Purpose};

use super::config::AucScores;

/// One intercept for every series, or one per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Shared(f64),
    PerSeries(Vec<f64>),
}

impl Default for BetaSpec {
    fn default() -> Self {
        BetaSpec::Shared(0.1)
    }
}

fn default_trends() -> Vec<TrendFamily> {
    vec![TrendFamily::NormalPdf { mean: 0.5, sd: 0.1 }]
}
fn default_peak() -> f64 {
    2.0
}
fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub network: NetworkSpec,
    #[serde(default)]
    pub beta: BetaSpec,
    /// Trend shapes, assigned to series (or blocks) cyclically.
    #[serde(default = "default_trends")]
    pub trends: Vec<TrendFamily>,
    /// Assign trend shapes per stochastic block instead of per series.
    #[serde(default)]
    pub trend_by_block: bool,
    /// Each trend is scaled so its centered curve peaks at this absolute value.
    #[serde(default = "default_peak")]
    pub target_peak: f64,
    /// Fixed scale for every trend; overrides `target_peak`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Bins per trial.
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl ScenarioSpec {
    /// Chain network on `d` series with a shared intercept and the default trend.
    pub fn chain(d: usize, beta: f64, n: usize) -> Self {
        Self {
            network: NetworkSpec::chain(d),
            beta: BetaSpec::Shared(beta),
            trends: default_trends(),
            trend_by_block: false,
            target_peak: default_peak(),
            amplitude: None,
            n,
            trials: 1,
        }
    }

    pub fn d(&self) -> usize {
        self.network.d
    }

    pub fn betas(&self) -> Result<Vec<f64>> {
        match &self.beta {
            BetaSpec::Shared(b) => Ok(vec![*b; self.d()]),
            BetaSpec::PerSeries(v) if v.len() == self.d() => Ok(v.clone()),
            BetaSpec::PerSeries(v) => Err(Error::Config(format!(
                "{} intercepts for d = {}",
                v.len(),
                self.d()
            ))),
        }
    }

    /// Trend shape of every series.
    pub fn families(&self) -> Result<Vec<TrendFamily>> {
        if self.trends.is_empty() {
            return Err(Error::Config("at least one trend family is required".into()));
        }
        let k = self.trends.len();
        if !self.trend_by_block {
            return Ok((0..self.d()).map(|i| self.trends[i % k].clone()).collect());
        }
        let NetworkKind::StochasticBlock { block_sizes, .. } = &self.network.topology else {
            return Err(Error::Config("trend_by_block needs a stochastic_block network".into()));
        };
        Ok(block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(self.trends[b % k].clone(), size))
            .collect())
    }

    pub fn trend_curves(&self) -> Result<Vec<TrendCurve>> {
        self.families()?
            .iter()
            .map(|f| {
                let amp = match self.amplitude {
                    Some(a) => a,
                    None => calibrate_amplitude(f, self.target_peak, self.n)?,
                };
                trend_curve(f, amp, self.n)
            })
            .collect()
    }

    /// Ground truth for `seed`.
    pub fn truth(&self, seed: u64) -> Result<Truth> {
        if self.n < 2 || self.trials == 0 {
            return Err(Error::Config(format!(
                "scenario needs n >= 2 and trials >= 1, got n = {} and trials = {}",
                self.n, self.trials
            )));
        }
        Ok(Truth {
            gamma: self.network.generate(derive(seed, Purpose::Network, 0))?,
            beta: self.betas()?,
            trends: self.trend_curves()?,
            n: self.n,
            trials: self.trials,
        })
    }
}

/// Generating parameters of a scenario.
#[derive(Debug, Clone)]
pub struct Truth {
    pub gamma: InteractionMatrix,
    pub beta: Vec<f64>,
    pub trends: Vec<TrendCurve>,
    pub n: usize,
    pub trials: usize,
}

impl Truth {
    pub fn simulate(&self, seed: u64) -> Result<SpikePanel> {
        simulate_bapla(&self.gamma, &self.beta, &self.trends, self.n, self.trials, seed)
    }

    /// Panel of replicate `r` under run seed `seed`.
    pub fn replicate(&self, seed: u64, r: usize) -> Result<SpikePanel> {
        self.simulate(derive(seed, Purpose::Replicate, r as u64))
    }

    /// Penalty selected by BIC on `count` independent training panels.
    pub fn training_lambda(
        &self,
        basis: &BasisMatrix,
        count: usize,
        seed: u64,
        opts: &FitOptions,
    ) -> Result<LambdaSelection> {
        let panels: Result<Vec<SpikePanel>> = (0..count)
            .into_par_iter()
            .map(|k| self.simulate(derive(seed, Purpose::Training, k as u64)))
            .collect();
        select_lambda(&panels?, basis, opts)
    }
}

/// Everything produced for one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub report: EvalReport,
    pub fit: ModelFit,
    pub desparsified: DesparsifiedFit,
    pub cis: CIMatrix,
    /// Off-diagonal nonzero entries of the significance-filtered network.
    pub significant_edges: usize,
}

/// Estimates to be scored, as matrices and curves.
#[derive(Debug, Clone, Copy)]
pub struct Estimates<'a> {
    pub gamma: &'a InteractionMatrix,
    pub beta: &'a [f64],
    /// Fitted trend of each series at `t = 1..n`.
    pub trends: &'a [Vec<f64>],
    pub gamma_desp: &'a DMatrix<f64>,
    pub cis: &'a CIMatrix,
}

/// Scores estimates against the generating parameters. `truth_trends` are
/// the mean-centered true curves.
pub fn score(
    est: Estimates<'_>,
    truth_gamma: &InteractionMatrix,
    truth_beta: &[f64],
    truth_trends: &[Vec<f64>],
    auc_scores: AucScores,
) -> Result<EvalReport> {
    let rmse = rmse_gamma(est.gamma, truth_gamma)?;
    let mse_beta = mse_vector(est.beta, truth_beta)?;
    if est.trends.len() != truth_trends.len() || est.trends.is_empty() {
        return Err(Error::Dimension(format!(
            "{} fitted trends vs {} true trends",
            est.trends.len(),
            truth_trends.len()
        )));
    }
    let mut mse_f = 0.0;
    for (f, t) in est.trends.iter().zip(truth_trends) {
        mse_f += mse_vector(f, t)?;
    }
    mse_f /= est.trends.len() as f64;
    let scores = match auc_scores {
        AucScores::Penalized => est.gamma.matrix().map(f64::abs),
        AucScores::Desparsified => est.gamma_desp.map(f64::abs),
    };
    let auc = auc_support(&scores, &truth_gamma.support())?;
    let coverage = coverage_stats(est.cis, truth_gamma)?;
    Ok(EvalReport::new(rmse, mse_beta, mse_f, auc, coverage))
}

/// Scores a fit and its intervals against the truth.
pub fn evaluate(
    fit: &ModelFit,
    desp: &DesparsifiedFit,
    cis: &CIMatrix,
    truth: &Truth,
    auc_scores: AucScores,
) -> Result<EvalReport> {
    let trends: Vec<Vec<f64>> = (0..fit.d()).map(|i| fit.trend(i)).collect();
    let truth_trends: Vec<Vec<f64>> = truth.trends.iter().map(|c| c.values.clone()).collect();
    let est = Estimates {
        gamma: &fit.interaction,
        beta: &fit.betas(),
        trends: &trends,
        gamma_desp: &desp.gamma_desp,
        cis,
    };
    score(est, &truth.gamma, &truth.beta, &truth_trends, auc_scores)
}

/// Fit, desparsify and score one panel.
pub fn analyze(
    panel: &SpikePanel,
    truth: &Truth,
    basis: &BasisMatrix,
    lambda: f64,
    alpha: f64,
    auc_scores: AucScores,
    opts: &FitOptions,
) -> Result<ReplicateOutcome> {
    let fit = fit_network(panel, basis, lambda, opts)?;
    let desparsified = desparsify(&fit, panel)?;
    let cis = confidence_intervals(&desparsified, alpha)?;
    let report = evaluate(&fit, &desparsified, &cis, truth, auc_scores)?;
    let significant_edges = significance_filter(&fit.interaction, &cis)?.edge_count();
    Ok(ReplicateOutcome {
        report,
        fit,
        desparsified,
        cis,
        significant_edges,
    })
}

/// Settings of a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    pub replicates: usize,
    pub m: usize,
    pub alpha: f64,
    /// Fixed penalty; otherwise selected on training panels.
    pub lambda: Option<f64>,
    pub training_replicates: usize,
    pub auc_scores: AucScores,
    pub options: FitOptions,
}

impl MonteCarlo {
    pub fn new(replicates: usize, m: usize) -> Self {
        Self {
            replicates,
            m,
            alpha: 0.05,
            lambda: None,
            training_replicates: 5,
            auc_scores: AucScores::Penalized,
            options: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub lambda_star: f64,
    pub outcomes: Vec<ReplicateOutcome>,
}

impl ScenarioResult {
    pub fn reports(&self) -> Vec<EvalReport> {
        self.outcomes.iter().map(|o| o.report).collect()
    }

    pub fn summary(&self) -> Result<EvalReport> {
        EvalReport::mean(&self.reports())
    }
}

/// Runs `mc.replicates` replicates of `spec` under `seed`.
pub fn run_scenario(spec: &ScenarioSpec, seed: u64, mc: &MonteCarlo) -> Result<ScenarioResult> {
    if mc.replicates == 0 {
        return Err(Error::Config("replicates must be positive".into()));
    }
    let truth = spec.truth(seed)?;
    let basis = BasisMatrix::centered(mc.m, 3, spec.n)?;
    let lambda_star = match mc.lambda {
        Some(l) => l,
        None => {
            truth
                .training_lambda(&basis, mc.training_replicates, seed, &mc.options)?
                .lambda_star
        }
    };
    let outcomes: Result<Vec<ReplicateOutcome>> = (0..mc.replicates)
        .into_par_iter()
        .map(|r| {
            let panel = truth.replicate(seed, r)?;
            analyze(&panel, &truth, &basis, lambda_star, mc.alpha, mc.auc_scores, &mc.options)
        })
        .collect();
    Ok(ScenarioResult {
        lambda_star,
        outcomes: outcomes?,
    })
}
