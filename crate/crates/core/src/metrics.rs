//! Accuracy of estimated networks against a known ground truth.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::infer::CIMatrix;
use crate::netsim::InteractionMatrix;

/// `||est - truth||_F^2 / ||truth||_F^2`.
pub fn rmse_gamma(est: &InteractionMatrix, truth: &InteractionMatrix) -> Result<f64> {
    if est.d() != truth.d() {
        return Err(Error::Dimension(format!("{} vs {} series", est.d(), truth.d())));
    }
    let denom = truth.frobenius_sq();
    if denom == 0.0 {
        return Err(Error::Metric("relative error is undefined for a zero truth".into()));
    }
    Ok((est.matrix() - truth.matrix()).norm_squared() / denom)
}

/// Mean squared difference of two equal-length vectors.
pub fn mse_vector(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", est.len(), truth.len())));
    }
    if est.is_empty() {
        return Err(Error::Metric("mean of an empty vector".into()));
    }
    Ok(est.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / est.len() as f64)
}

/// Area under the ROC curve of `scores` for the off-diagonal labels in
/// `truth`, as the Mann-Whitney probability that a random positive outscores a
/// random negative, ties counting one half.
pub fn auc_support(scores: &DMatrix<f64>, truth: &[Vec<bool>]) -> Result<f64> {
    let d = scores.nrows();
    if scores.ncols() != d || truth.len() != d || truth.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("scores and labels must both be square and of equal size".into()));
    }
    let mut labelled: Vec<(f64, bool)> = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                labelled.push((scores[(i, j)], truth[i][j]));
            }
        }
    }
    if labelled.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Metric("scores contain NaN".into()));
    }
    let pos = labelled.iter().filter(|(_, l)| *l).count();
    let neg = labelled.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!("AUC needs both classes ({pos} positive, {neg} negative)")));
    }
    labelled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Midranks over tie groups; the positive rank sum gives U.
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < labelled.len() {
        let mut end = k;
        while end + 1 < labelled.len() && labelled[end + 1].0 == labelled[k].0 {
            end += 1;
        }
        let midrank = (k + end) as f64 / 2.0 + 1.0;
        rank_sum += midrank * labelled[k..=end].iter().filter(|(_, l)| *l).count() as f64;
        k = end + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// Interval coverage of the true entries and mean interval length, split by
/// true support over off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    pub avgcov_s: f64,
    pub avgcov_sc: f64,
    pub avglen_s: f64,
    pub avglen_sc: f64,
}

pub fn coverage_stats(cis: &CIMatrix, truth: &InteractionMatrix) -> Result<Coverage> {
    let d = truth.d();
    if cis.d() != d {
        return Err(Error::Dimension(format!("{} intervals vs {d} series", cis.d())));
    }
    let (mut cov, mut len, mut count) = ([0.0; 2], [0.0; 2], [0usize; 2]);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let g = truth.get(i, j);
            let k = if g != 0.0 { 0 } else { 1 };
            count[k] += 1;
            cov[k] += cis.contains(i, j, g) as u8 as f64;
            len[k] += cis.length(i, j);
        }
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(Error::Metric(format!(
            "coverage needs active and inactive entries ({} and {})",
            count[0], count[1]
        )));
    }
    Ok(Coverage {
        avgcov_s: cov[0] / count[0] as f64,
        avgcov_sc: cov[1] / count[1] as f64,
        avglen_s: len[0] / count[0] as f64,
        avglen_sc: len[1] / count[1] as f64,
    })
}

/// Column names of the summary table, in order.
pub const SUMMARY_COLUMNS: [&str; 8] = [
    "RMSE_Gamma",
    "MSE_beta0",
    "MSE_f",
    "AUC",
    "AvgCov_s",
    "AvgCov_sc",
    "AvgLen_s",
    "AvgLen_sc",
];

/// Evaluation of one fit, or the mean over `rep_count` fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub rmse_gamma: f64,
    pub mse_beta: f64,
    pub mse_f: f64,
    pub auc: f64,
    pub avgcov_s: f64,
    pub avgcov_sc: f64,
    pub avglen_s: f64,
    pub avglen_sc: f64,
    pub rep_count: usize,
}

impl EvalReport {
    pub fn new(rmse_gamma: f64, mse_beta: f64, mse_f: f64, auc: f64, coverage: Coverage) -> Self {
        Self {
            rmse_gamma,
            mse_beta,
            mse_f,
            auc,
            avgcov_s: coverage.avgcov_s,
            avgcov_sc: coverage.avgcov_sc,
            avglen_s: coverage.avglen_s,
            avglen_sc: coverage.avglen_sc,
            rep_count: 1,
        }
    }

    /// Values in [`SUMMARY_COLUMNS`] order.
    pub fn values(&self) -> [f64; 8] {
        [
            self.rmse_gamma,
            self.mse_beta,
            self.mse_f,
            self.auc,
            self.avgcov_s,
            self.avgcov_sc,
            self.avglen_s,
            self.avglen_sc,
        ]
    }

    /// Plain mean of each field, weighted by replicate counts.
    pub fn mean(reports: &[EvalReport]) -> Result<EvalReport> {
        let total: usize = reports.iter().map(|r| r.rep_count).sum();
        if total == 0 {
            return Err(Error::Metric("no replicates to average".into()));
        }
        let mut acc = [0.0; 8];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v * r.rep_count as f64;
            }
        }
        let m = acc.map(|a| a / total as f64);
        Ok(EvalReport {
            rmse_gamma: m[0],
            mse_beta: m[1],
            mse_f: m[2],
            auc: m[3],
            avgcov_s: m[4],
            avgcov_sc: m[5],
            avglen_s: m[6],
            avglen_sc: m[7],
            rep_count: total,
        })
    }
}
