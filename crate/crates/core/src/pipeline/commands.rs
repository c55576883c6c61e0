//! The five subcommands. Each reads its section of the configuration, writes
//! its artifacts under `config.out`, and returns notices for the user.

use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::BasisMatrix;
use crate::error::{Error, Result};
use crate::fit::{fit_network_with, select_lambda, FitOptions, LambdaSelection, ModelFit, NeuronFit};
use crate::infer::{confidence_intervals, desparsify, normal_quantile, significance_filter, CIMatrix};
use crate::io::{
    bin_events, export_dot, filter_neurons, filter_trials, read_anchor_csv, read_event_csv, read_matrix_csv,
    read_panel_csv, read_vector_csv, sidecar_path, write_json, write_matrix_csv, write_panel_csv, write_text,
    write_vector_csv, PanelMeta, Side, TrialWindow,
};
use crate::metrics::{EvalReport, SUMMARY_COLUMNS};
use crate::netsim::InteractionMatrix;
use crate::panel::SpikePanel;
use crate::seed::{derive, Purpose, RNG_ALGORITHM};

use super::config::{AucScores, EvalSection, FitSection, InferSection, PrepSection, RunConfig};
use super::scenario::{run_scenario, score, Estimates, MonteCarlo, ScenarioSpec};

fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("configuration has no `{name}` section")))
}

fn labels(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|k| format!("{prefix}{k}")).collect()
}

fn rows_matrix(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Writes `resolved_config.json` into the output directory.
pub fn write_resolved(config: &RunConfig) -> Result<()> {
    write_json(&config.out.join("resolved_config.json"), &config.resolved())
}

#[derive(Debug, Serialize)]
struct SimulateMeta<'a> {
    seed: u64,
    rng: &'static str,
    network_seed: u64,
    panel_seed: u64,
    scenario: &'a ScenarioSpec,
    edge_count: usize,
    trend_families: Vec<&'static str>,
    trend_amplitudes: Vec<f64>,
    n_effective: usize,
}

/// Simulates one panel and writes it with the generating parameters.
pub fn cmd_simulate(config: &RunConfig) -> Result<Vec<String>> {
    let spec = section(&config.simulate, "simulate")?;
    let truth = spec.truth(config.seed)?;
    let panel_seed = derive(config.seed, Purpose::Replicate, 0);
    let panel = truth.simulate(panel_seed)?;
    let out = &config.out;
    let ids = panel.neuron_ids().to_vec();
    write_panel_csv(&panel, &out.join("panel.csv"), None)?;
    write_matrix_csv(&out.join("truth_gamma.csv"), &ids, &ids, truth.gamma.matrix())?;
    write_vector_csv(&out.join("truth_beta.csv"), "beta", &ids, &truth.beta)?;
    let curves: Vec<Vec<f64>> = truth.trends.iter().map(|c| c.values.clone()).collect();
    write_matrix_csv(&out.join("truth_f.csv"), &ids, &labels("t_", spec.n), &rows_matrix(&curves, spec.n))?;
    let meta = SimulateMeta {
        seed: config.seed,
        rng: RNG_ALGORITHM,
        network_seed: derive(config.seed, Purpose::Network, 0),
        panel_seed,
        scenario: spec,
        edge_count: truth.gamma.edge_count(),
        trend_families: truth.trends.iter().map(|c| c.family.name()).collect(),
        trend_amplitudes: truth.trends.iter().map(|c| c.amplitude).collect(),
        n_effective: panel.n_effective(),
    };
    write_json(&out.join("simulate_meta.json"), &meta)?;
    write_resolved(config)?;
    Ok(vec![format!(
        "simulated {} trial(s) of {} bins for {} series ({} edges)",
        panel.trials(),
        panel.n(),
        panel.d(),
        meta.edge_count
    )])
}

/// Per-series record in `fit_meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub id: String,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub halvings: usize,
    pub neg_loglik: f64,
    pub objective: f64,
    pub kkt_violation: f64,
    pub nonzero_lags: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMeta {
    pub lambda_star: f64,
    /// `fixed`, `panel` or `training`.
    pub lambda_source: String,
    /// `per_series_optima[panel][i]` when the penalty was selected.
    #[serde(default)]
    pub per_series_optima: Option<Vec<Vec<f64>>>,
    pub m: usize,
    pub degree: usize,
    pub bins_per_trial: usize,
    pub trials: usize,
    pub n_effective: usize,
    pub options: FitOptions,
    pub series: Vec<SeriesMeta>,
    pub warnings: Vec<String>,
}

fn effective_degree(m: usize, degree: usize) -> usize {
    if m == 0 {
        0
    } else {
        degree.min(m - 1)
    }
}

fn choose_lambda(config: &RunConfig, sec: &FitSection, panel: &SpikePanel, basis: &BasisMatrix) -> Result<(String, Option<LambdaSelection>)> {
    if let Some(l) = sec.lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Config(format!("fit.lambda must be a finite value >= 0, got {l}")));
        }
        return Ok(("fixed".into(), None));
    }
    match &sec.training {
        None => Ok(("panel".into(), Some(select_lambda(std::slice::from_ref(panel), basis, &sec.options)?))),
        Some(training) => {
            let spec = match (&training.scenario, &config.simulate) {
                (Some(s), _) | (None, Some(s)) => s,
                (None, None) => {
                    return Err(Error::Config(
                        "fit.training needs a scenario, either its own or the `simulate` section".into(),
                    ))
                }
            };
            if spec.d() != panel.d() || spec.n != panel.n() {
                return Err(Error::Config(format!(
                    "training scenario has d = {}, n = {} but the panel has d = {}, n = {}",
                    spec.d(),
                    spec.n,
                    panel.d(),
                    panel.n()
                )));
            }
            let truth = spec.truth(config.seed)?;
            let sel = truth.training_lambda(basis, training.replicates, config.seed, &sec.options)?;
            Ok(("training".into(), Some(sel)))
        }
    }
}

/// Selects (or takes) the penalty, fits every series and writes the estimates.
pub fn cmd_fit(config: &RunConfig) -> Result<Vec<String>> {
    let sec = section(&config.fit, "fit")?;
    sec.options.validate()?;
    let panel = read_panel_csv(&sec.panel)?;
    let basis = BasisMatrix::centered(sec.m, sec.degree, panel.n())?;
    let (source, selection) = choose_lambda(config, sec, &panel, &basis)?;
    let d = panel.d();
    let lambdas: Vec<f64> = match (&selection, sec.lambda) {
        (_, Some(l)) => vec![l; d],
        (Some(sel), None) if sec.options.per_neuron_lambda => (0..d)
            .map(|i| sel.per_series.iter().map(|p| p[i]).sum::<f64>() / sel.per_series.len() as f64)
            .collect(),
        (Some(sel), None) => vec![sel.lambda_star; d],
        (None, None) => unreachable!("a penalty is either fixed or selected"),
    };
    let fit = fit_network_with(&panel, &basis, &lambdas, &sec.options)?;
    let ids = panel.neuron_ids().to_vec();
    let mut warnings = Vec::new();
    for (id, f) in ids.iter().zip(&fit.fits) {
        if !f.converged {
            let msg = format!("{id}: no convergence after {} IRLS steps", f.iterations);
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    write_fit(&config.out, &ids, &fit)?;
    let lambda_star = selection.as_ref().map_or(lambdas[0], |s| s.lambda_star);
    let meta = FitMeta {
        lambda_star,
        lambda_source: source,
        per_series_optima: selection.map(|s| s.per_series),
        m: basis.m(),
        degree: effective_degree(sec.m, sec.degree),
        bins_per_trial: panel.n(),
        trials: panel.trials(),
        n_effective: panel.n_effective(),
        options: sec.options.clone(),
        series: ids
            .iter()
            .zip(&fit.fits)
            .map(|(id, f)| SeriesMeta {
                id: id.clone(),
                lambda: f.lambda,
                converged: f.converged,
                iterations: f.iterations,
                halvings: f.halvings,
                neg_loglik: f.neg_loglik,
                objective: f.objective,
                kkt_violation: f.kkt_violation,
                nonzero_lags: f.nonzeros(),
            })
            .collect(),
        warnings: warnings.clone(),
    };
    write_json(&config.out.join("fit_meta.json"), &meta)?;
    write_resolved(config)?;
    let mut notes = vec![format!(
        "fitted {d} series at lambda {} ({}); {} nonzero interactions",
        crate::io::fmt_g9(lambda_star),
        meta.lambda_source,
        fit.interaction.matrix().iter().filter(|v| **v != 0.0).count()
    )];
    notes.extend(warnings.into_iter().map(|w| format!("warning: {w}")));
    Ok(notes)
}

fn write_fit(out: &Path, ids: &[String], fit: &ModelFit) -> Result<()> {
    let d = fit.d();
    let m = fit.basis.m();
    write_matrix_csv(&out.join("gamma.csv"), ids, ids, fit.interaction.matrix())?;
    write_vector_csv(&out.join("beta.csv"), "beta", ids, &fit.betas())?;
    let coefs: Vec<Vec<f64>> = fit.fits.iter().map(|f| f.spline_coefs.clone()).collect();
    write_matrix_csv(&out.join("spline_coefs.csv"), ids, &labels("phi_", m), &rows_matrix(&coefs, m))?;
    let n = fit.basis.n();
    let curves: Vec<Vec<f64>> = (0..d).map(|i| fit.trend(i)).collect();
    write_matrix_csv(&out.join("fhat.csv"), ids, &labels("t_", n), &rows_matrix(&curves, n))
}

fn read_fit(dir: &Path, panel: &SpikePanel) -> Result<(ModelFit, FitMeta)> {
    let meta_path = dir.join("fit_meta.json");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: FitMeta =
        serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.line() as u64, e.to_string()))?;
    let gamma = read_matrix_csv(&dir.join("gamma.csv"))?;
    let (beta_ids, beta) = read_vector_csv(&dir.join("beta.csv"))?;
    let coefs = read_matrix_csv(&dir.join("spline_coefs.csv"))?;
    let ids = panel.neuron_ids();
    for (name, got) in [("gamma.csv", &gamma.rows), ("beta.csv", &beta_ids), ("spline_coefs.csv", &coefs.rows)] {
        if got.as_slice() != ids {
            return Err(Error::Dimension(format!("{name} does not list the panel's series in order")));
        }
    }
    if gamma.cols.as_slice() != ids || meta.series.len() != ids.len() {
        return Err(Error::Dimension("fit artifacts do not match the panel".into()));
    }
    if meta.bins_per_trial != panel.n() {
        return Err(Error::Dimension(format!(
            "fit used {} bins per trial, panel has {}",
            meta.bins_per_trial,
            panel.n()
        )));
    }
    // The stored degree is the one actually used.
    let basis = match meta.m {
        0 => BasisMatrix::empty(panel.n()),
        m => crate::basis::BasisSpec::new(m, meta.degree)?.build_design(panel.n())?.center()?,
    };
    let fits: Vec<NeuronFit> = (0..ids.len())
        .map(|i| {
            let s = &meta.series[i];
            NeuronFit {
                beta: beta[i],
                gamma: gamma.values.row(i).iter().copied().collect(),
                spline_coefs: coefs.values.row(i).iter().copied().collect(),
                lambda: s.lambda,
                neg_loglik: s.neg_loglik,
                objective: s.objective,
                iterations: s.iterations,
                converged: s.converged,
                halvings: s.halvings,
                kkt_violation: s.kkt_violation,
                trace: Vec::new(),
            }
        })
        .collect();
    let interaction = InteractionMatrix::from_matrix(gamma.values)?;
    Ok((
        ModelFit {
            fits,
            basis,
            interaction,
            lambda_star: meta.lambda_star,
        },
        meta,
    ))
}

#[derive(Debug, Serialize)]
struct SeriesCondition {
    id: String,
    /// `None` when the information matrix is singular.
    condition: Option<f64>,
    ridge: Option<f64>,
}

#[derive(Debug, Serialize)]
struct InferenceMeta {
    alpha: f64,
    quantile: f64,
    n_effective: usize,
    ridge_events: usize,
    significant_entries: usize,
    significant_edges: usize,
    series: Vec<SeriesCondition>,
}

/// Desparsifies a stored fit and writes intervals and the filtered network.
/// `network.dot` draws the significant edges only; `network_all.dot` draws
/// every nonzero penalized estimate with insignificant ones in grey.
pub fn cmd_infer(config: &RunConfig) -> Result<Vec<String>> {
    let sec: &InferSection = section(&config.infer, "infer")?;
    let panel = read_panel_csv(&sec.panel)?;
    let (fit, _) = read_fit(&sec.fit_dir, &panel)?;
    let desp = desparsify(&fit, &panel)?;
    let cis = confidence_intervals(&desp, sec.alpha)?;
    let filtered = significance_filter(&fit.interaction, &cis)?;
    let ids = panel.neuron_ids().to_vec();
    let out = &config.out;
    write_matrix_csv(&out.join("gamma_desp.csv"), &ids, &ids, &desp.gamma_desp)?;
    write_matrix_csv(&out.join("ci_lower.csv"), &ids, &ids, &cis.lower)?;
    write_matrix_csv(&out.join("ci_upper.csv"), &ids, &ids, &cis.upper)?;
    write_significant(&out.join("significant.csv"), &ids, &cis)?;
    write_matrix_csv(&out.join("gamma_filtered.csv"), &ids, &ids, filtered.matrix())?;
    let excluded = excluded_ids(&sec.panel)?;
    export_dot(&filtered, &ids, None, &excluded, &out.join("network.dot"))?;
    export_dot(&fit.interaction, &ids, Some(&cis.significant), &excluded, &out.join("network_all.dot"))?;
    let meta = InferenceMeta {
        alpha: sec.alpha,
        quantile: normal_quantile(1.0 - sec.alpha / 2.0)?,
        n_effective: desp.n_effective,
        ridge_events: desp.ridge_events(),
        significant_entries: cis.significant_count(),
        significant_edges: filtered.edge_count(),
        series: ids
            .iter()
            .zip(&desp.theta_condition)
            .map(|(id, c)| SeriesCondition {
                id: id.clone(),
                condition: c.condition.is_finite().then_some(c.condition),
                ridge: c.ridge,
            })
            .collect(),
    };
    write_json(&out.join("inference_meta.json"), &meta)?;
    write_resolved(config)?;
    let mut notes = vec![format!(
        "{} of {} penalized edges significant at alpha {}",
        meta.significant_edges,
        fit.interaction.edge_count(),
        sec.alpha
    )];
    if meta.ridge_events > 0 {
        notes.push(format!(
            "warning: ridge-regularized inverse used for {} series",
            meta.ridge_events
        ));
    }
    Ok(notes)
}

fn write_significant(path: &Path, ids: &[String], cis: &CIMatrix) -> Result<()> {
    let mut s = String::from("id");
    for id in ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    for (id, row) in ids.iter().zip(&cis.significant) {
        s.push_str(id);
        for &v in row {
            s.push_str(if v { ",1" } else { ",0" });
        }
        s.push('\n');
    }
    write_text(path, &s)
}

fn excluded_ids(panel_path: &Path) -> Result<Vec<String>> {
    let meta_path = sidecar_path(panel_path);
    if !meta_path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: PanelMeta =
        serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.line() as u64, e.to_string()))?;
    Ok(meta.excluded_neurons)
}

fn report_row(label: &str, index: usize, r: &EvalReport) -> String {
    let mut s = format!("{label},{index}");
    for v in r.values() {
        s.push(',');
        s.push_str(&crate::io::fmt_g9(v));
    }
    s.push('\n');
    s
}

/// Scores estimates, either from files or from end-to-end replicates.
pub fn cmd_eval(config: &RunConfig) -> Result<Vec<String>> {
    let sec = section(&config.eval, "eval")?;
    let header_cols = SUMMARY_COLUMNS.join(",");
    let mut reps = format!("scenario,rep,{header_cols}\n");
    let mut summary = format!("scenario,reps,lambda_star,{header_cols}\n");
    let mut notes = Vec::new();
    match sec {
        EvalSection::Files {
            truth_dir,
            fit_dir,
            infer_dir,
            auc_scores,
        } => {
            let report = eval_files(truth_dir, fit_dir, infer_dir, *auc_scores)?;
            reps.push_str(&report_row("files", 0, &report));
            let lambda = read_fit_lambda(fit_dir);
            summary.push_str(&format!("files,1,{lambda}"));
            summary.push_str(&report_row("", 0, &report)[2..]);
            notes.push(format!("RMSE {} AUC {}", crate::io::fmt_g9(report.rmse_gamma), crate::io::fmt_g9(report.auc)));
        }
        EvalSection::Scenarios {
            scenarios,
            replicates,
            m,
            alpha,
            lambda,
            training_replicates,
            auc_scores,
            options,
        } => {
            let mc = MonteCarlo {
                replicates: *replicates,
                m: *m,
                alpha: *alpha,
                lambda: *lambda,
                training_replicates: *training_replicates,
                auc_scores: *auc_scores,
                options: options.clone(),
            };
            for (name, spec) in scenarios {
                let result = run_scenario(spec, config.seed, &mc)?;
                for (r, rep) in result.reports().iter().enumerate() {
                    reps.push_str(&report_row(name, r, rep));
                }
                let mean = result.summary()?;
                let lambda = crate::io::fmt_g9(result.lambda_star);
                summary.push_str(&format!("{name},{},{lambda}", mean.rep_count));
                summary.push_str(&report_row("", 0, &mean)[2..]);
                notes.push(format!(
                    "{name}: RMSE {} AUC {} over {} replicates",
                    crate::io::fmt_g9(mean.rmse_gamma),
                    crate::io::fmt_g9(mean.auc),
                    mean.rep_count
                ));
            }
        }
    }
    write_text(&config.out.join("eval_reps.csv"), &reps)?;
    write_text(&config.out.join("eval_summary.csv"), &summary)?;
    write_resolved(config)?;
    Ok(notes)
}

fn read_fit_lambda(fit_dir: &Path) -> String {
    std::fs::read_to_string(fit_dir.join("fit_meta.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<FitMeta>(&t).ok())
        .map_or_else(|| "nan".into(), |m| crate::io::fmt_g9(m.lambda_star))
}

fn square(path: PathBuf) -> Result<InteractionMatrix> {
    InteractionMatrix::from_matrix(read_matrix_csv(&path)?.values)
}

fn eval_files(truth_dir: &Path, fit_dir: &Path, infer_dir: &Path, auc_scores: AucScores) -> Result<EvalReport> {
    let truth_gamma = square(truth_dir.join("truth_gamma.csv"))?;
    let (_, truth_beta) = read_vector_csv(&truth_dir.join("truth_beta.csv"))?;
    let truth_f = read_matrix_csv(&truth_dir.join("truth_f.csv"))?.values;
    let gamma = square(fit_dir.join("gamma.csv"))?;
    let (_, beta) = read_vector_csv(&fit_dir.join("beta.csv"))?;
    let fhat = read_matrix_csv(&fit_dir.join("fhat.csv"))?.values;
    let gamma_desp = read_matrix_csv(&infer_dir.join("gamma_desp.csv"))?.values;
    let lower = read_matrix_csv(&infer_dir.join("ci_lower.csv"))?.values;
    let upper = read_matrix_csv(&infer_dir.join("ci_upper.csv"))?.values;
    let d = truth_gamma.d();
    if [gamma.d(), gamma_desp.nrows(), lower.nrows(), upper.nrows(), fhat.nrows(), truth_f.nrows()]
        .iter()
        .any(|&k| k != d)
        || fhat.ncols() != truth_f.ncols()
    {
        return Err(Error::Dimension("truth and estimate files disagree in size".into()));
    }
    let cis = CIMatrix {
        significant: (0..d)
            .map(|i| (0..d).map(|j| lower[(i, j)] > 0.0 || upper[(i, j)] < 0.0).collect())
            .collect(),
        lower,
        upper,
        alpha: f64::NAN,
    };
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    let trends = rows(&fhat);
    let est = Estimates {
        gamma: &gamma,
        beta: &beta,
        trends: &trends,
        gamma_desp: &gamma_desp,
        cis: &cis,
    };
    score(est, &truth_gamma, &truth_beta, &rows(&truth_f), auc_scores)
}

#[derive(Debug, Serialize)]
struct PrepPanel {
    alignment: String,
    side: Side,
    file: String,
    trials_in: usize,
    trials_kept: usize,
    neurons_kept: usize,
    excluded_neurons: Vec<String>,
    dropped_events: usize,
    clipped_spikes: usize,
}

#[derive(Debug, Serialize)]
struct PrepMeta {
    window_s: [f64; 2],
    bin_width_s: f64,
    bins_per_trial: usize,
    panels: Vec<PrepPanel>,
    notices: Vec<String>,
}

/// Bins, aligns and filters recorded spikes into one panel per alignment and
/// trial side.
pub fn cmd_prep(config: &RunConfig) -> Result<Vec<String>> {
    let sec: &PrepSection = section(&config.prep, "prep")?;
    if sec.alignments.is_empty() {
        return Err(Error::Config("prep.alignments lists no anchor files".into()));
    }
    let events = read_event_csv(&sec.events)?;
    let ids = events.neuron_ids();
    let bins = TrialWindow::new(Vec::new(), sec.pre_s, sec.post_s, sec.bin_width_s)?.bins()?;
    let mut panels = Vec::new();
    let mut notices = Vec::new();
    for (alignment, anchor_path) in &sec.alignments {
        let anchors = read_anchor_csv(anchor_path)?;
        for side in [Side::Left, Side::Right] {
            let chosen: Vec<_> = anchors.iter().filter(|a| a.side == side).collect();
            if chosen.is_empty() {
                notices.push(format!(
                    "{alignment}: no {} trials, so no {} panel was written",
                    side.as_str(),
                    side.as_str()
                ));
                continue;
            }
            let window = TrialWindow::new(chosen.iter().map(|a| a.time_s).collect(), sec.pre_s, sec.post_s, sec.bin_width_s)?;
            let (binned, stats) = bin_events(&events, &window, Some(&ids))?;
            let binned = binned.with_trial_ids(chosen.iter().map(|a| a.trial).collect())?;
            let (by_trial, kept) = filter_trials(&binned, sec.trials)
                .map_err(|e| Error::Filter(format!("{alignment}/{}: {e}", side.as_str())))?;
            let (panel, excluded) = filter_neurons(&by_trial, sec.min_mean_spikes)
                .map_err(|e| Error::Filter(format!("{alignment}/{}: {e}", side.as_str())))?;
            let file = format!("panel_{alignment}_{}.csv", side.as_str());
            let meta = PanelMeta {
                anchors: Some(kept.iter().map(|&r| chosen[r].time_s).collect()),
                filters: vec![
                    format!("kept the {} most active of {} trials", sec.trials, binned.trials()),
                    format!("kept neurons with at least {} spikes per trial on average", sec.min_mean_spikes),
                ],
                excluded_neurons: excluded.clone(),
                ..PanelMeta::for_panel(&panel)
            };
            write_panel_csv(&panel, &config.out.join(&file), Some(&meta))?;
            let psth: Vec<Vec<f64>> = panel.psth();
            write_matrix_csv(
                &config.out.join(format!("psth_{alignment}_{}.csv", side.as_str())),
                panel.neuron_ids(),
                &labels("t_", panel.n()),
                &rows_matrix(&psth, panel.n()),
            )?;
            panels.push(PrepPanel {
                alignment: alignment.clone(),
                side,
                file,
                trials_in: binned.trials(),
                trials_kept: panel.trials(),
                neurons_kept: panel.d(),
                excluded_neurons: excluded,
                dropped_events: stats.dropped,
                clipped_spikes: stats.clipped,
            });
        }
    }
    let mut notes: Vec<String> = panels
        .iter()
        .map(|p| {
            format!(
                "{}: {}/{} trials, {} neurons kept, {} excluded",
                p.file,
                p.trials_kept,
                p.trials_in,
                p.neurons_kept,
                p.excluded_neurons.len()
            )
        })
        .collect();
    notes.extend(notices.iter().cloned());
    let meta = PrepMeta {
        window_s: [sec.pre_s, sec.post_s],
        bin_width_s: sec.bin_width_s,
        bins_per_trial: bins,
        panels,
        notices,
    };
    write_json(&config.out.join("prep_meta.json"), &meta)?;
    write_resolved(config)?;
    Ok(notes)
}
