mod support;

use bapla::basis::BasisMatrix;
use bapla::fit::{
    bic, bic_scan, fit_network, fit_neuron, fit_neuron_from, lambda_max, lambda_path, null_fit, select_lambda, Design,
    FitOptions,
};
use bapla::netsim::{simulate_bapla, trend_curve, InteractionMatrix, TrendFamily};
use bapla::SpikePanel;
use support::*;

fn theta_of(fit: &bapla::NeuronFit) -> Vec<f64> {
    let mut t = vec![fit.beta];
    t.extend(&fit.gamma);
    t.extend(&fit.spline_coefs);
    t
}

fn tight() -> FitOptions {
    FitOptions {
        tol: 1e-10,
        max_outer_iters: 200,
        ..FitOptions::default()
    }
}

#[test]
fn coordinate_descent_matches_proximal_gradient() {
    for seed in 0..6u64 {
        let (panel, _) = random_panel(100 + seed, 3, 200, 1);
        let basis = BasisMatrix::centered(4, 3, 200).unwrap();
        let design = Design::new(&panel, &basis).unwrap();
        for i in 0..3 {
            let lambda = 0.3 * lambda_max(&design, i, &FitOptions::default());
            let fit = fit_neuron(&panel, &basis, i, lambda, &tight()).unwrap();
            let oracle = prox_gradient(&panel, &basis, i, lambda, 5_000);
            let ours = theta_of(&fit);
            let a = objective(&panel, &basis, i, &ours, lambda);
            let b = objective(&panel, &basis, i, &oracle, lambda);
            assert!((a - b).abs() <= 1e-7 * b.abs(), "seed {seed} series {i}: {a} vs {b}");
            assert!(max_abs_diff(&ours, &oracle) < 1e-3, "{ours:?} vs {oracle:?}");
        }
    }
}

#[test]
fn multi_trial_fit_matches_oracle() {
    let (panel, _) = random_panel(7, 2, 60, 4);
    let basis = BasisMatrix::empty(60);
    let fit = fit_neuron(&panel, &basis, 1, 1.5, &tight()).unwrap();
    let oracle = prox_gradient(&panel, &basis, 1, 1.5, 5_000);
    assert!(max_abs_diff(&theta_of(&fit), &oracle) < 1e-4);
}

#[test]
fn neg_loglik_matches_direct_sum() {
    let (panel, _) = random_panel(3, 4, 150, 2);
    let basis = BasisMatrix::centered(5, 3, 150).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    let theta: Vec<f64> = (0..10).map(|k| 0.1 * (k as f64 - 4.5)).collect();
    for i in 0..4 {
        let a = design.neg_loglik(i, &theta);
        let b = nll(&panel, &basis, i, &theta);
        assert!((a - b).abs() < 1e-10 * b.abs());
    }
}

#[test]
fn score_matches_finite_differences() {
    let (panel, _) = random_panel(11, 3, 120, 1);
    let basis = BasisMatrix::centered(4, 3, 120).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    let theta = vec![-0.4, 0.3, -0.2, 0.5, 0.1, -0.1, 0.2, -0.2];
    let score = design.score(0, &theta);
    let h = 1e-5;
    for k in 0..theta.len() {
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[k] += h;
        dn[k] -= h;
        let fd = -(nll(&panel, &basis, 0, &up) - nll(&panel, &basis, 0, &dn)) / (2.0 * h);
        assert!((score[k] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "coordinate {k}");
    }
}

#[test]
fn surrogate_gradient_agrees_at_expansion_point() {
    let (panel, _) = random_panel(12, 3, 150, 1);
    let basis = BasisMatrix::centered(4, 3, 150).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    let theta = vec![-0.2, 0.4, 0.0, -0.3, 0.05, 0.1, -0.1, -0.05];
    let (z, w) = design.linearize(2, &theta, 1e-5);
    let s = bapla::fit::Surrogate::new(&design, &z, &w, theta.clone());
    let grad = s.gradient();
    let truth = nll_grad(&panel, &basis, 2, &theta);
    for (a, b) in grad.iter().zip(&truth) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
    }
}

#[test]
fn kkt_and_descent_hold_at_solution() {
    let (panel, _) = random_panel(21, 4, 400, 1);
    let basis = BasisMatrix::centered(5, 3, 400).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    for i in 0..4 {
        let lambda = 0.2 * lambda_max(&design, i, &FitOptions::default());
        let fit = fit_neuron(&panel, &basis, i, lambda, &tight()).unwrap();
        assert!(fit.converged);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0] + 1e-8 * w[0].abs().max(1.0)));
        assert!(fit.objective <= fit.trace[0]);
        let g = nll_grad(&panel, &basis, i, &theta_of(&fit));
        for (j, &gj) in g[1..=4].iter().enumerate() {
            let c = fit.gamma[j];
            if c != 0.0 {
                assert!((gj + lambda * c.signum()).abs() < 1e-4, "active {j}: {gj}");
            } else {
                assert!(gj.abs() <= lambda + 1e-4, "inactive {j}: {gj}");
            }
        }
        for gk in g.iter().skip(5).chain(std::iter::once(&g[0])) {
            assert!(gk.abs() < 1e-4);
        }
    }
}

#[test]
fn lambda_max_is_the_zero_threshold() {
    let (panel, _) = random_panel(31, 3, 300, 1);
    let basis = BasisMatrix::centered(4, 3, 300).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    let opts = FitOptions::default();
    for i in 0..3 {
        let top = lambda_max(&design, i, &opts);
        let null = null_fit(&design, i, &opts);
        let score = nll_grad(&panel, &basis, i, &theta_of(&null));
        let kkt = score[1..=3].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((top - kkt).abs() <= 1e-6 * kkt);

        let at = fit_neuron(&panel, &basis, i, top, &opts).unwrap();
        assert!(at.gamma.iter().all(|&g| g == 0.0));
        let below = fit_neuron(&panel, &basis, i, 0.99 * top, &opts).unwrap();
        assert!(below.gamma.iter().any(|&g| g != 0.0));

        let (mut lo, mut hi) = (0.0, 2.0 * top);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let f = fit_neuron(&panel, &basis, i, mid, &opts).unwrap();
            if f.gamma.iter().all(|&g| g == 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((hi - top).abs() <= 1e-3 * top, "bisection {hi} vs {top}");
    }
}

#[test]
fn duplicating_trials_doubles_lambda_max() {
    let (panel, _) = random_panel(41, 3, 250, 1);
    let doubled = panel.select_trials(&[0, 0]);
    let basis = BasisMatrix::centered(4, 3, 250).unwrap();
    let opts = FitOptions::default();
    let a = lambda_max(&Design::new(&panel, &basis).unwrap(), 0, &opts);
    let b = lambda_max(&Design::new(&doubled, &basis).unwrap(), 0, &opts);
    assert!((b / a - 2.0).abs() < 1e-6);
}

#[test]
fn nonzeros_grow_along_the_path() {
    let (panel, _) = random_panel(51, 6, 800, 1);
    let basis = BasisMatrix::centered(5, 3, 800).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    let opts = FitOptions::default();
    for i in 0..6 {
        let scan = bic_scan(&design, i, &opts).unwrap();
        assert_eq!(scan.nonzeros[0], 0);
        for w in scan.nonzeros.windows(2) {
            assert!(w[1] + 1 >= w[0], "{:?}", scan.nonzeros);
        }
    }
}

#[test]
fn bic_scan_matches_exhaustive_recomputation() {
    let (panel, _) = random_panel(61, 4, 500, 2);
    let basis = BasisMatrix::centered(5, 3, 500).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    let opts = FitOptions::default();
    let scan = bic_scan(&design, 1, &opts).unwrap();
    let path = lambda_path(&design, 1, &scan.grid, &opts);
    let n = panel.n_effective();
    let mut best = 0;
    for (k, f) in path.iter().enumerate() {
        let nz = f.gamma.iter().filter(|&&g| g != 0.0).count();
        let value = 2.0 * nll(&panel, &basis, 1, &theta_of(f)) + (n as f64).ln() * (nz + 1 + 5) as f64;
        assert!((value - scan.bic[k]).abs() < 1e-8 * value);
        assert_eq!(value, bic(f.neg_loglik, nz, 5, n));
        if scan.bic[k] < scan.bic[best] {
            best = k;
        }
    }
    assert_eq!(scan.best, best);
}

#[test]
fn single_panel_selection_is_the_scan_minimizer() {
    let (panel, _) = random_panel(71, 1, 600, 1);
    let basis = BasisMatrix::centered(4, 3, 600).unwrap();
    let opts = FitOptions::default();
    let sel = select_lambda(&[panel.clone()], &basis, &opts).unwrap();
    let scan = bic_scan(&Design::new(&panel, &basis).unwrap(), 0, &opts).unwrap();
    assert_eq!(sel.lambda_star, scan.best_lambda());
    let twice = select_lambda(&[panel.clone(), panel], &basis, &opts).unwrap();
    assert!((twice.lambda_star - sel.lambda_star).abs() < 1e-12 * sel.lambda_star);
}

#[test]
fn intercept_only_recovers_beta() {
    let n = 20_000;
    let net = InteractionMatrix::zeros(2);
    let zero = trend_curve(&TrendFamily::Zero, 0.0, n).unwrap();
    let panel = simulate_bapla(&net, &[-2.6, -2.6], &[zero.clone(), zero], n, 1, 5).unwrap();
    let basis = BasisMatrix::centered(10, 3, n).unwrap();
    let fit = fit_neuron(&panel, &basis, 0, 1e6, &FitOptions::default()).unwrap();
    assert!(fit.gamma.iter().all(|&g| g == 0.0));
    assert!((fit.beta + 2.6).abs() < 0.1, "beta {}", fit.beta);
}

#[test]
fn without_trend_only_intercept_and_lags_move() {
    let (panel, _) = random_panel(81, 3, 300, 1);
    let basis = BasisMatrix::empty(300);
    let fit = fit_neuron(&panel, &basis, 0, 2.0, &FitOptions::default()).unwrap();
    assert!(fit.spline_coefs.is_empty());
    let oracle = prox_gradient(&panel, &basis, 0, 2.0, 5_000);
    assert!(max_abs_diff(&theta_of(&fit), &oracle) < 1e-3);
}

#[test]
fn network_fit_with_one_series_is_a_neuron_fit() {
    let (panel, _) = random_panel(91, 1, 400, 1);
    let basis = BasisMatrix::centered(4, 3, 400).unwrap();
    let opts = FitOptions::default();
    let net = fit_network(&panel, &basis, 3.0, &opts).unwrap();
    let one = fit_neuron(&panel, &basis, 0, 3.0, &opts).unwrap();
    assert_eq!(net.fits[0], one);
    assert_eq!(net.interaction.get(0, 0), one.gamma[0]);
}

#[test]
fn permuting_series_permutes_the_estimate() {
    let (panel, _) = random_panel(101, 4, 500, 1);
    let perm = [2, 0, 3, 1];
    let permuted = panel.select_neurons(&perm);
    let basis = BasisMatrix::centered(4, 3, 500).unwrap();
    let opts = tight();
    let a = fit_network(&panel, &basis, 2.0, &opts).unwrap();
    let b = fit_network(&permuted, &basis, 2.0, &opts).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let x = a.interaction.get(perm[i], perm[j]);
            let y = b.interaction.get(i, j);
            assert!((x - y).abs() < 1e-6, "({i},{j}) {x} vs {y}");
        }
    }
}

#[test]
fn warm_start_reaches_the_same_point() {
    let (panel, _) = random_panel(111, 3, 300, 1);
    let basis = BasisMatrix::centered(4, 3, 300).unwrap();
    let design = Design::new(&panel, &basis).unwrap();
    let opts = tight();
    let cold = fit_neuron_from(&design, 2, 1.0, &opts, None);
    let start = vec![0.5; design.p()];
    let warm = fit_neuron_from(&design, 2, 1.0, &opts, Some(&start));
    assert!(max_abs_diff(&theta_of(&cold), &theta_of(&warm)) < 1e-5);
}

#[test]
fn silent_predictor_gets_zero_weight() {
    let n = 300;
    let mut panel = SpikePanel::zeros(1, n, SpikePanel::default_ids(2), 1.0);
    for t in (0..n).step_by(3) {
        panel.set(0, t, 0, true);
    }
    let fit = fit_neuron(&panel, &BasisMatrix::empty(n), 0, 0.0, &FitOptions::default()).unwrap();
    assert_eq!(fit.gamma[1], 0.0);
}
