#![allow(dead_code)]

use bapla::basis::BasisMatrix;
use bapla::netsim::{simulate_bapla, trend_curve, InteractionMatrix, TrendFamily};
use bapla::{NeuronFit, SpikePanel};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row `[1, y_{t-1}, phi(t)]` for 0-based bin `t`, built straight from the panel and the basis.
pub fn covariates(panel: &SpikePanel, basis: &BasisMatrix, r: usize, t: usize) -> Vec<f64> {
    let mut x = vec![1.0];
    x.extend(panel.row(r, t - 1).iter().map(|&v| v as f64));
    x.extend((0..basis.m()).map(|k| basis.get(t + 1, k)));
    x
}

fn log1pexp(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

/// Lag-valid rows of the design and the targets of series `i`.
pub struct Problem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub d: usize,
}

impl Problem {
    pub fn new(panel: &SpikePanel, basis: &BasisMatrix, i: usize) -> Self {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for r in 0..panel.trials() {
            for t in 1..panel.n() {
                x.push(covariates(panel, basis, r, t));
                y.push(panel.get(r, t, i) as f64);
            }
        }
        Self { x, y, d: panel.d() }
    }

    pub fn nll(&self, theta: &[f64]) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(x, y)| {
                let eta: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
                log1pexp(eta) - y * eta
            })
            .sum()
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        for (x, y) in self.x.iter().zip(&self.y) {
            let eta: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
            let res = sigmoid(eta) - y;
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk += res * xk;
            }
        }
        g
    }

    pub fn objective(&self, theta: &[f64], lambda: f64) -> f64 {
        self.nll(theta) + lambda * theta[1..=self.d].iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Summed negative log-likelihood of series `i`.
pub fn nll(panel: &SpikePanel, basis: &BasisMatrix, i: usize, theta: &[f64]) -> f64 {
    Problem::new(panel, basis, i).nll(theta)
}

/// Gradient of [`nll`].
pub fn nll_grad(panel: &SpikePanel, basis: &BasisMatrix, i: usize, theta: &[f64]) -> Vec<f64> {
    Problem::new(panel, basis, i).grad(theta)
}

pub fn objective(panel: &SpikePanel, basis: &BasisMatrix, i: usize, theta: &[f64], lambda: f64) -> f64 {
    Problem::new(panel, basis, i).objective(theta, lambda)
}

/// Accelerated proximal gradient with backtracking and adaptive restart, run
/// on columns scaled to unit root-mean-square. Stops when the gradient mapping
/// falls below `1e-7` in the max norm.
pub fn prox_gradient(panel: &SpikePanel, basis: &BasisMatrix, i: usize, lambda: f64, iters: usize) -> Vec<f64> {
    let raw = Problem::new(panel, basis, i);
    let d = raw.d;
    let p = 1 + d + basis.m();
    let rows = raw.x.len() as f64;
    let scale: Vec<f64> = (0..p)
        .map(|k| {
            let ms = raw.x.iter().map(|x| x[k] * x[k]).sum::<f64>() / rows;
            if ms > 0.0 {
                ms.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let prob = Problem {
        x: raw.x.iter().map(|x| x.iter().zip(&scale).map(|(a, s)| a / s).collect()).collect(),
        y: raw.y,
        d,
    };
    let pen: Vec<f64> = (0..p)
        .map(|k| if (1..=d).contains(&k) { lambda / scale[k] } else { 0.0 })
        .collect();
    let objective = |v: &[f64]| prob.nll(v) + v.iter().zip(&pen).map(|(a, w)| w * a.abs()).sum::<f64>();
    let prox = |v: &mut [f64], step: f64| {
        for (x, w) in v.iter_mut().zip(&pen) {
            *x = x.signum() * (x.abs() - step * w).max(0.0);
        }
    };
    let mut x = vec![0.0; p];
    let mut y = x.clone();
    let mut tk = 1.0f64;
    let mut step = 1.0;
    let mut prev_obj = objective(&x);
    for _ in 0..iters {
        let g = prob.grad(&y);
        let fy = prob.nll(&y);
        let (next, mapping) = loop {
            let mut z: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            prox(&mut z, step);
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lin: f64 = g.iter().zip(&diff).map(|(a, b)| a * b).sum();
            let sq: f64 = diff.iter().map(|v| v * v).sum();
            if prob.nll(&z) <= fy + lin + sq / (2.0 * step) + 1e-12 {
                let mapping = diff.iter().fold(0.0f64, |m, v| m.max(v.abs())) / step;
                break (z, mapping);
            }
            step *= 0.5;
        };
        let obj = objective(&next);
        if obj > prev_obj {
            tk = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        y = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (tk - 1.0) / t_next * (a - b))
            .collect();
        x = next;
        tk = t_next;
        prev_obj = obj;
        if mapping < 1e-7 {
            break;
        }
    }
    let mut theta: Vec<f64> = x.iter().zip(&scale).map(|(v, s)| v / s).collect();
    // Centered spline columns sum to zero across k; report the zero-sum representative.
    let splines = &mut theta[1 + d..];
    if !splines.is_empty() {
        let mean = splines.iter().sum::<f64>() / splines.len() as f64;
        splines.iter_mut().for_each(|c| *c -= mean);
    }
    theta
}

/// Random sparse network, intercepts in `[-1.5, 0.5]` and a normal-pdf trend.
pub fn random_panel(seed: u64, d: usize, n: usize, trials: usize) -> (SpikePanel, InteractionMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = InteractionMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            if rng.random::<f64>() < 0.4 {
                g.set(i, j, 2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }
    let beta: Vec<f64> = (0..d).map(|_| -1.5 + 2.0 * rng.random::<f64>()).collect();
    let amp = 0.3 * rng.random::<f64>();
    let trends: Vec<_> = (0..d)
        .map(|_| trend_curve(&TrendFamily::NormalPdf { mean: 0.5, sd: 0.15 }, amp, n).unwrap())
        .collect();
    let panel = simulate_bapla(&g, &beta, &trends, n, trials, seed ^ 0x5eed).unwrap();
    (panel, g)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Normwise relative error `max|a - b| / max|b|`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_abs_diff(a, b) / scale
}

/// Random instance (`d = 3`, `m = 4`, one trial of 200 bins) with random
/// parameters for series 0. Returns the panel, basis and fit.
pub fn derivative_instance(seed: u64) -> (SpikePanel, BasisMatrix, NeuronFit) {
    let (panel, _) = random_panel(seed, 3, 200, 1);
    let basis = BasisMatrix::centered(4, 3, 200).unwrap();
    let mut fit = bapla::fit::fit_neuron(&panel, &basis, 0, 1.0, &Default::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + 7);
    let mut draw = || rng.random::<f64>() - 0.5;
    fit.beta = draw() - 0.5;
    fit.gamma.iter_mut().for_each(|g| *g = draw());
    fit.spline_coefs.iter_mut().for_each(|c| *c = 0.5 * draw());
    (panel, basis, fit)
}

fn theta_vec(fit: &NeuronFit) -> Vec<f64> {
    let mut t = vec![fit.beta];
    t.extend(&fit.gamma);
    t.extend(&fit.spline_coefs);
    t
}

/// Relative errors of the lag score against central differences of the
/// mean negative log-likelihood, and of the lag Fisher matrix against
/// central differences of the score (`h = 1e-5`).
pub fn derivative_errors(seed: u64) -> (f64, f64) {
    let (panel, basis, fit) = derivative_instance(seed);
    let prob = Problem::new(&panel, &basis, 0);
    let n = prob.y.len() as f64;
    let d = panel.d();
    let h = 1e-5;
    let theta = theta_vec(&fit);
    let score = bapla::infer::score_gamma(&fit, &panel, &basis, 0).unwrap();
    let fd: Vec<f64> = (0..d)
        .map(|j| {
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[1 + j] += h;
            dn[1 + j] -= h;
            (prob.nll(&up) - prob.nll(&dn)) / (2.0 * h * n)
        })
        .collect();

    let fisher = bapla::infer::fisher_gamma(&fit, &panel, &basis, 0).unwrap();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for j in 0..d {
        let shifted = |delta: f64| {
            let mut f = fit.clone();
            f.gamma[j] += delta;
            bapla::infer::score_gamma(&f, &panel, &basis, 0).unwrap()
        };
        let (up, dn) = (shifted(h), shifted(-h));
        for k in 0..d {
            analytic.push(fisher[(k, j)]);
            numeric.push((up[k] - dn[k]) / (2.0 * h));
        }
    }
    (rel_err(&score, &fd), rel_err(&analytic, &numeric))
}
