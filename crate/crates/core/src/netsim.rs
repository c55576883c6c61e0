//! Ground-truth networks, trend curves and synthetic panels.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, Gamma, Normal};

use crate::error::{Error, Result};
use crate::fit::inv_logit;
use crate::panel::SpikePanel;
use crate::seed::{self, Purpose};

/// Directed interaction weights; row `i` holds the lagged effects of every
/// series on series `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix(DMatrix<f64>);

impl InteractionMatrix {
    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "interaction matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension(format!("row of length {} in a {d}x{d} matrix", r.len())));
        }
        Ok(Self(DMatrix::from_fn(d, d, |i, j| rows[i][j])))
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Off-diagonal nonzero positions in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let d = self.d();
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if i != j && self.0[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Largest number of nonzeros in any row.
    pub fn max_degree(&self) -> usize {
        self.0
            .row_iter()
            .map(|r| r.iter().filter(|&&v| v != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    /// `support[i][j]` is true for off-diagonal nonzeros.
    pub fn support(&self) -> Vec<Vec<bool>> {
        let d = self.d();
        (0..d)
            .map(|i| (0..d).map(|j| i != j && self.0[(i, j)] != 0.0).collect())
            .collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Sparse row view: `(j, weight)` for every nonzero in row `i`.
    pub fn sparse_row(&self, i: usize) -> Vec<(usize, f64)> {
        self.0
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect()
    }

    /// Reorders series: entry `(a, b)` of the result is `self[perm[a], perm[b]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.d();
        Self(DMatrix::from_fn(d, d, |a, b| self.0[(perm[a], perm[b])]))
    }
}

/// Topology of a synthetic network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkKind {
    /// Both directed edges between every pair of neighbours `(i, i+1)`.
    Chain,
    /// Exactly `edge_count` directed off-diagonal edges, uniformly placed.
    ErdosRenyi { edge_count: usize },
    /// Independent edges, more likely within a block than between blocks.
    StochasticBlock {
        block_sizes: Vec<usize>,
        p_within: f64,
        p_between: f64,
    },
}

fn default_magnitude() -> f64 {
    0.3
}

fn default_sign_mix() -> f64 {
    0.5
}

/// Generator parameters for an [`InteractionMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub d: usize,
    pub topology: NetworkKind,
    /// Common absolute edge weight.
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    /// Fraction of edges that are inhibitory (negative).
    #[serde(default = "default_sign_mix")]
    pub sign_mix: f64,
    /// Optional upper bound on the number of edges.
    #[serde(default)]
    pub sparsity_budget: Option<usize>,
}

impl NetworkSpec {
    pub fn chain(d: usize) -> Self {
        Self {
            d,
            topology: NetworkKind::Chain,
            magnitude: default_magnitude(),
            sign_mix: default_sign_mix(),
            sparsity_budget: None,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<InteractionMatrix> {
        let net = match &self.topology {
            NetworkKind::Chain => gen_chain(self.d, self.magnitude, self.sign_mix, seed)?,
            NetworkKind::ErdosRenyi { edge_count } => {
                gen_erdos_renyi(self.d, *edge_count, self.magnitude, self.sign_mix, seed)?
            }
            NetworkKind::StochasticBlock {
                block_sizes,
                p_within,
                p_between,
            } => {
                let total: usize = block_sizes.iter().sum();
                if total != self.d {
                    return Err(Error::Network(format!(
                        "block sizes sum to {total}, expected d = {}",
                        self.d
                    )));
                }
                gen_sbm(block_sizes, *p_within, *p_between, self.magnitude, self.sign_mix, seed)?
            }
        };
        if let Some(budget) = self.sparsity_budget {
            let e = net.edge_count();
            if e > budget {
                return Err(Error::Network(format!(
                    "generated {e} edges, above the sparsity budget of {budget}"
                )));
            }
        }
        Ok(net)
    }
}

fn check_weights(magnitude: f64, sign_mix: f64) -> Result<()> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::Network(format!("magnitude must be positive, got {magnitude}")));
    }
    if !(0.0..=1.0).contains(&sign_mix) {
        return Err(Error::Network(format!("sign_mix must lie in [0, 1], got {sign_mix}")));
    }
    Ok(())
}

/// Writes `magnitude` on every edge, then flips `round(sign_mix * |E|)` of them
/// (chosen by shuffle) to `-magnitude`.
fn assign_weights(
    d: usize,
    edges: &[(usize, usize)],
    magnitude: f64,
    sign_mix: f64,
    rng: &mut ChaCha8Rng,
) -> InteractionMatrix {
    let mut net = InteractionMatrix::zeros(d);
    let negatives = (sign_mix * edges.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    let mut negative = vec![false; edges.len()];
    for &k in order.iter().take(negatives) {
        negative[k] = true;
    }
    for (k, &(i, j)) in edges.iter().enumerate() {
        net.set(i, j, if negative[k] { -magnitude } else { magnitude });
    }
    net
}

/// Chain graph: edges `i -> i+1` and `i+1 -> i` for all neighbours.
pub fn gen_chain(d: usize, magnitude: f64, sign_mix: f64, seed: u64) -> Result<InteractionMatrix> {
    if d < 2 {
        return Err(Error::Network(format!("chain needs d >= 2, got {d}")));
    }
    check_weights(magnitude, sign_mix)?;
    let mut edges = Vec::with_capacity(2 * (d - 1));
    for i in 0..d - 1 {
        edges.push((i, i + 1));
        edges.push((i + 1, i));
    }
    edges.sort_unstable();
    let mut rng = seed::stream(seed, Purpose::Network, 0);
    Ok(assign_weights(d, &edges, magnitude, sign_mix, &mut rng))
}

/// Erdős–Rényi graph with an exact edge count.
pub fn gen_erdos_renyi(
    d: usize,
    edge_count: usize,
    magnitude: f64,
    sign_mix: f64,
    seed: u64,
) -> Result<InteractionMatrix> {
    let slots = d * d.saturating_sub(1);
    if edge_count > slots {
        return Err(Error::Network(format!(
            "{edge_count} edges requested but only {slots} off-diagonal slots exist"
        )));
    }
    check_weights(magnitude, sign_mix)?;
    let mut rng = seed::stream(seed, Purpose::Network, 0);
    let mut edges: Vec<(usize, usize)> = index::sample(&mut rng, slots, edge_count)
        .into_iter()
        .map(|k| {
            let i = k / (d - 1);
            let mut j = k % (d - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect();
    edges.sort_unstable();
    Ok(assign_weights(d, &edges, magnitude, sign_mix, &mut rng))
}

/// Stochastic block model over consecutive blocks of the given sizes.
pub fn gen_sbm(
    block_sizes: &[usize],
    p_within: f64,
    p_between: f64,
    magnitude: f64,
    sign_mix: f64,
    seed: u64,
) -> Result<InteractionMatrix> {
    let valid = |p: f64| (0.0..=1.0).contains(&p);
    if !valid(p_within) || !valid(p_between) {
        return Err(Error::Network(format!(
            "edge probabilities must lie in [0, 1], got {p_within} and {p_between}"
        )));
    }
    if p_within <= p_between {
        return Err(Error::Network(format!(
            "p_within ({p_within}) must exceed p_between ({p_between})"
        )));
    }
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(Error::Network("blocks must be non-empty".into()));
    }
    check_weights(magnitude, sign_mix)?;
    let block: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let d = block.len();
    let mut rng = seed::stream(seed, Purpose::Network, 0);
    let mut edges = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let p = if block[i] == block[j] { p_within } else { p_between };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(assign_weights(d, &edges, magnitude, sign_mix, &mut rng))
}

/// Shape of a synthetic trend before scaling and centering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrendFamily {
    Zero,
    NormalPdf { mean: f64, sd: f64 },
    GammaPdf { shape: f64, rate: f64 },
}

impl TrendFamily {
    pub fn name(&self) -> &'static str {
        match self {
            TrendFamily::Zero => "zero",
            TrendFamily::NormalPdf { .. } => "normal_pdf",
            TrendFamily::GammaPdf { .. } => "gamma_pdf",
        }
    }

    /// Unscaled density at `u = t/n`, `t = 1..n`.
    pub fn raw_values(&self, n: usize) -> Result<Vec<f64>> {
        let grid = (1..=n).map(|t| t as f64 / n as f64);
        match *self {
            TrendFamily::Zero => Ok(vec![0.0; n]),
            TrendFamily::NormalPdf { mean, sd } => {
                let dist = Normal::new(mean, sd)
                    .map_err(|e| Error::Trend(format!("normal(mean={mean}, sd={sd}): {e}")))?;
                Ok(grid.map(|u| dist.pdf(u)).collect())
            }
            TrendFamily::GammaPdf { shape, rate } => {
                let dist = Gamma::new(shape, rate)
                    .map_err(|e| Error::Trend(format!("gamma(shape={shape}, rate={rate}): {e}")))?;
                Ok(grid.map(|u| dist.pdf(u)).collect())
            }
        }
    }
}

/// A mean-centered trend `f_i(t/n)` sampled at `t = 1..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendCurve {
    pub values: Vec<f64>,
    pub family: TrendFamily,
    pub amplitude: f64,
}

/// `amplitude * pdf(t/n)`, then centered to zero sample mean.
pub fn trend_curve(family: &TrendFamily, amplitude: f64, n: usize) -> Result<TrendCurve> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::Trend(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let mut values: Vec<f64> = family.raw_values(n)?.into_iter().map(|v| amplitude * v).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    Ok(TrendCurve {
        values,
        family: family.clone(),
        amplitude,
    })
}

/// Amplitude that makes the centered curve peak at `peak` in absolute value.
pub fn calibrate_amplitude(family: &TrendFamily, peak: f64, n: usize) -> Result<f64> {
    let unit = trend_curve(family, 1.0, n)?;
    let max = unit.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(if max > 0.0 { peak / max } else { 0.0 })
}

/// Simulates `trials` independent trials of `n` bins each. The pre-history of
/// every trial is the zero vector; trial `r` draws from its own stream.
pub fn simulate_bapla(
    net: &InteractionMatrix,
    beta: &[f64],
    trends: &[TrendCurve],
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<SpikePanel> {
    let d = net.d();
    if beta.len() != d || trends.len() != d {
        return Err(Error::Dimension(format!(
            "network has d = {d} but got {} intercepts and {} trends",
            beta.len(),
            trends.len()
        )));
    }
    if let Some(bad) = trends.iter().find(|c| c.values.len() != n) {
        return Err(Error::Dimension(format!(
            "trend of length {} for trials of {n} bins",
            bad.values.len()
        )));
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..d).map(|i| net.sparse_row(i)).collect();
    let blocks: Vec<Vec<u8>> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::stream(seed, Purpose::Trial, r as u64);
            let mut block = vec![0u8; n * d];
            let mut prev = vec![0u8; d];
            for t in 0..n {
                for i in 0..d {
                    let drive: f64 = rows[i].iter().map(|&(j, g)| g * prev[j] as f64).sum();
                    let p = inv_logit(beta[i] + drive + trends[i].values[t]);
                    block[t * d + i] = (rng.random::<f64>() < p) as u8;
                }
                prev.copy_from_slice(&block[t * d..(t + 1) * d]);
            }
            block
        })
        .collect();
    SpikePanel::from_trials(
        blocks,
        n,
        SpikePanel::default_ids(d),
        (0..trials as u64).collect(),
        1.0,
    )
}
