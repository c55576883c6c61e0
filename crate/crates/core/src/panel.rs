//! Trial-structured multivariate binary series.

use crate::error::{Error, Result};

/// `l` trials of `n` bins by `d` binary series, stored trial-major then
/// time-major (`data[(trial * n + t) * d + i]`, `t` 0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct SpikePanel {
    n: usize,
    d: usize,
    data: Vec<u8>,
    neuron_ids: Vec<String>,
    trial_ids: Vec<u64>,
    /// Bin width in milliseconds.
    pub bin_width_ms: f64,
}

impl SpikePanel {
    /// All-zero panel.
    pub fn zeros(trials: usize, n: usize, neuron_ids: Vec<String>, bin_width_ms: f64) -> Self {
        let d = neuron_ids.len();
        Self {
            n,
            d,
            data: vec![0; trials * n * d],
            neuron_ids,
            trial_ids: (0..trials as u64).collect(),
            bin_width_ms,
        }
    }

    /// Builds a panel from per-trial row-major `n x d` blocks.
    pub fn from_trials(
        trials: Vec<Vec<u8>>,
        n: usize,
        neuron_ids: Vec<String>,
        trial_ids: Vec<u64>,
        bin_width_ms: f64,
    ) -> Result<Self> {
        let d = neuron_ids.len();
        if trial_ids.len() != trials.len() {
            return Err(Error::Dimension(format!(
                "{} trial ids for {} trials",
                trial_ids.len(),
                trials.len()
            )));
        }
        if !(bin_width_ms > 0.0) {
            return Err(Error::InvalidArgument(format!("bin width {bin_width_ms} ms")));
        }
        let mut data = Vec::with_capacity(trials.len() * n * d);
        for (r, block) in trials.into_iter().enumerate() {
            if block.len() != n * d {
                return Err(Error::Dimension(format!(
                    "trial {r} has {} entries, expected {n} x {d}",
                    block.len()
                )));
            }
            if let Some(v) = block.iter().find(|&&v| v > 1) {
                return Err(Error::InvalidArgument(format!("non-binary entry {v} in trial {r}")));
            }
            data.extend(block);
        }
        Ok(Self {
            n,
            d,
            data,
            neuron_ids,
            trial_ids,
            bin_width_ms,
        })
    }

    /// Default identifiers `neuron_1..neuron_d`.
    pub fn default_ids(d: usize) -> Vec<String> {
        (1..=d).map(|i| format!("neuron_{i}")).collect()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Bins per trial.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn trials(&self) -> usize {
        self.trial_ids.len()
    }

    pub fn neuron_ids(&self) -> &[String] {
        &self.neuron_ids
    }

    pub fn trial_ids(&self) -> &[u64] {
        &self.trial_ids
    }

    /// Lag-valid observations: `trials * (n - 1)`.
    pub fn n_effective(&self) -> usize {
        self.trials() * self.n.saturating_sub(1)
    }

    /// Entry at trial `r`, 0-based bin `t`, series `i`.
    #[inline]
    pub fn get(&self, r: usize, t: usize, i: usize) -> u8 {
        self.data[(r * self.n + t) * self.d + i]
    }

    #[inline]
    pub fn set(&mut self, r: usize, t: usize, i: usize, v: bool) {
        self.data[(r * self.n + t) * self.d + i] = v as u8;
    }

    /// The `d` values of trial `r` at 0-based bin `t`.
    #[inline]
    pub fn row(&self, r: usize, t: usize) -> &[u8] {
        let start = (r * self.n + t) * self.d;
        &self.data[start..start + self.d]
    }

    /// Row-major `n x d` block of trial `r`.
    pub fn trial(&self, r: usize) -> &[u8] {
        let len = self.n * self.d;
        &self.data[r * len..(r + 1) * len]
    }

    pub fn total_spikes(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn trial_spikes(&self, r: usize) -> u64 {
        self.trial(r).iter().map(|&v| v as u64).sum()
    }

    pub fn neuron_spikes(&self, i: usize) -> u64 {
        self.data.iter().skip(i).step_by(self.d.max(1)).map(|&v| v as u64).sum()
    }

    /// Fraction of ones in series `i` over all trials and bins.
    pub fn spike_fraction(&self, i: usize) -> f64 {
        self.neuron_spikes(i) as f64 / (self.trials() * self.n) as f64
    }

    /// Replaces the trial identifiers.
    pub fn with_trial_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.trials() {
            return Err(Error::Dimension(format!("{} trial ids for {} trials", ids.len(), self.trials())));
        }
        self.trial_ids = ids;
        Ok(self)
    }

    /// Keeps the listed trials, in the given order.
    pub fn select_trials(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(keep.len() * self.n * self.d);
        for &r in keep {
            data.extend_from_slice(self.trial(r));
        }
        Self {
            n: self.n,
            d: self.d,
            data,
            neuron_ids: self.neuron_ids.clone(),
            trial_ids: keep.iter().map(|&r| self.trial_ids[r]).collect(),
            bin_width_ms: self.bin_width_ms,
        }
    }

    /// Keeps the listed series, in the given order.
    pub fn select_neurons(&self, keep: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.trials() * self.n * keep.len());
        for r in 0..self.trials() {
            for t in 0..self.n {
                let row = self.row(r, t);
                data.extend(keep.iter().map(|&i| row[i]));
            }
        }
        Self {
            n: self.n,
            d: keep.len(),
            data,
            neuron_ids: keep.iter().map(|&i| self.neuron_ids[i].clone()).collect(),
            trial_ids: self.trial_ids.clone(),
            bin_width_ms: self.bin_width_ms,
        }
    }

    /// Per-bin trial-averaged firing rate in Hz, `d` rows of `n` values.
    pub fn psth(&self) -> Vec<Vec<f64>> {
        let scale = 1000.0 / (self.bin_width_ms * self.trials().max(1) as f64);
        (0..self.d)
            .map(|i| {
                (0..self.n)
                    .map(|t| {
                        let count: u64 = (0..self.trials()).map(|r| self.get(r, t, i) as u64).sum();
                        count as f64 * scale
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SpikePanel {
        SpikePanel::from_trials(
            vec![vec![1, 0, 0, 1, 1, 1], vec![0, 0, 0, 0, 1, 0]],
            3,
            SpikePanel::default_ids(2),
            vec![10, 11],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn indexing_and_counts() {
        let p = small();
        assert_eq!(p.get(0, 1, 1), 1);
        assert_eq!(p.row(1, 2), &[1, 0]);
        assert_eq!(p.trial_spikes(0), 4);
        assert_eq!(p.neuron_spikes(0), 3);
        assert_eq!(p.neuron_spikes(1), 2);
        assert_eq!(p.n_effective(), 4);
    }

    #[test]
    fn non_binary_rejected() {
        let r = SpikePanel::from_trials(vec![vec![2]], 1, SpikePanel::default_ids(1), vec![0], 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn selection_keeps_labels() {
        let p = small();
        let q = p.select_trials(&[1]).select_neurons(&[1]);
        assert_eq!(q.trial_ids(), &[11]);
        assert_eq!(q.neuron_ids(), &["neuron_2".to_string()]);
        assert_eq!(q.trial(0), &[0, 0, 0]);
    }

    #[test]
    fn psth_is_trial_average_in_hz() {
        let p = small();
        let psth = p.psth();
        assert_eq!(psth[0], vec![500.0, 0.0, 1000.0]);
    }
}
