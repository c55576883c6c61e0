//! Trial and neuron selection for recorded panels.

use crate::error::{Error, Result};
use crate::panel::SpikePanel;

/// Keeps the `l` trials with the most spikes after removing silent trials.
/// Ties go to the earlier trial; kept trials stay in their original order.
/// Returns the panel and the original indices of the kept trials.
pub fn filter_trials(panel: &SpikePanel, l: usize) -> Result<(SpikePanel, Vec<usize>)> {
    if l == 0 {
        return Err(Error::Filter("trial count must be positive".into()));
    }
    let mut active: Vec<(usize, u64)> = (0..panel.trials())
        .map(|r| (r, panel.trial_spikes(r)))
        .filter(|&(_, s)| s > 0)
        .collect();
    if active.len() < l {
        return Err(Error::Filter(format!(
            "{l} trials requested but only {} of {} contain spikes ({} short)",
            active.len(),
            panel.trials(),
            l - active.len()
        )));
    }
    active.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut keep: Vec<usize> = active[..l].iter().map(|&(r, _)| r).collect();
    keep.sort_unstable();
    Ok((panel.select_trials(&keep), keep))
}

/// Keeps neurons averaging at least `min_mean_spikes` spikes per trial.
/// Returns the panel and the ids of the excluded neurons.
pub fn filter_neurons(panel: &SpikePanel, min_mean_spikes: f64) -> Result<(SpikePanel, Vec<String>)> {
    if panel.trials() == 0 || panel.d() == 0 {
        return Err(Error::Filter("panel has no trials or no neurons".into()));
    }
    let trials = panel.trials() as f64;
    let (keep, drop): (Vec<usize>, Vec<usize>) =
        (0..panel.d()).partition(|&i| panel.neuron_spikes(i) as f64 / trials >= min_mean_spikes);
    if keep.is_empty() {
        return Err(Error::Filter(format!(
            "no neuron reaches {min_mean_spikes} spikes per trial on average"
        )));
    }
    let excluded = drop.iter().map(|&i| panel.neuron_ids()[i].clone()).collect();
    Ok((panel.select_neurons(&keep), excluded))
}
