//! Panel CSV: `trial,t,<neuron ids>` with one row per trial and bin, plus a
//! JSON sidecar describing binning and any filters applied.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SpikePanel;

use super::{read_text, write_json, write_text};

/// Sidecar contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelMeta {
    pub bin_width_ms: f64,
    pub bins_per_trial: usize,
    pub trials: usize,
    pub neurons: usize,
    /// Alignment times of the trials, in seconds, when known.
    #[serde(default)]
    pub anchors: Option<Vec<f64>>,
    /// Human-readable description of each filter, in application order.
    #[serde(default)]
    pub filters: Vec<String>,
    /// Neurons removed by filtering.
    #[serde(default)]
    pub excluded_neurons: Vec<String>,
}

impl PanelMeta {
    pub fn for_panel(panel: &SpikePanel) -> Self {
        Self {
            bin_width_ms: panel.bin_width_ms,
            bins_per_trial: panel.n(),
            trials: panel.trials(),
            neurons: panel.d(),
            anchors: None,
            filters: Vec::new(),
            excluded_neurons: Vec::new(),
        }
    }
}

/// `dir/name.csv` -> `dir/name.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Writes the panel and its sidecar; `meta` defaults to [`PanelMeta::for_panel`].
pub fn write_panel_csv(panel: &SpikePanel, path: &Path, meta: Option<&PanelMeta>) -> Result<()> {
    let mut out = String::with_capacity(panel.trials() * panel.n() * (2 * panel.d() + 8) + 64);
    out.push_str("trial,t");
    for id in panel.neuron_ids() {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for r in 0..panel.trials() {
        let trial = panel.trial_ids()[r].to_string();
        for t in 0..panel.n() {
            out.push_str(&trial);
            out.push(',');
            out.push_str(&(t + 1).to_string());
            for &v in panel.row(r, t) {
                out.push(',');
                out.push(if v == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
    }
    write_text(path, &out)?;
    let default = PanelMeta::for_panel(panel);
    write_json(&sidecar_path(path), meta.unwrap_or(&default))
}

/// Reads a panel written by [`write_panel_csv`]. The sidecar is optional;
/// without it the bin width is 1 ms.
pub fn read_panel_csv(path: &Path) -> Result<SpikePanel> {
    let meta_path = sidecar_path(path);
    let meta: Option<PanelMeta> = if meta_path.exists() {
        let text = read_text(&meta_path)?;
        Some(serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.line() as u64, e.to_string()))?)
    } else {
        None
    };
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("trial") || cols.next() != Some("t") {
        return Err(Error::parse(path, 1, "header must start with `trial,t`"));
    }
    let ids: Vec<String> = cols.map(str::to_string).collect();
    if ids.iter().any(String::is_empty) {
        return Err(Error::parse(path, 1, "empty neuron id in header"));
    }
    let d = ids.len();
    let mut blocks: Vec<Vec<u8>> = Vec::new();
    let mut trial_ids: Vec<u64> = Vec::new();
    let mut n: Option<usize> = meta.as_ref().map(|m| m.bins_per_trial);
    let mut current: Vec<u8> = Vec::new();
    let mut expect_t = 1usize;
    for (k, line) in lines.enumerate() {
        let lineno = k as u64 + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != d + 2 {
            return Err(Error::parse(path, lineno, format!("expected {} fields, found {}", d + 2, f.len())));
        }
        let trial: u64 = f[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("not a trial id: {:?}", f[0])))?;
        let t: usize = f[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("not a bin index: {:?}", f[1])))?;
        if t == 1 {
            if expect_t > 1 {
                finish_trial(path, lineno, &mut n, expect_t - 1, &mut current, &mut blocks)?;
            }
            trial_ids.push(trial);
        } else if t != expect_t || trial_ids.last() != Some(&trial) {
            return Err(Error::parse(path, lineno, format!("expected bin {expect_t} of trial {trial}, found {t}")));
        }
        for v in &f[2..] {
            match *v {
                "0" => current.push(0),
                "1" => current.push(1),
                other => return Err(Error::parse(path, lineno, format!("entries must be 0 or 1, found {other:?}"))),
            }
        }
        expect_t = t + 1;
    }
    if expect_t > 1 {
        let end = text.lines().count() as u64;
        finish_trial(path, end, &mut n, expect_t - 1, &mut current, &mut blocks)?;
    }
    let n = n.unwrap_or(0);
    let bin_width_ms = meta.as_ref().map_or(1.0, |m| m.bin_width_ms);
    SpikePanel::from_trials(blocks, n, ids, trial_ids, bin_width_ms)
}

fn finish_trial(
    path: &Path,
    lineno: u64,
    n: &mut Option<usize>,
    bins: usize,
    current: &mut Vec<u8>,
    blocks: &mut Vec<Vec<u8>>,
) -> Result<()> {
    match *n {
        Some(expected) if expected != bins => {
            return Err(Error::parse(path, lineno, format!("trial has {bins} bins, expected {expected}")));
        }
        _ => *n = Some(bins),
    }
    blocks.push(std::mem::take(current));
    Ok(())
}
