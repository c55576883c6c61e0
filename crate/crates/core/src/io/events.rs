//! Spike events, trial anchors and binning into aligned panels.
//!
//! Times are converted to integer nanoseconds before binning, so bin edges are
//! exact and shifting events and anchors together never changes the result.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SpikePanel;

use super::{natural_cmp, read_text};

/// Spike times of all neurons, sorted by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventList {
    records: Vec<(String, f64)>,
}

impl EventList {
    pub fn new(mut records: Vec<(String, f64)>) -> Result<Self> {
        if let Some((id, t)) = records.iter().find(|(_, t)| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidArgument(format!("spike time {t} of {id} is not a nonnegative number")));
        }
        records.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| natural_cmp(&a.0, &b.0)));
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[(String, f64)] {
        &self.records
    }

    /// Distinct neuron ids in natural order.
    pub fn neuron_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|(id, _)| id.clone()).collect();
        ids.sort_by(|a, b| natural_cmp(a, b));
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("side must be `left` or `right`, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub trial: u64,
    pub time_s: f64,
    pub side: Side,
}

/// Alignment window around each anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialWindow {
    pub anchors: Vec<f64>,
    pub pre_s: f64,
    pub post_s: f64,
    pub bin_width_s: f64,
}

fn to_ns(s: f64) -> i64 {
    (s * 1e9).round() as i64
}

impl TrialWindow {
    pub fn new(anchors: Vec<f64>, pre_s: f64, post_s: f64, bin_width_s: f64) -> Result<Self> {
        let w = Self {
            anchors,
            pre_s,
            post_s,
            bin_width_s,
        };
        w.bins()?;
        Ok(w)
    }

    /// Bins per trial; errors unless the window splits into whole bins.
    pub fn bins(&self) -> Result<usize> {
        if !(self.pre_s >= 0.0 && self.post_s >= 0.0 && self.pre_s + self.post_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "window needs pre, post >= 0 with a positive sum, got {} and {}",
                self.pre_s, self.post_s
            )));
        }
        let width = to_ns(self.bin_width_s);
        if width <= 0 {
            return Err(Error::InvalidArgument(format!("bin width must be positive, got {}", self.bin_width_s)));
        }
        let span = to_ns(self.pre_s) + to_ns(self.post_s);
        if span % width != 0 {
            return Err(Error::InvalidArgument(format!(
                "window of {} s is not a whole number of {} s bins",
                self.pre_s + self.post_s,
                self.bin_width_s
            )));
        }
        if let Some(a) = self.anchors.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("anchor time {a} is not finite")));
        }
        Ok((span / width) as usize)
    }
}

/// Bookkeeping from [`bin_events`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BinStats {
    /// Events outside every trial window.
    pub dropped: usize,
    /// Spikes lost because a bin already held one.
    pub clipped: usize,
}

/// Bins `events` into one trial per anchor. Bin `b` of a trial covers
/// `[anchor - pre + b * width, anchor - pre + (b + 1) * width)`; counts above
/// one are clipped. Neurons are `neuron_ids` if given, otherwise every id in
/// `events` in natural order; events of unknown neurons are dropped.
pub fn bin_events(
    events: &EventList,
    window: &TrialWindow,
    neuron_ids: Option<&[String]>,
) -> Result<(SpikePanel, BinStats)> {
    let n = window.bins()?;
    let ids: Vec<String> = match neuron_ids {
        Some(ids) => ids.to_vec(),
        None => events.neuron_ids(),
    };
    let width = to_ns(window.bin_width_s);
    let pre = to_ns(window.pre_s);
    let span = width * n as i64;
    let index: std::collections::HashMap<&str, usize> =
        ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    let times: Vec<i64> = events.records.iter().map(|(_, t)| to_ns(*t)).collect();
    let mut panel = SpikePanel::zeros(window.anchors.len(), n, ids.clone(), window.bin_width_s * 1e3);
    let mut stats = BinStats::default();
    let mut used = vec![false; times.len()];
    for (r, &anchor) in window.anchors.iter().enumerate() {
        let start = to_ns(anchor) - pre;
        let first = times.partition_point(|&t| t < start);
        for k in first..times.len() {
            let offset = times[k] - start;
            if offset >= span {
                break;
            }
            let Some(&i) = index.get(events.records[k].0.as_str()) else {
                continue;
            };
            used[k] = true;
            let b = (offset / width) as usize;
            if panel.get(r, b, i) == 1 {
                stats.clipped += 1;
            } else {
                panel.set(r, b, i, true);
            }
        }
    }
    stats.dropped = used.iter().filter(|u| !**u).count();
    Ok((panel, stats))
}

/// Reads `neuron_id,spike_time_s`.
pub fn read_event_csv(path: &Path) -> Result<EventList> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("neuron_id,spike_time_s") {
        return Err(Error::parse(path, 1, "expected header `neuron_id,spike_time_s`"));
    }
    let mut records = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k as u64 + 2;
        if line.trim().is_empty() {
            continue;
        }
        let (id, t) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, lineno, "expected two fields"))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("not a time: {t:?}")))?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::parse(path, lineno, format!("spike time must be >= 0, got {t}")));
        }
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::parse(path, lineno, "empty neuron id"));
        }
        records.push((id.to_string(), t));
    }
    EventList::new(records)
}

/// Reads `trial,anchor_time_s,side`.
pub fn read_anchor_csv(path: &Path) -> Result<Vec<Anchor>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("trial,anchor_time_s,side") {
        return Err(Error::parse(path, 1, "expected header `trial,anchor_time_s,side`"));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k as u64 + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(Error::parse(path, lineno, format!("expected 3 fields, found {}", f.len())));
        }
        let trial = f[0]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("not a trial index: {:?}", f[0])))?;
        let time_s: f64 = f[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("not a time: {:?}", f[1])))?;
        if !time_s.is_finite() {
            return Err(Error::parse(path, lineno, "anchor time must be finite"));
        }
        let side = f[2].parse().map_err(|e: String| Error::parse(path, lineno, e))?;
        out.push(Anchor { trial, time_s, side });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(v: &[(&str, f64)]) -> EventList {
        EventList::new(v.iter().map(|(a, t)| (a.to_string(), *t)).collect()).unwrap()
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_events_give_zero_panel() {
        let w = TrialWindow::new(vec![1.0, 2.0], 0.2, 0.4, 0.001).unwrap();
        let (p, s) = bin_events(&EventList::default(), &w, Some(&ids(&["a", "b"]))).unwrap();
        assert_eq!((p.trials(), p.n(), p.d()), (2, 600, 2));
        assert_eq!(p.total_spikes(), 0);
        assert_eq!(s, BinStats::default());
    }

    #[test]
    fn spike_just_after_anchor_lands_in_first_bin() {
        let w = TrialWindow::new(vec![3.0], 0.0, 0.01, 0.001).unwrap();
        let (p, _) = bin_events(&ev(&[("a", 3.0005)]), &w, None).unwrap();
        assert_eq!(p.get(0, 0, 0), 1);
        assert_eq!(p.total_spikes(), 1);
    }

    #[test]
    fn double_spikes_are_clipped() {
        let w = TrialWindow::new(vec![0.0], 0.0, 0.01, 0.001).unwrap();
        let (p, s) = bin_events(&ev(&[("a", 0.0021), ("a", 0.0029)]), &w, None).unwrap();
        assert_eq!(p.get(0, 2, 0), 1);
        assert_eq!(s.clipped, 1);
    }

    #[test]
    fn half_open_bins_and_dropped_events() {
        let w = TrialWindow::new(vec![1.0], 0.1, 0.1, 0.01).unwrap();
        // window [0.9, 1.1): 1.1 is excluded, 0.9 is bin 0, 1.0 is bin 10
        let (p, s) = bin_events(&ev(&[("a", 0.9), ("a", 1.0), ("a", 1.1), ("a", 5.0)]), &w, None).unwrap();
        assert_eq!(p.get(0, 0, 0), 1);
        assert_eq!(p.get(0, 10, 0), 1);
        assert_eq!(p.total_spikes(), 2);
        assert_eq!(s.dropped, 2);
    }

    #[test]
    fn window_must_hold_whole_bins() {
        assert!(TrialWindow::new(vec![0.0], 0.2, 0.4, 0.001).is_ok());
        assert!(TrialWindow::new(vec![0.0], 0.2, 0.4005, 0.001).is_err());
        assert!(TrialWindow::new(vec![0.0], 0.0, 0.0, 0.001).is_err());
        assert_eq!(TrialWindow::new(vec![], 0.2, 0.4, 0.001).unwrap().bins().unwrap(), 600);
    }

    proptest! {
        #[test]
        fn translation_invariant(
            micros in proptest::collection::vec((0usize..3, 0u32..3_000_000), 0..200),
            shift in 0u32..100_000,
        ) {
            let names = ["a", "b", "c"];
            let base: Vec<(String, f64)> = micros
                .iter()
                .map(|&(k, us)| (names[k].to_string(), us as f64 * 1e-6))
                .collect();
            let off = shift as f64 * 1e-3;
            let moved: Vec<(String, f64)> = base.iter().map(|(a, t)| (a.clone(), t + off)).collect();
            let anchors = vec![0.5, 1.25, 2.0];
            let w0 = TrialWindow::new(anchors.clone(), 0.2, 0.4, 0.001).unwrap();
            let w1 = TrialWindow::new(anchors.iter().map(|a| a + off).collect(), 0.2, 0.4, 0.001).unwrap();
            let all = ids(&names);
            let (p0, s0) = bin_events(&EventList::new(base).unwrap(), &w0, Some(&all)).unwrap();
            let (p1, s1) = bin_events(&EventList::new(moved).unwrap(), &w1, Some(&all)).unwrap();
            prop_assert_eq!(p0, p1);
            prop_assert_eq!(s0, s1);
        }
    }

    #[test]
    fn csv_readers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "neuron_id,spike_time_s\nn2,0.5\nn10,0.25\n").unwrap();
        let e = read_event_csv(&p).unwrap();
        assert_eq!(e.records()[0], ("n10".to_string(), 0.25));
        assert_eq!(e.neuron_ids(), ids(&["n2", "n10"]));
        std::fs::write(&p, "neuron,time\n").unwrap();
        assert!(read_event_csv(&p).unwrap_err().to_string().contains(":1:"));
        std::fs::write(&p, "neuron_id,spike_time_s\nn1,abc\n").unwrap();
        assert!(read_event_csv(&p).unwrap_err().to_string().contains(":2:"));

        let a = dir.path().join("a.csv");
        std::fs::write(&a, "trial,anchor_time_s,side\n0,1.5,left\n1,3.0,right\n").unwrap();
        let anchors = read_anchor_csv(&a).unwrap();
        assert_eq!(anchors[1].side, Side::Right);
        std::fs::write(&a, "trial,anchor_time_s,side\n0,1.5,up\n").unwrap();
        assert!(read_anchor_csv(&a).is_err());
    }
}
