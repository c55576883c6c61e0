//! File formats: spike events, trial anchors, binned panels, labelled
//! matrices and vectors, and DOT network drawings.
//!
//! Every float is written with 9 significant digits in the shortest of fixed
//! or exponent notation, so outputs are stable and diff-able.

mod dot;
mod events;
mod filter;
mod panel_csv;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use dot::{export_dot, render_dot};
pub use events::{
    bin_events, read_anchor_csv, read_event_csv, Anchor, BinStats, EventList, Side, TrialWindow,
};
pub use filter::{filter_neurons, filter_trials};
pub use panel_csv::{read_panel_csv, sidecar_path, write_panel_csv, PanelMeta};

/// Formats like C's `%.9g`.
pub fn fmt_g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{v:.*}", (8 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `m` with a header row of `cols` and a leading `id` column of `rows`.
pub fn write_matrix_csv(path: &Path, rows: &[String], cols: &[String], m: &DMatrix<f64>) -> Result<()> {
    if rows.len() != m.nrows() || cols.len() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{}x{} labels for a {}x{} matrix",
            rows.len(),
            cols.len(),
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = String::from("id");
    for c in cols {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        out.push_str(r);
        for j in 0..m.ncols() {
            out.push(',');
            out.push_str(&fmt_g9(m[(i, j)]));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// Labelled matrix as written by [`write_matrix_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: DMatrix<f64>,
}

pub fn read_matrix_csv(path: &Path) -> Result<LabelledMatrix> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => return Err(Error::parse(path, 1, "empty file")),
    };
    let mut fields = header.split(',');
    if fields.next() != Some("id") {
        return Err(Error::parse(path, 1, "header must start with `id`"));
    }
    let cols: Vec<String> = fields.map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for (k, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = k as u64 + 1;
        let mut f = line.split(',');
        rows.push(f.next().unwrap_or_default().to_string());
        let vals: Vec<&str> = f.collect();
        if vals.len() != cols.len() {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} values, found {}", cols.len(), vals.len()),
            ));
        }
        for v in vals {
            data.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("not a number: {v:?}")))?,
            );
        }
    }
    Ok(LabelledMatrix {
        values: DMatrix::from_row_slice(rows.len(), cols.len(), &data),
        rows,
        cols,
    })
}

/// Two-column `id,<name>` file.
pub fn write_vector_csv(path: &Path, name: &str, ids: &[String], values: &[f64]) -> Result<()> {
    let m = DMatrix::from_column_slice(values.len(), 1, values);
    write_matrix_csv(path, ids, &[name.to_string()], &m)
}

pub fn read_vector_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let m = read_matrix_csv(path)?;
    if m.cols.len() != 1 {
        return Err(Error::parse(path, 1, format!("expected one value column, found {}", m.cols.len())));
    }
    Ok((m.rows, m.values.column(0).iter().copied().collect()))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

/// Splits identifiers into digit and non-digit runs so `n2 < n10`.
pub(crate) fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for k in 1..=bytes.len() {
            if k == bytes.len() || bytes[k].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..k]));
                start = k;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, sa), (db, sb)) in ca.iter().zip(&cb) {
        let ord = if *da && *db {
            let (ta, tb) = (sa.trim_start_matches('0'), sb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            sa.cmp(sb)
        };
        if ord.is_ne() {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}
