//! Graphviz rendering of an interaction matrix.
//!
//! A nonzero entry `Gamma[i][j]` is drawn as the directed edge `i -> j`.
//! Excitatory edges are solid, inhibitory edges dashed; entries that failed
//! the significance test are grey. Excluded neurons appear as white nodes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::netsim::InteractionMatrix;

use super::{fmt_g9, write_text};

pub fn render_dot(
    gamma: &InteractionMatrix,
    ids: &[String],
    significant: Option<&[Vec<bool>]>,
    excluded_ids: &[String],
) -> Result<String> {
    let d = gamma.d();
    if ids.len() != d {
        return Err(Error::Dimension(format!("{} ids for {d} series", ids.len())));
    }
    if let Some(s) = significant {
        if s.len() != d || s.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("significance matrix does not match the network".into()));
        }
    }
    let mut out = String::from("digraph interactions {\n  node [shape=circle, style=filled, fillcolor=lightblue];\n");
    for id in ids {
        let _ = writeln!(out, "  \"{}\";", escape(id));
    }
    for id in excluded_ids {
        let _ = writeln!(out, "  \"{}\" [fillcolor=white];", escape(id));
    }
    for i in 0..d {
        for j in 0..d {
            let g = gamma.get(i, j);
            if g == 0.0 {
                continue;
            }
            let style = if g > 0.0 { "solid" } else { "dashed" };
            let color = match significant {
                Some(s) if !s[i][j] => "grey",
                _ => "black",
            };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [style={style}, color={color}, weight=\"{}\"];",
                escape(&ids[i]),
                escape(&ids[j]),
                fmt_g9(g)
            );
        }
    }
    out.push_str("}\n");
    Ok(out)
}

pub fn export_dot(
    gamma: &InteractionMatrix,
    ids: &[String],
    significant: Option<&[Vec<bool>]>,
    excluded_ids: &[String],
    path: &Path,
) -> Result<()> {
    write_text(path, &render_dot(gamma, ids, significant, excluded_ids)?)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
