//! Plain-text graph files.
//!
//! The first non-comment line holds `n m`; each of the next `m` lines holds
//! `i j` or `i j w` with 0-based vertices. `#` starts a comment. Missing
//! weights default to 1.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use slowvary_core::graph::{Edge, Graph, WeightedGraph};

use crate::error::{RunError, RunResult};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, String> {
    tok.ok_or_else(|| format!("line {line}: missing {what}"))?
        .parse()
        .map_err(|_| format!("line {line}: bad {what}"))
}

pub fn parse_graph(text: &str) -> Result<WeightedGraph, String> {
    let mut lines = content_lines(text);
    let (ln, head) = lines.next().ok_or("empty graph file")?;
    let mut toks = head.split_whitespace();
    let n: usize = field(toks.next(), ln, "vertex count")?;
    let m: usize = field(toks.next(), ln, "edge count")?;
    let mut graph = Graph::empty(n);
    let mut weights = BTreeMap::new();
    for _ in 0..m {
        let (ln, l) = lines.next().ok_or("fewer edges than declared")?;
        let mut toks = l.split_whitespace();
        let i: usize = field(toks.next(), ln, "vertex")?;
        let j: usize = field(toks.next(), ln, "vertex")?;
        let w: f64 = match toks.next() {
            Some(t) => field(Some(t), ln, "weight")?,
            None => 1.0,
        };
        if toks.next().is_some() {
            return Err(format!("line {ln}: trailing fields"));
        }
        let edge = Edge::try_new(i, j).map_err(|e| format!("line {ln}: {e}"))?;
        match graph.add_edge(i, j) {
            Ok(true) => {}
            Ok(false) => return Err(format!("line {ln}: duplicate edge {i} {j}")),
            Err(e) => return Err(format!("line {ln}: {e}")),
        }
        weights.insert(edge, w);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(format!("line {ln}: more edges than declared"));
    }
    WeightedGraph::new(graph, weights).map_err(|e| e.to_string())
}

pub fn read_graph(path: &Path) -> RunResult<WeightedGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::read(path, e))?;
    parse_graph(&text).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))
}

/// Inverse of [`parse_graph`]; weights are always written.
pub fn format_graph(g: &WeightedGraph) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", g.n(), g.graph().edge_count()).unwrap();
    for (e, w) in g.weights() {
        writeln!(out, "{} {} {:.16e}", e.lo, e.hi, w).unwrap();
    }
    out
}
