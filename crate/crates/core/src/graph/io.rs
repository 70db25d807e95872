//! Edge-list text format and its JSON mirror.
//!
//! ```text
//! n 3 undirected
//! 0 1
//! 1 2 0.5
//! ```
//!
//! The header gives the vertex count and orientation; each following line is
//! `src dst [weight]` with 0-based ids and weight defaulting to 1. Undirected
//! edges are listed once. Blank lines and `#` comments are ignored.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

pub fn read_edge_list(text: &str) -> Result<Graph> {
    let mut header: Option<(usize, bool)> = None;
    let mut arcs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |message: String| Error::Parse { line: line_no, message };
        match header {
            None => {
                if fields.len() != 3 || fields[0] != "n" {
                    return Err(err("expected header `n <count> directed|undirected`".into()));
                }
                let n = fields[1]
                    .parse::<usize>()
                    .map_err(|e| err(format!("bad vertex count: {e}")))?;
                let directed = match fields[2] {
                    "directed" => true,
                    "undirected" => false,
                    other => return Err(err(format!("unknown orientation `{other}`"))),
                };
                header = Some((n, directed));
            }
            Some((n, _)) => {
                if !(2..=3).contains(&fields.len()) {
                    return Err(err("expected `src dst [weight]`".into()));
                }
                let src = fields[0].parse::<usize>().map_err(|e| err(format!("bad src: {e}")))?;
                let dst = fields[1].parse::<usize>().map_err(|e| err(format!("bad dst: {e}")))?;
                let w = match fields.get(2) {
                    Some(s) => s.parse::<f64>().map_err(|e| err(format!("bad weight: {e}")))?,
                    None => 1.0,
                };
                if src >= n || dst >= n {
                    return Err(err(format!("vertex out of range for n = {n}")));
                }
                if src == dst {
                    return Err(err(format!("self-loop at vertex {src}")));
                }
                arcs.push((src, dst, w));
            }
        }
    }
    let (n, directed) = header.ok_or(Error::Parse { line: 0, message: "missing header".into() })?;
    Graph::from_arcs(n, directed, arcs)
}

pub fn write_edge_list(g: &Graph) -> String {
    let mut out = String::new();
    let kind = if g.is_directed() { "directed" } else { "undirected" };
    let _ = writeln!(out, "n {} {kind}", g.n());
    for (i, j, w) in g.edges() {
        if w == 1.0 {
            let _ = writeln!(out, "{i} {j}");
        } else {
            let _ = writeln!(out, "{i} {j} {w}");
        }
    }
    out
}

/// JSON mirror of the edge-list format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub directed: bool,
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<Graph> for GraphRecord {
    fn from(g: Graph) -> Self {
        Self { n: g.n(), directed: g.is_directed(), edges: g.edges().collect() }
    }
}

impl TryFrom<GraphRecord> for Graph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        Graph::from_arcs(r.n, r.directed, r.edges)
    }
}
