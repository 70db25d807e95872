//! Per-vertex score maps: the normalized share `Ĩ` an authority would reach
//! by converting each single vertex, and the normalized relaxed potential
//! `φ̃`. Both are emitted as data (CSV or JSON) with vertex coordinates.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{Graph, Layout, VertexSet};
use crate::greedy::TargetingProblem;
use crate::opinion::ZealotConfig;
use crate::relax::{maximize, permutation_deviation, MaximizeOptions, PHI_TIE_TOL};
use crate::TIE_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Energy,
    Phi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapEntry {
    pub vertex: usize,
    pub x: f64,
    pub y: f64,
    /// Raw score; `None` on zealots.
    pub value: Option<f64>,
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub name: String,
    /// Whether the layout symmetry is a graph automorphism fixing every
    /// zealot set.
    pub automorphism: bool,
    /// `max |φ̃ − P_π φ̃|` over all vertices (zealots count as 0).
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub kind: MapKind,
    /// 0-based opinion index of the authority being scored.
    pub authority: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub entries: Vec<HeatmapEntry>,
    pub argmax: Vec<usize>,
    /// All candidates scored equally; normalized values are set to 0.
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub symmetry: Vec<SymmetryReport>,
}

/// `(x − min) / (max − min)`; all zeros and `true` when `max == min`.
pub fn normalize(values: &[f64]) -> (Vec<f64>, bool) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return (vec![0.0; values.len()], true);
    }
    (values.iter().map(|v| (v - lo) / (hi - lo)).collect(), false)
}

fn build(
    kind: MapKind,
    authority: usize,
    layout: &Layout,
    scored: &[(usize, f64)],
    tie_tol: f64,
) -> Heatmap {
    let raw: Vec<f64> = scored.iter().map(|&(_, s)| s).collect();
    let (norm, degenerate) = normalize(&raw);
    let best = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let argmax = scored.iter().filter(|&&(_, s)| s >= best - tie_tol).map(|&(v, _)| v).collect();
    let mut entries: Vec<HeatmapEntry> = layout
        .positions
        .iter()
        .enumerate()
        .map(|(vertex, p)| HeatmapEntry { vertex, x: p[0], y: p[1], value: None, normalized: None })
        .collect();
    for (&(v, s), &nv) in scored.iter().zip(&norm) {
        entries[v].value = Some(s);
        entries[v].normalized = Some(nv);
    }
    Heatmap { kind, authority, epsilon: None, entries, argmax, degenerate, symmetry: Vec::new() }
}

/// `I_m` after converting each free vertex alone, normalized over the
/// candidates.
pub fn energy_map(g: &Graph, layout: &Layout, z: &ZealotConfig, m: usize) -> Result<Heatmap> {
    let p = TargetingProblem::new(g, z.clone(), m, 0)?;
    let scored: Vec<(usize, f64)> = p
        .free()
        .par_iter()
        .map(|&v| p.set_value(&VertexSet::singleton(v)).map(|s| (v, s)))
        .collect::<Result<_>>()?;
    Ok(build(MapKind::Energy, m, layout, &scored, TIE_TOL))
}

/// Maximizer of the relaxation, normalized over the free vertices, with
/// symmetry deviations for every square symmetry of the layout.
pub fn phi_map(
    g: &Graph,
    layout: &Layout,
    z: &ZealotConfig,
    m: usize,
    epsilon: f64,
    opts: &MaximizeOptions,
) -> Result<Heatmap> {
    let best = maximize(g, z, m, epsilon, opts)?;
    let phi = best.potential.phi();
    let scored: Vec<(usize, f64)> = z.free().into_iter().map(|v| (v, phi[v])).collect();
    let mut map = build(MapKind::Phi, m, layout, &scored, PHI_TIE_TOL);
    map.epsilon = Some(epsilon);
    let dense: Vec<f64> = map.entries.iter().map(|e| e.normalized.unwrap_or(0.0)).collect();
    map.symmetry = layout
        .square_symmetries()
        .into_iter()
        .map(|(name, perm)| {
            let fixes_zealots = z
                .sets()
                .iter()
                .all(|s| s.iter().all(|v| s.contains(perm[v])));
            SymmetryReport {
                name: name.to_string(),
                automorphism: fixes_zealots && g.is_automorphism(&perm),
                deviation: permutation_deviation(&perm, &dense).unwrap_or(f64::INFINITY),
            }
        })
        .collect();
    Ok(map)
}

impl Heatmap {
    pub fn symmetry(&self, name: &str) -> Option<&SymmetryReport> {
        self.symmetry.iter().find(|s| s.name == name)
    }

    pub fn normalized(&self, v: usize) -> Option<f64> {
        self.entries.get(v).and_then(|e| e.normalized)
    }

    /// CSV with `# key: value` header lines.
    pub fn to_csv(&self, header: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "# degenerate: {}", self.degenerate);
        let argmax: Vec<String> = self.argmax.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "# argmax: {}", argmax.join(" "));
        for s in &self.symmetry {
            let _ = writeln!(out, "# symmetry {}: automorphism={} deviation={:e}", s.name, s.automorphism, s.deviation);
        }
        out.push_str("vertex,x,y,value,normalized\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{},{}", e.vertex, e.x, e.y, opt(e.value), opt(e.normalized));
        }
        out
    }

    pub fn to_json(&self, header: &[(String, String)]) -> serde_json::Value {
        let header: serde_json::Map<String, serde_json::Value> =
            header.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
        serde_json::json!({ "header": header, "map": self })
    }
}
