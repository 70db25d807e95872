//! Weighted directed graphs.
//!
//! An arc `(i, j)` means "`i` is influenced by `j`": opinions flow against
//! arc direction, and a free vertex takes the weighted average of its
//! out-neighbours. Undirected graphs store both arcs with equal weights.

mod generate;
mod io;

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate, random_connected, Embedded, GraphFamily, Layout};
pub use io::{read_edge_list, write_edge_list, GraphRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct Graph {
    directed: bool,
    out: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
}

impl Graph {
    /// Builds a graph from arcs. For undirected graphs each edge is listed
    /// once (in either orientation) and both arcs are stored.
    pub fn from_arcs<I>(n: usize, directed: bool, arcs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut out = vec![Vec::new(); n];
        for (src, dst, w) in arcs {
            if src >= n || dst >= n {
                return Err(Error::InvalidGraph(format!(
                    "arc ({src}, {dst}) out of range for {n} vertices"
                )));
            }
            if src == dst {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {src}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "arc ({src}, {dst}) has weight {w}; weights must be positive and finite"
                )));
            }
            out[src].push((dst, w));
            if !directed {
                out[dst].push((src, w));
            }
        }
        for (i, row) in out.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidGraph(format!("duplicate arc out of vertex {i}")));
            }
        }
        let degree: Vec<f64> = out.iter().map(|r| r.iter().map(|&(_, w)| w).sum()).collect();
        if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
            return Err(Error::InvalidGraph(format!("vertex {i} has zero out-degree")));
        }
        Ok(Self { directed, out, degree })
    }

    pub fn n(&self) -> usize {
        self.out.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn out_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }

    pub fn out_degree(&self, i: usize) -> f64 {
        self.degree[i]
    }

    pub fn max_degree(&self) -> f64 {
        self.degree.iter().copied().fold(0.0, f64::max)
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let row = &self.out[i];
        row.binary_search_by_key(&j, |&(t, _)| t).ok().map(|k| row[k].1)
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.weight(i, j).is_some()
    }

    /// All stored arcs `(src, dst, weight)`.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, w)| (i, j, w)))
    }

    /// Arcs for directed graphs; one `(i, j)` with `i < j` per edge otherwise.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let directed = self.directed;
        self.arcs().filter(move |&(i, j, _)| directed || i < j)
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// Dense out-degree Laplacian `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = DMatrix::zeros(n, n);
        for (i, j, w) in self.arcs() {
            l[(i, j)] -= w;
        }
        for i in 0..n {
            l[(i, i)] = self.degree[i];
        }
        l
    }

    pub fn laplacian_frobenius_norm(&self) -> f64 {
        let off: f64 = self.arcs().map(|(_, _, w)| w * w).sum();
        let diag: f64 = self.degree.iter().map(|d| d * d).sum();
        (off + diag).sqrt()
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n();
        let forward = self.reachable_from(0, false);
        if forward.iter().filter(|&&r| r).count() != n {
            return false;
        }
        if !self.directed {
            return true;
        }
        self.reachable_from(0, true).iter().all(|&r| r)
    }

    fn reachable_from(&self, start: usize, reverse: bool) -> Vec<bool> {
        let n = self.n();
        let adj: Vec<Vec<usize>> = if reverse {
            let mut rev = vec![Vec::new(); n];
            for (i, j, _) in self.arcs() {
                rev[j].push(i);
            }
            rev
        } else {
            self.out.iter().map(|r| r.iter().map(|&(j, _)| j).collect()).collect()
        };
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen
    }

    pub fn ensure_strongly_connected(&self) -> Result<()> {
        if self.is_strongly_connected() {
            Ok(())
        } else {
            Err(Error::NotStronglyConnected)
        }
    }

    /// Hop distance from the nearest source, following arcs in either
    /// direction. `None` for unreachable vertices.
    pub fn hop_distances(&self, sources: &[usize]) -> Vec<Option<usize>> {
        let n = self.n();
        let mut nbrs = vec![Vec::new(); n];
        for (i, j, _) in self.arcs() {
            nbrs[i].push(j);
            nbrs[j].push(i);
        }
        let mut dist = vec![None; n];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap_or(0);
            for &j in &nbrs[i] {
                if dist[j].is_none() {
                    dist[j] = Some(d + 1);
                    queue.push_back(j);
                }
            }
        }
        dist
    }

    /// Relabels vertices: vertex `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        let arcs: Vec<_> = self.edges().map(|(i, j, w)| (perm[i], perm[j], w)).collect();
        Self::from_arcs(self.n(), self.directed, arcs)
    }

    /// True when `(i, j)` is an arc iff `(perm[i], perm[j])` is, with equal weight.
    pub fn is_automorphism(&self, perm: &[usize]) -> bool {
        if check_permutation(perm, self.n()).is_err() {
            return false;
        }
        self.arcs().all(|(i, j, w)| self.weight(perm[i], perm[j]) == Some(w))
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::InvalidParams(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParams("not a permutation".into()));
        }
    }
    Ok(())
}

/// Sorted, deduplicated vertex ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    pub fn new(mut ids: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&v| v >= n) {
            return Err(Error::InvalidParams(format!(
                "vertex {bad} out of range for {n} vertices"
            )));
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(Self(ids))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn singleton(v: usize) -> Self {
        Self(vec![v])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn with(&self, v: usize) -> Self {
        let mut ids = self.0.clone();
        if let Err(pos) = ids.binary_search(&v) {
            ids.insert(pos, v);
        }
        Self(ids)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut ids: Vec<usize> = self.0.iter().chain(&other.0).copied().collect();
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.0.iter().all(|&v| !other.contains(v))
    }
}

impl FromIterator<usize> for VertexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut ids: Vec<usize> = iter.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }
}
