//! Harmonic opinion fields with zealot boundary conditions.
//!
//! Opinions are indexed from 0. A field `u` assigns every vertex a point of
//! the simplex; zealots of opinion `l` are pinned to the `l`-th corner and
//! every other vertex satisfies `(L u)(i) = 0`.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::linalg::{LinearSystem, SolverOptions, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZealotConfig {
    n: usize,
    sets: Vec<VertexSet>,
}

impl ZealotConfig {
    pub fn new(n: usize, sets: Vec<VertexSet>) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::InvalidZealots("need at least two opinions".into()));
        }
        let mut owner = vec![None; n];
        for (l, set) in sets.iter().enumerate() {
            for v in set.iter() {
                if v >= n {
                    return Err(Error::InvalidZealots(format!("vertex {v} out of range")));
                }
                if let Some(other) = owner[v].replace(l) {
                    return Err(Error::InvalidZealots(format!(
                        "vertex {v} is a zealot for opinions {other} and {l}"
                    )));
                }
            }
        }
        if owner.iter().all(Option::is_none) {
            return Err(Error::InvalidZealots("no zealots".into()));
        }
        Ok(Self { n, sets })
    }

    /// Convenience constructor from plain id lists.
    pub fn from_lists(n: usize, lists: &[&[usize]]) -> Result<Self> {
        let sets = lists
            .iter()
            .map(|l| VertexSet::new(l.to_vec(), n))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::InvalidZealots(e.to_string()))?;
        Self::new(n, sets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, l: usize) -> &VertexSet {
        &self.sets[l]
    }

    pub fn sets(&self) -> &[VertexSet] {
        &self.sets
    }

    pub fn opinion_of(&self, v: usize) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(v))
    }

    pub fn is_zealot(&self, v: usize) -> bool {
        self.opinion_of(v).is_some()
    }

    pub fn union(&self) -> VertexSet {
        self.sets.iter().fold(VertexSet::empty(), |acc, s| acc.union(s))
    }

    /// Zealots of every opinion other than `m`.
    pub fn opposing(&self, m: usize) -> VertexSet {
        self.sets
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != m)
            .fold(VertexSet::empty(), |acc, (_, s)| acc.union(s))
    }

    /// Vertices that are not zealots, in increasing order.
    pub fn free(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| !self.is_zealot(v)).collect()
    }

    /// Adds `extra` to opinion `m`'s zealots.
    pub fn with_added(&self, m: usize, extra: &VertexSet) -> Result<Self> {
        let mut sets = self.sets.clone();
        sets[m] = sets[m].union(extra);
        Self::new(self.n, sets)
    }

    fn check_opinion(&self, m: usize) -> Result<()> {
        if m < self.k() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("opinion {m} out of range for k = {}", self.k())))
        }
    }
}

/// `n x k` row-stochastic matrix of opinions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionField {
    k: usize,
    values: Vec<Vec<f64>>,
}

impl OpinionField {
    pub fn from_rows(values: Vec<Vec<f64>>) -> Result<Self> {
        let k = values.first().map_or(0, Vec::len);
        if k < 2 || values.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParams("opinion rows must share a length >= 2".into()));
        }
        Ok(Self { k, values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[m]).collect()
    }

    /// Share of opinion `m`: the mean of `u_m` over all vertices.
    pub fn influence(&self, m: usize) -> f64 {
        influence(&self.column(m))
    }

    /// Largest deviation from the simplex: row-sum error or negative entry.
    pub fn simplex_violation(&self) -> f64 {
        self.values
            .iter()
            .map(|r| {
                let sum_err = (r.iter().sum::<f64>() - 1.0).abs();
                let neg = r.iter().fold(0.0f64, |m, &x| m.max(-x));
                sum_err.max(neg)
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex");
        for l in 1..=self.k {
            let _ = write!(out, ",u_{l}");
        }
        out.push('\n');
        for (i, row) in self.values.iter().enumerate() {
            let _ = write!(out, "{i}");
            for x in row {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Scalar opinion `v = u_m` of the grouped (us-versus-them) problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarOpinion(pub Vec<f64>);

impl ScalarOpinion {
    pub fn influence(&self) -> f64 {
        influence(&self.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Mean of a vertex function, i.e. `|v|_1 / |V|` for nonnegative `v`.
pub fn influence(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Split of the vertices into pinned ones and the free interior `c`.
pub(crate) struct Interior {
    pub free: Vec<usize>,
    pos: Vec<usize>,
}

impl Interior {
    pub fn new(n: usize, pinned: impl Fn(usize) -> bool) -> Self {
        let mut pos = vec![usize::MAX; n];
        let mut free = Vec::new();
        for v in 0..n {
            if !pinned(v) {
                pos[v] = free.len();
                free.push(v);
            }
        }
        Self { free, pos }
    }

    pub fn position(&self, v: usize) -> Option<usize> {
        let p = self.pos[v];
        (p != usize::MAX).then_some(p)
    }

    /// `L_cc + diag(extra)`.
    pub fn block(&self, g: &Graph, extra_diag: Option<&[f64]>) -> SparseMatrix {
        let rows = self
            .free
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                let diag = g.out_degree(i) + extra_diag.map_or(0.0, |d| d[a]);
                let mut row = vec![(a, diag)];
                row.extend(
                    g.out_neighbors(i)
                        .iter()
                        .filter_map(|&(j, w)| self.position(j).map(|b| (b, -w))),
                );
                row
            })
            .collect();
        SparseMatrix::from_rows(rows)
    }

    /// `-L_cb x_b`: weighted sum of pinned out-neighbour values.
    pub fn coupling(&self, g: &Graph, boundary: impl Fn(usize) -> f64) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| {
                g.out_neighbors(i)
                    .iter()
                    .filter(|&&(j, _)| self.position(j).is_none())
                    .map(|&(j, w)| w * boundary(j))
                    .sum()
            })
            .collect()
    }
}

fn check_inputs(g: &Graph, z: &ZealotConfig) -> Result<()> {
    if z.n() != g.n() {
        return Err(Error::InvalidZealots(format!(
            "zealot config is for {} vertices, graph has {}",
            z.n(),
            g.n()
        )));
    }
    g.ensure_strongly_connected()
}

pub fn solve_harmonic(g: &Graph, z: &ZealotConfig) -> Result<OpinionField> {
    solve_harmonic_with(g, z, &SolverOptions::default())
}

pub fn solve_harmonic_with(g: &Graph, z: &ZealotConfig, opts: &SolverOptions) -> Result<OpinionField> {
    check_inputs(g, z)?;
    let owner: Vec<Option<usize>> = (0..g.n()).map(|v| z.opinion_of(v)).collect();
    let interior = Interior::new(g.n(), |v| owner[v].is_some());
    let system = LinearSystem::new(interior.block(g, None), *opts)?;
    let mut values: Vec<Vec<f64>> = owner
        .iter()
        .map(|o| {
            let mut row = vec![0.0; z.k()];
            if let Some(l) = *o {
                row[l] = 1.0;
            }
            row
        })
        .collect();
    for l in 0..z.k() {
        let rhs = interior.coupling(g, |j| if owner[j] == Some(l) { 1.0 } else { 0.0 });
        let x = system.solve(&rhs)?;
        for (a, &i) in interior.free.iter().enumerate() {
            values[i][l] = x[a];
        }
    }
    Ok(OpinionField { k: z.k(), values })
}

/// Scalar field with `v = 1` on `Z_m ∪ extra`, `v = 0` on the opposing
/// zealots and `L v = 0` elsewhere.
pub fn solve_grouped(g: &Graph, z: &ZealotConfig, m: usize, extra: &VertexSet) -> Result<ScalarOpinion> {
    check_inputs(g, z)?;
    z.check_opinion(m)?;
    if let Some(v) = extra.iter().find(|&v| z.is_zealot(v)) {
        return Err(Error::InvalidParams(format!("target vertex {v} is already a zealot")));
    }
    if let Some(v) = extra.max().filter(|&v| v >= g.n()) {
        return Err(Error::InvalidParams(format!("target vertex {v} out of range")));
    }
    grouped_unchecked(g, z, m, extra, &SolverOptions::default())
}

/// Grouped solve without the connectivity and overlap checks.
pub(crate) fn grouped_unchecked(
    g: &Graph,
    z: &ZealotConfig,
    m: usize,
    extra: &VertexSet,
    opts: &SolverOptions,
) -> Result<ScalarOpinion> {
    let n = g.n();
    let mut value = vec![None; n];
    for v in z.set(m).iter().chain(extra.iter()) {
        value[v] = Some(1.0);
    }
    for v in z.opposing(m).iter() {
        value[v] = Some(0.0);
    }
    let interior = Interior::new(n, |v| value[v].is_some());
    let system = LinearSystem::new(interior.block(g, None), *opts)?;
    let rhs = interior.coupling(g, |j| value[j].unwrap_or(0.0));
    let x = system.solve(&rhs)?;
    let mut v: Vec<f64> = value.iter().map(|o| o.unwrap_or(0.0)).collect();
    for (a, &i) in interior.free.iter().enumerate() {
        v[i] = x[a];
    }
    Ok(ScalarOpinion(v))
}

/// `½ Σ_l <u_l, L u_l>` on an undirected graph.
pub fn dirichlet_energy(g: &Graph, u: &OpinionField) -> Result<f64> {
    if g.is_directed() {
        return Err(Error::Directed);
    }
    if u.n() != g.n() {
        return Err(Error::InvalidParams("field and graph sizes differ".into()));
    }
    let mut total = 0.0;
    for l in 0..u.k() {
        let col = u.column(l);
        total += g
            .edges()
            .map(|(i, j, w)| w * (col[i] - col[j]).powi(2))
            .sum::<f64>();
    }
    // each edge appears once in `edges`, so this already equals <u, L u>
    Ok(0.5 * total)
}

/// Explicit Euler integration of `du/dt = -L u` on free vertices.
pub fn simulate_dynamics(
    g: &Graph,
    z: &ZealotConfig,
    u0: &OpinionField,
    dt: f64,
    steps: usize,
) -> Result<OpinionField> {
    check_inputs(g, z)?;
    let limit = 1.0 / g.max_degree();
    if !(dt > 0.0 && dt < limit) {
        return Err(Error::UnstableStep { dt, limit });
    }
    if u0.n() != g.n() || u0.k() != z.k() {
        return Err(Error::InvalidParams("initial field does not match graph/zealots".into()));
    }
    for i in 0..g.n() {
        if let Some(l) = z.opinion_of(i) {
            if u0.row(i).iter().enumerate().any(|(c, &x)| x != if c == l { 1.0 } else { 0.0 }) {
                return Err(Error::InvalidParams(format!(
                    "initial field violates the boundary value at zealot {i}"
                )));
            }
        }
    }
    let free = z.free();
    let mut u = u0.values.clone();
    let mut next = u.clone();
    for _ in 0..steps {
        for &i in &free {
            let d = g.out_degree(i);
            for l in 0..z.k() {
                let avg: f64 = g.out_neighbors(i).iter().map(|&(j, w)| w * u[j][l]).sum();
                next[i][l] = u[i][l] - dt * (d * u[i][l] - avg);
            }
        }
        std::mem::swap(&mut u, &mut next);
    }
    Ok(OpinionField { k: z.k(), values: u })
}

/// Monte-Carlo hitting-probability estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub walks: usize,
}

/// Walks per independently seeded stream; fixes the stream split so the
/// estimate does not depend on the worker count.
const WALKS_PER_STREAM: usize = 1024;
pub const DEFAULT_STEP_CAP: usize = 1_000_000;

/// Estimates `P_i{walk hits Z_m before any other zealot}`, the random-walk
/// form of `u_m(i)`. Walks step from `i` to `j` with probability `a_ij / d_i`.
pub fn mc_hitting_probability(
    g: &Graph,
    z: &ZealotConfig,
    m: usize,
    start: usize,
    walks: usize,
    seed: u64,
) -> Result<HittingEstimate> {
    mc_hitting_probability_capped(g, z, m, start, walks, seed, DEFAULT_STEP_CAP)
}

pub fn mc_hitting_probability_capped(
    g: &Graph,
    z: &ZealotConfig,
    m: usize,
    start: usize,
    walks: usize,
    seed: u64,
    step_cap: usize,
) -> Result<HittingEstimate> {
    check_inputs(g, z)?;
    z.check_opinion(m)?;
    if start >= g.n() || walks == 0 {
        return Err(Error::InvalidParams("need a valid start vertex and walks >= 1".into()));
    }
    if let Some(l) = z.opinion_of(start) {
        let p = if l == m { 1.0 } else { 0.0 };
        return Ok(HittingEstimate { probability: p, std_error: 0.0, walks });
    }
    let owner: Vec<Option<usize>> = (0..g.n()).map(|v| z.opinion_of(v)).collect();
    let cumulative: Vec<Vec<f64>> = (0..g.n())
        .map(|i| {
            let mut acc = 0.0;
            g.out_neighbors(i)
                .iter()
                .map(|&(_, w)| {
                    acc += w;
                    acc
                })
                .collect()
        })
        .collect();
    let streams = walks.div_ceil(WALKS_PER_STREAM);
    let hits: Result<Vec<usize>> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let count = WALKS_PER_STREAM.min(walks - s * WALKS_PER_STREAM);
            let mut hits = 0;
            for _ in 0..count {
                let mut x = start;
                let mut steps = 0;
                let hit = loop {
                    if let Some(l) = owner[x] {
                        break l;
                    }
                    if steps == step_cap {
                        return Err(Error::WalkCap(step_cap));
                    }
                    let cum = &cumulative[x];
                    let r = rng.random::<f64>() * cum[cum.len() - 1];
                    let k = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
                    x = g.out_neighbors(x)[k].0;
                    steps += 1;
                };
                if hit == m {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect();
    let hits: usize = hits?.into_iter().sum();
    let p = hits as f64 / walks as f64;
    Ok(HittingEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / walks as f64).sqrt(),
        walks,
    })
}
