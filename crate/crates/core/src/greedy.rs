//! The targeting set function `F_m`, the greedy algorithm, an exhaustive
//! optimizer, and a monotonicity/submodularity harness.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::linalg::SolverOptions;
use crate::opinion::{grouped_unchecked, ScalarOpinion, ZealotConfig};
use crate::TIE_TOL;

/// Authority `m` may convert `budget` non-zealots given the zealots `Z`.
#[derive(Debug, Clone)]
pub struct TargetingProblem<'g> {
    graph: &'g Graph,
    zealots: ZealotConfig,
    m: usize,
    budget: usize,
    solver: SolverOptions,
}

impl<'g> TargetingProblem<'g> {
    pub fn new(graph: &'g Graph, zealots: ZealotConfig, m: usize, budget: usize) -> Result<Self> {
        if zealots.n() != graph.n() {
            return Err(Error::InvalidZealots("zealot config does not match the graph".into()));
        }
        if m >= zealots.k() {
            return Err(Error::InvalidParams(format!("authority {m} out of range")));
        }
        graph.ensure_strongly_connected()?;
        if zealots.opposing(m).is_empty() {
            // v would be identically 1 for every T; treated as ill-posed
            return Err(Error::InvalidZealots(format!("opinion {m} has no opposing zealots")));
        }
        let available = zealots.free().len();
        if budget > available {
            return Err(Error::Budget { budget, available });
        }
        Ok(Self { graph, zealots, m, budget, solver: SolverOptions::default() })
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn zealots(&self) -> &ZealotConfig {
        &self.zealots
    }

    pub fn authority(&self) -> usize {
        self.m
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn solver(&self) -> &SolverOptions {
        &self.solver
    }

    /// Candidate vertices `V \ Z`.
    pub fn free(&self) -> Vec<usize> {
        self.zealots.free()
    }

    pub fn field(&self, targets: &VertexSet) -> Result<ScalarOpinion> {
        if let Some(v) = targets.iter().find(|&v| v >= self.graph.n() || self.zealots.is_zealot(v)) {
            return Err(Error::InvalidParams(format!("target {v} is not a free vertex")));
        }
        grouped_unchecked(self.graph, &self.zealots, self.m, targets, &self.solver)
    }

    /// `F_m(T)`: share of opinion `m` after converting `T`.
    pub fn set_value(&self, targets: &VertexSet) -> Result<f64> {
        Ok(self.field(targets)?.influence())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestId,
    Seeded(u64),
}

pub(crate) struct TiePicker {
    rng: Option<ChaCha8Rng>,
    tol: f64,
}

impl TiePicker {
    pub fn new(tie: TieBreak) -> Self {
        Self::with_tolerance(tie, TIE_TOL)
    }

    pub fn with_tolerance(tie: TieBreak, tol: f64) -> Self {
        let rng = match tie {
            TieBreak::LowestId => None,
            TieBreak::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self { rng, tol }
    }

    /// Best `(vertex, score)`; candidates within the tolerance of the
    /// maximum are tied. `scored` must be sorted by vertex.
    pub fn pick(&mut self, scored: &[(usize, f64)]) -> Option<(usize, f64)> {
        let best = scored.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<(usize, f64)> =
            scored.iter().copied().filter(|&(_, s)| s >= best - self.tol).collect();
        match &mut self.rng {
            None => tied.first().copied(),
            Some(rng) => tied.choose(rng).copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub vertex: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetingSolution {
    pub chosen: VertexSet,
    pub value: f64,
    pub trace: Vec<GreedyStep>,
}

/// Adds, `budget` times, the free vertex of largest marginal gain.
pub fn greedy(p: &TargetingProblem<'_>, tie: TieBreak) -> Result<TargetingSolution> {
    let mut picker = TiePicker::new(tie);
    let mut chosen = VertexSet::empty();
    let mut value = p.set_value(&chosen)?;
    let mut trace = Vec::with_capacity(p.budget());
    let free = p.free();
    for _ in 0..p.budget() {
        let scored: Vec<(usize, f64)> = free
            .par_iter()
            .filter(|&&v| !chosen.contains(v))
            .map(|&v| p.set_value(&chosen.with(v)).map(|s| (v, s)))
            .collect::<Result<_>>()?;
        let (v, s) = picker.pick(&scored).ok_or(Error::NoLegalMoves)?;
        trace.push(GreedyStep { vertex: v, gain: s - value });
        chosen = chosen.with(v);
        value = s;
    }
    Ok(TargetingSolution { chosen, value, trace })
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 2_000_000;

/// Exhaustive maximizer; ties go to the lexicographically smallest set.
pub fn brute_force(p: &TargetingProblem<'_>, cap: u128) -> Result<TargetingSolution> {
    let free = p.free();
    let t = p.budget();
    let count = binomial(free.len(), t);
    if count > cap {
        return Err(Error::CombinatorialCap { count, cap });
    }
    let mut combos: Vec<Vec<usize>> = Vec::with_capacity(count as usize);
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        combos.push(idx.iter().map(|&i| free[i]).collect());
        let Some(pos) = (0..t).rev().find(|&i| idx[i] != i + free.len() - t) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..t {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let values: Vec<f64> = combos
        .par_iter()
        .map(|c| p.set_value(&VertexSet::from_iter(c.iter().copied())))
        .collect::<Result<_>>()?;
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at = values.iter().position(|&v| v >= best - TIE_TOL).unwrap_or(0);
    let chosen = VertexSet::from_iter(combos[at].iter().copied());
    let mut trace = Vec::with_capacity(t);
    let mut partial = VertexSet::empty();
    let mut prev = p.set_value(&partial)?;
    for v in chosen.iter() {
        partial = partial.with(v);
        let cur = p.set_value(&partial)?;
        trace.push(GreedyStep { vertex: v, gain: cur - prev });
        prev = cur;
    }
    Ok(TargetingSolution { chosen, value: values[at], trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Exhaustive,
    Random { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Monotone,
    Submodular,
}

/// A failed inequality; `slack` is how far it fails (positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub set: Vec<usize>,
    pub x: usize,
    pub y: Option<usize>,
    pub slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetFunctionReport {
    pub monotone_checks: usize,
    pub submodular_checks: usize,
    pub violations: Vec<Violation>,
}

impl SetFunctionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const SET_FUNCTION_TOL: f64 = 1e-9;

/// Checks `f(T+x) >= f(T)` and `f(T+x) - f(T) >= f(T+x+y) - f(T+y)` on
/// subsets of `ground`, exhaustively or on random `(T, x, y)` samples.
pub fn check_set_function<F>(ground: &[usize], f: F, sampling: Sampling) -> Result<SetFunctionReport>
where
    F: Fn(&VertexSet) -> Result<f64> + Sync,
{
    let set_of = |mask: u64| -> VertexSet {
        ground.iter().enumerate().filter(|&(b, _)| mask >> b & 1 == 1).map(|(_, &v)| v).collect()
    };
    let mut report = SetFunctionReport::default();
    let record = |report: &mut SetFunctionReport, kind, t: u64, x: usize, y: Option<usize>, slack: f64| {
        if slack > SET_FUNCTION_TOL {
            report.violations.push(Violation {
                kind,
                set: set_of(t).as_slice().to_vec(),
                x: ground[x],
                y: y.map(|y| ground[y]),
                slack,
            });
        }
    };
    match sampling {
        Sampling::Exhaustive => {
            let g = ground.len();
            if g > 20 {
                return Err(Error::InvalidParams(format!(
                    "exhaustive check over {g} elements is too large"
                )));
            }
            let values: Vec<f64> =
                (0..1u64 << g).into_par_iter().map(|mask| f(&set_of(mask))).collect::<Result<_>>()?;
            for t in 0..1u64 << g {
                for x in (0..g).filter(|&x| t >> x & 1 == 0) {
                    let tx = t | 1 << x;
                    report.monotone_checks += 1;
                    record(&mut report, ViolationKind::Monotone, t, x, None, values[t as usize] - values[tx as usize]);
                    for y in (x + 1..g).filter(|&y| t >> y & 1 == 0) {
                        let ty = t | 1 << y;
                        let txy = tx | 1 << y;
                        let lhs = values[tx as usize] - values[t as usize];
                        let rhs = values[txy as usize] - values[ty as usize];
                        report.submodular_checks += 1;
                        record(&mut report, ViolationKind::Submodular, t, x, Some(y), rhs - lhs);
                    }
                }
            }
        }
        Sampling::Random { samples, seed } => {
            let g = ground.len();
            if !(2..=64).contains(&g) {
                return Err(Error::InvalidParams("random sampling needs 2..=64 elements".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..samples {
                let x = rng.random_range(0..g);
                let y = loop {
                    let y = rng.random_range(0..g);
                    if y != x {
                        break y;
                    }
                };
                let t: u64 = (0..g)
                    .filter(|&b| b != x && b != y && rng.random_bool(0.5))
                    .fold(0, |m, b| m | 1 << b);
                let (tx, ty) = (t | 1 << x, t | 1 << y);
                let [ft, ftx, fty, ftxy] = [t, tx, ty, tx | ty].map(|m| f(&set_of(m)));
                let (ft, ftx, fty, ftxy) = (ft?, ftx?, fty?, ftxy?);
                report.monotone_checks += 2;
                record(&mut report, ViolationKind::Monotone, t, x, None, ft - ftx);
                record(&mut report, ViolationKind::Monotone, ty, x, None, fty - ftxy);
                report.submodular_checks += 1;
                record(&mut report, ViolationKind::Submodular, t, x, Some(y), (ftxy - fty) - (ftx - ft));
            }
        }
    }
    Ok(report)
}

/// Runs [`check_set_function`] on `F_m` over the free vertices.
pub fn check_submodular(
    g: &Graph,
    z: &ZealotConfig,
    m: usize,
    sampling: Sampling,
) -> Result<SetFunctionReport> {
    let p = TargetingProblem::new(g, z.clone(), m, 0)?;
    check_set_function(&p.free(), |t| p.set_value(t), sampling)
}
