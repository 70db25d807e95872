//! The ε-relaxed targeting problem.
//!
//! The hard pinning of a target set `T` is replaced by a penalty potential
//! `φ ≥ 0` with unit mass on the free vertices `c = V \ Z`:
//!
//! ```text
//! L v + ε⁻¹ φ ⊙ (v − 1) = 0   on c,   v = 1 on Z_m,   v = 0 on other zealots
//! ```
//!
//! The share `I_m(v_φ)` is concave in `φ`. Its gradient needs one extra
//! transposed solve (the adjoint `w_c`), and the maximizer is found by
//! projected gradient ascent on the simplex.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::error::{Error, Result};
use crate::graph::{check_permutation, Graph, VertexSet};
use crate::greedy::{GreedyStep, TargetingProblem, TargetingSolution, TieBreak, TiePicker};
use crate::linalg::{LinearSystem, SolverOptions};
use crate::opinion::{Interior, ZealotConfig};
use crate::INVARIANT_TOL;

pub const DEFAULT_EPSILON: f64 = 0.15;

/// Potentials within this distance of the largest are tied when picking a
/// vertex; the optimizer resolves `φ` only to about this level.
pub const PHI_TIE_TOL: f64 = 1e-6;

/// `ε ≈ 1 / |L|_F`, the scale at which graph dynamics dominate proximity.
pub fn frobenius_epsilon(g: &Graph) -> f64 {
    1.0 / g.laplacian_frobenius_norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxPotential {
    phi: Vec<f64>,
    epsilon: f64,
}

impl RelaxPotential {
    /// Checks `φ ≥ 0`, `φ = 0` on zealots and `Σ φ = 1`.
    pub fn new(phi: Vec<f64>, epsilon: f64, z: &ZealotConfig) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidPotential(format!("epsilon {epsilon} must be positive")));
        }
        if phi.len() != z.n() {
            return Err(Error::InvalidPotential("potential length differs from graph size".into()));
        }
        if let Some(i) = phi.iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidPotential(format!("φ({i}) = {} is not nonnegative", phi[i])));
        }
        if let Some(i) = (0..phi.len()).find(|&i| phi[i] != 0.0 && z.is_zealot(i)) {
            return Err(Error::InvalidPotential(format!("φ is nonzero on zealot {i}")));
        }
        let mass: f64 = phi.iter().sum();
        if (mass - 1.0).abs() > INVARIANT_TOL {
            return Err(Error::InvalidPotential(format!("φ has mass {mass}, expected 1")));
        }
        Ok(Self { phi, epsilon })
    }

    /// A potential that skips the simplex checks (zero potential, other
    /// masses). Only positivity of `ε` is required.
    pub fn unconstrained(phi: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidPotential(format!("epsilon {epsilon} must be positive")));
        }
        Ok(Self { phi, epsilon })
    }

    /// Uniform mass over the free vertices.
    pub fn uniform(z: &ZealotConfig, epsilon: f64) -> Result<Self> {
        let free = z.free();
        if free.is_empty() {
            return Err(Error::InvalidPotential("no free vertices".into()));
        }
        let mut phi = vec![0.0; z.n()];
        for &i in &free {
            phi[i] = 1.0 / free.len() as f64;
        }
        Self::new(phi, epsilon, z)
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Penalized solve at one potential, with the adjoint and gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedState {
    /// Free vertices `c`, in increasing order; indexes the `_c` vectors.
    pub free: Vec<usize>,
    /// Full vertex function, boundary values included.
    pub v: Vec<f64>,
    pub v_c: Vec<f64>,
    pub w_c: Vec<f64>,
    pub objective: f64,
    pub gradient_c: Vec<f64>,
}

impl RelaxedState {
    /// Gradient scattered to a full-length vector (zero on zealots).
    pub fn gradient_full(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.v.len()];
        for (a, &i) in self.free.iter().enumerate() {
            g[i] = self.gradient_c[a];
        }
        g
    }
}

struct Relaxation<'a> {
    g: &'a Graph,
    interior: Interior,
    /// `-L_cm e`: weight from each free vertex into `Z_m`.
    coupling: Vec<f64>,
    zm_count: usize,
    opts: SolverOptions,
}

impl<'a> Relaxation<'a> {
    fn new(g: &'a Graph, z: &ZealotConfig, m: usize, opts: SolverOptions) -> Result<Self> {
        if z.n() != g.n() {
            return Err(Error::InvalidZealots("zealot config does not match the graph".into()));
        }
        if m >= z.k() {
            return Err(Error::InvalidParams(format!("authority {m} out of range")));
        }
        g.ensure_strongly_connected()?;
        let interior = Interior::new(g.n(), |v| z.is_zealot(v));
        let zm = z.set(m);
        let coupling = interior.coupling(g, |j| if zm.contains(j) { 1.0 } else { 0.0 });
        Ok(Self { g, interior, coupling, zm_count: zm.len(), opts })
    }

    fn free(&self) -> &[usize] {
        &self.interior.free
    }

    fn system(&self, phi_c: &[f64], epsilon: f64) -> Result<LinearSystem> {
        let extra: Vec<f64> = phi_c.iter().map(|p| p / epsilon).collect();
        LinearSystem::new(self.interior.block(self.g, Some(&extra)), self.opts)
    }

    fn evaluate(&self, phi_c: &[f64], epsilon: f64, z_m: &VertexSet) -> Result<RelaxedState> {
        let n = self.g.n() as f64;
        let system = self.system(phi_c, epsilon)?;
        let rhs: Vec<f64> =
            phi_c.iter().zip(&self.coupling).map(|(p, c)| p / epsilon + c).collect();
        let v_c = system.solve(&rhs)?;
        let ones = vec![1.0 / epsilon; v_c.len()];
        let w_c = system.solve_transpose(&ones)?;
        let gradient_c: Vec<f64> =
            v_c.iter().zip(&w_c).map(|(v, w)| (1.0 - v) * w / n).collect();
        let objective = (self.zm_count as f64 + v_c.iter().sum::<f64>()) / n;
        let mut v = vec![0.0; self.g.n()];
        for i in z_m.iter() {
            v[i] = 1.0;
        }
        for (a, &i) in self.free().iter().enumerate() {
            v[i] = v_c[a];
        }
        Ok(RelaxedState { free: self.free().to_vec(), v, v_c, w_c, objective, gradient_c })
    }

    fn restrict(&self, phi: &[f64]) -> Vec<f64> {
        self.free().iter().map(|&i| phi[i]).collect()
    }
}

/// Penalized harmonic solve for a validated potential.
pub fn solve_relaxed(g: &Graph, z: &ZealotConfig, m: usize, pot: &RelaxPotential) -> Result<RelaxedState> {
    RelaxPotential::new(pot.phi.clone(), pot.epsilon, z)?;
    solve_relaxed_unconstrained(g, z, m, pot)
}

/// As [`solve_relaxed`] but accepts any nonnegative potential of any mass.
pub fn solve_relaxed_unconstrained(
    g: &Graph,
    z: &ZealotConfig,
    m: usize,
    pot: &RelaxPotential,
) -> Result<RelaxedState> {
    if pot.phi.len() != g.n() || pot.phi.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidPotential("potential must be nonnegative with one entry per vertex".into()));
    }
    let r = Relaxation::new(g, z, m, SolverOptions::default())?;
    r.evaluate(&r.restrict(&pot.phi), pot.epsilon, z.set(m))
}

/// Interior gradient `(1 − v_c) ⊙ w_c / |V|`.
pub fn gradient(state: &RelaxedState) -> &[f64] {
    &state.gradient_c
}

/// Interior Hessian `−(2 / (ε|V|)) sym(Φ ⊙ (w_c ⊗ (e − v_c)))` with
/// `Φ = (L_cc + ε⁻¹ diag φ_c)⁻¹`. Forms `Φ` explicitly; meant for checks.
pub fn hessian(g: &Graph, z: &ZealotConfig, m: usize, pot: &RelaxPotential) -> Result<DMatrix<f64>> {
    let r = Relaxation::new(g, z, m, SolverOptions::default())?;
    let phi_c = r.restrict(&pot.phi);
    let state = r.evaluate(&phi_c, pot.epsilon, z.set(m))?;
    let inv = r.system(&phi_c, pot.epsilon)?.inverse()?;
    let nc = phi_c.len();
    let scale = -1.0 / (pot.epsilon * g.n() as f64);
    let b = DMatrix::from_fn(nc, nc, |j, k| inv[(j, k)] * state.w_c[j] * (1.0 - state.v_c[k]));
    Ok((&b + b.transpose()) * scale)
}

/// Euclidean projection of `y` onto `{x ≥ 0, Σ x = mass}`.
pub fn project_simplex(y: &[f64], mass: f64) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - mass) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeOptions {
    /// Stop once `|P(φ + ∇) − φ|₂` falls to this level.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Feasible full-length starting potential; uniform when absent.
    pub start: Option<Vec<f64>>,
    pub solver: SolverOptions,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self { tolerance: 1e-7, max_iterations: 5000, start: None, solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maximized {
    pub potential: RelaxPotential,
    pub state: RelaxedState,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub initial_objective: f64,
}

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Projected gradient ascent with Armijo backtracking; trial steps start
/// from the Barzilai-Borwein length.
pub fn maximize(
    g: &Graph,
    z: &ZealotConfig,
    m: usize,
    epsilon: f64,
    opts: &MaximizeOptions,
) -> Result<Maximized> {
    let r = Relaxation::new(g, z, m, opts.solver)?;
    let start = match &opts.start {
        Some(phi) => RelaxPotential::new(phi.clone(), epsilon, z)?,
        None => RelaxPotential::uniform(z, epsilon)?,
    };
    let mut x = r.restrict(&start.phi);
    let mut state = r.evaluate(&x, epsilon, z.set(m))?;
    let initial_objective = state.objective;

    let pg_of = |x: &[f64], grad: &[f64]| -> f64 {
        let y: Vec<f64> = x.iter().zip(grad).map(|(a, b)| a + b).collect();
        let p = project_simplex(&y, 1.0);
        norm2(&p.iter().zip(x).map(|(p, x)| p - x).collect::<Vec<_>>())
    };

    let mut step = 1.0;
    let mut pg = pg_of(&x, &state.gradient_c);
    let mut iterations = 0;
    while pg > opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(Error::NotConverged { iterations, norm: pg });
        }
        iterations += 1;
        let grad = state.gradient_c.clone();
        let mut alpha = step;
        let (next_x, next_state) = loop {
            let y: Vec<f64> = x.iter().zip(&grad).map(|(a, b)| a + alpha * b).collect();
            let cand = project_simplex(&y, 1.0);
            let ascent: f64 = cand.iter().zip(&x).zip(&grad).map(|((c, x), g)| (c - x) * g).sum();
            let cand_state = r.evaluate(&cand, epsilon, z.set(m))?;
            if cand_state.objective >= state.objective + ARMIJO_SLOPE * ascent {
                break (cand, cand_state);
            }
            alpha *= BACKTRACK;
            if alpha < 1e-20 {
                // no further progress is representable
                return Err(Error::NotConverged { iterations, norm: pg });
            }
        };
        let s: Vec<f64> = next_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = next_state.gradient_c.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        step = if sy < 0.0 { (ss / -sy).clamp(1e-8, 1e8) } else { (alpha * 2.0).min(1e8) };
        x = next_x;
        state = next_state;
        pg = pg_of(&x, &state.gradient_c);
    }
    debug!(iterations, pg, objective = state.objective, "relaxation converged");
    let mut phi = vec![0.0; g.n()];
    for (a, &i) in r.free().iter().enumerate() {
        phi[i] = x[a];
    }
    Ok(Maximized {
        potential: RelaxPotential { phi, epsilon },
        state,
        iterations,
        projected_gradient_norm: pg,
        initial_objective,
    })
}

/// Builds `t` targets by repeatedly maximizing the relaxation and
/// converting the vertex of largest `φ`. The reported value is the exact
/// `F_m(T)`.
pub fn relaxed_select(
    p: &TargetingProblem<'_>,
    epsilon: f64,
    opts: &MaximizeOptions,
    tie: TieBreak,
) -> Result<TargetingSolution> {
    let mut picker = TiePicker::with_tolerance(tie, PHI_TIE_TOL);
    let m = p.authority();
    let mut chosen = VertexSet::empty();
    let mut prev = p.set_value(&chosen)?;
    let mut trace = Vec::with_capacity(p.budget());
    for _ in 0..p.budget() {
        let z = p.zealots().with_added(m, &chosen)?;
        let round_opts = MaximizeOptions { start: None, ..opts.clone() };
        let best = maximize(p.graph(), &z, m, epsilon, &round_opts)?;
        let scored: Vec<(usize, f64)> =
            z.free().into_iter().map(|i| (i, best.potential.phi[i])).collect();
        let (v, _) = picker.pick(&scored).ok_or(Error::NoLegalMoves)?;
        chosen = chosen.with(v);
        let value = p.set_value(&chosen)?;
        trace.push(GreedyStep { vertex: v, gain: value - prev });
        prev = value;
    }
    Ok(TargetingSolution { chosen, value: prev, trace })
}

/// Mass of `φ` within `radius` hops of `sources`.
pub fn localization_mass(g: &Graph, phi: &[f64], sources: &[usize], radius: usize) -> f64 {
    g.hop_distances(sources)
        .iter()
        .zip(phi)
        .filter(|(d, _)| d.is_some_and(|d| d <= radius))
        .map(|(_, p)| p)
        .sum()
}

/// `max_i |φ(i) − φ(π(i))|` for any permutation `π`.
pub fn permutation_deviation(perm: &[usize], phi: &[f64]) -> Result<f64> {
    check_permutation(perm, phi.len())?;
    Ok(perm.iter().enumerate().map(|(i, &j)| (phi[i] - phi[j]).abs()).fold(0.0, f64::max))
}

/// `|φ − P_π φ|_∞` after verifying that `π` is a graph automorphism.
pub fn symmetry_check(g: &Graph, perm: &[usize], phi: &[f64]) -> Result<f64> {
    check_permutation(perm, g.n())?;
    if !g.is_automorphism(perm) {
        return Err(Error::NotAutomorphism("edge set is not preserved".into()));
    }
    permutation_deviation(perm, phi)
}
