//! Named property checks over seeded random instances. Used by the `props`
//! command as a quick self-test of the whole pipeline.

use nalgebra::SymmetricEigen;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{generate, random_connected, Graph, GraphFamily, VertexSet};
use crate::greedy::{brute_force, check_submodular, greedy, Sampling, TargetingProblem, TieBreak};
use crate::opinion::{dirichlet_energy, solve_grouped, solve_harmonic, OpinionField, ZealotConfig};
use crate::relax::{hessian, maximize, solve_relaxed_unconstrained, symmetry_check, MaximizeOptions, RelaxPotential};

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// Scales the analytic gradient by 1.01 before it is compared.
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed statistic for the property.
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub seed: u64,
    pub mutation: Mutation,
    pub results: Vec<PropertyResult>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

/// Random graph and zealot assignment with `free` non-zealot vertices and
/// `k` opinions, each owning at least one vertex.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize, free: usize) -> Result<(Graph, ZealotConfig)> {
    let directed = rng.random_bool(0.5);
    let g = random_connected(n, directed, rng.random_range(0.1..0.5), rng.random())?;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let pinned = &ids[..n - free];
    let mut sets = vec![VertexSet::empty(); k];
    for (a, &v) in pinned.iter().enumerate() {
        let l = if a < k { a } else { rng.random_range(0..k) };
        sets[l] = sets[l].with(v);
    }
    Ok((g, ZealotConfig::new(n, sets)?))
}

fn result(name: &str, passed: bool, worst: f64, detail: String) -> PropertyResult {
    PropertyResult { name: name.into(), passed, worst, detail }
}

/// Interior gradient by central differences of the relaxed objective.
pub fn finite_difference_gradient(
    g: &Graph,
    z: &ZealotConfig,
    m: usize,
    pot: &RelaxPotential,
    h: f64,
) -> Result<Vec<f64>> {
    let free = z.free();
    let mut out = Vec::with_capacity(free.len());
    for &i in &free {
        let mut phi = pot.phi().to_vec();
        phi[i] = pot.phi()[i] + h;
        let up = solve_relaxed_unconstrained(g, z, m, &RelaxPotential::unconstrained(phi.clone(), pot.epsilon())?)?;
        phi[i] = pot.phi()[i] - h;
        let down = solve_relaxed_unconstrained(g, z, m, &RelaxPotential::unconstrained(phi, pot.epsilon())?)?;
        out.push((up.objective - down.objective) / (2.0 * h));
    }
    Ok(out)
}

fn random_potential(rng: &mut ChaCha8Rng, z: &ZealotConfig, eps: f64) -> Result<RelaxPotential> {
    let mut phi = vec![0.0; z.n()];
    for i in z.free() {
        phi[i] = rng.random_range(0.1..1.0);
    }
    let mass: f64 = phi.iter().sum();
    phi.iter_mut().for_each(|p| *p /= mass);
    RelaxPotential::new(phi, eps, z)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn simplex(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (g, z) = random_instance(rng, 12, 3, 8)?;
        worst = worst.max(solve_harmonic(&g, &z)?.simplex_violation());
    }
    Ok(result("harmonic_simplex", worst <= 1e-9, worst, "10 random graphs, k = 3".into()))
}

fn reduction(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (g, z) = random_instance(rng, 12, 3, 8)?;
        let full = solve_harmonic(&g, &z)?;
        for m in 0..3 {
            let v = solve_grouped(&g, &z, m, &VertexSet::empty())?;
            worst = worst.max(max_abs_diff(&full.column(m), v.values()));
        }
    }
    Ok(result("grouped_reduction", worst <= 1e-9, worst, "grouped solve equals full column".into()))
}

fn energy(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let mut worst = f64::INFINITY;
    for _ in 0..5 {
        let g = random_connected(10, false, 0.3, rng.random())?;
        let z = ZealotConfig::from_lists(10, &[&[0], &[1]])?;
        let u = solve_harmonic(&g, &z)?;
        let base = dirichlet_energy(&g, &u)?;
        let i = rng.random_range(2..10);
        for d in [-0.05, 0.05] {
            let mut rows = u.rows().to_vec();
            rows[i][0] += d;
            rows[i][1] -= d;
            let bumped = dirichlet_energy(&g, &OpinionField::from_rows(rows)?)?;
            worst = worst.min(bumped - base);
        }
    }
    Ok(result("energy_minimality", worst > 0.0, worst, "interior perturbations raise the energy".into()))
}

fn submodular(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let mut violations = 0;
    let mut endpoint: f64 = 0.0;
    for _ in 0..4 {
        let (g, z) = random_instance(rng, 9, 2, 6)?;
        let report = check_submodular(&g, &z, 0, Sampling::Exhaustive)?;
        violations += report.violations.len();
        let free = VertexSet::from_iter(z.free());
        let p = TargetingProblem::new(&g, z.clone(), 0, 0)?;
        let full = (free.len() + z.set(0).len()) as f64 / g.n() as f64;
        endpoint = endpoint.max((p.set_value(&free)? - full).abs());
        endpoint = endpoint.max((p.set_value(&VertexSet::empty())? - solve_harmonic(&g, &z)?.influence(0)).abs());
    }
    let passed = violations == 0 && endpoint <= 1e-9;
    Ok(result(
        "monotone_submodular",
        passed,
        endpoint,
        format!("{violations} violations; endpoint error {endpoint:e}"),
    ))
}

fn greedy_bound(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let bound = 1.0 - (-1.0f64).exp();
    let mut worst = f64::INFINITY;
    let mut optimal = 0;
    for a in 0..10 {
        let (g, z) = random_instance(rng, 10, 2, 7)?;
        let p = TargetingProblem::new(&g, z, 0, 1 + a % 3)?;
        let opt = brute_force(&p, u128::MAX)?.value;
        let got = greedy(&p, TieBreak::LowestId)?.value;
        worst = worst.min(got - bound * opt);
        if got >= opt - 1e-12 {
            optimal += 1;
        }
    }
    Ok(result(
        "greedy_guarantee",
        worst >= -1e-9,
        worst,
        format!("greedy optimal on {optimal}/10"),
    ))
}

fn gradient(rng: &mut ChaCha8Rng, mutation: Mutation) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (g, z) = random_instance(rng, 10, 2, 7)?;
        let eps = 10f64.powf(rng.random_range(-1.3..0.0));
        let pot = random_potential(rng, &z, eps)?;
        let state = solve_relaxed_unconstrained(&g, &z, 0, &pot)?;
        let mut analytic = state.gradient_c.clone();
        if mutation == Mutation::Gradient {
            analytic.iter_mut().for_each(|x| *x *= 1.01);
        }
        let fd = finite_difference_gradient(&g, &z, 0, &pot, 1e-6)?;
        worst = worst.max(max_abs_diff(&analytic, &fd) / inf_norm(&fd).max(1e-300));
    }
    Ok(result("gradient_finite_difference", worst <= 1e-5, worst, "relative error, 5 instances".into()))
}

fn concavity(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let mut worst_eig = f64::NEG_INFINITY;
    let mut asym: f64 = 0.0;
    for _ in 0..5 {
        let (g, z) = random_instance(rng, 10, 2, 7)?;
        let pot = random_potential(rng, &z, 0.2)?;
        let h = hessian(&g, &z, 0, &pot)?;
        asym = asym.max((&h - h.transpose()).amax());
        worst_eig = worst_eig.max(SymmetricEigen::new(h).eigenvalues.max());
    }
    Ok(result(
        "hessian_concave",
        worst_eig <= 1e-8 && asym == 0.0,
        worst_eig,
        format!("max eigenvalue {worst_eig:e}, asymmetry {asym:e}"),
    ))
}

fn epsilon_limit(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let (g, z) = random_instance(rng, 12, 2, 8)?;
    let free = z.free();
    let t = VertexSet::from_iter([free[0], free[free.len() / 2]]);
    let exact = solve_grouped(&g, &z, 0, &t)?;
    let mut phi = vec![0.0; g.n()];
    for v in t.iter() {
        phi[v] = 0.5;
    }
    let mut gaps = Vec::new();
    for e in 1..=6 {
        let pot = RelaxPotential::new(phi.clone(), 10f64.powi(-e), &z)?;
        let state = solve_relaxed_unconstrained(&g, &z, 0, &pot)?;
        gaps.push(max_abs_diff(&state.v, exact.values()));
    }
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *gaps.last().expect("six gaps");
    Ok(result("epsilon_limit", decreasing && last <= 1e-4, last, format!("gaps {:?}", gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>())))
}

fn symmetry() -> Result<PropertyResult> {
    let e = generate(&GraphFamily::SquareGrid { width: 5, height: 5 })?;
    let z = ZealotConfig::from_lists(25, &[&[12], &[]])?;
    let best = maximize(&e.graph, &z, 1, 0.15, &MaximizeOptions::default())?;
    let mut worst: f64 = 0.0;
    for (_, perm) in e.layout.square_symmetries() {
        worst = worst.max(symmetry_check(&e.graph, &perm, best.potential.phi())?);
    }
    Ok(result("automorphism_invariance", worst <= 1e-4, worst, "5x5 grid, center zealot".into()))
}

fn relabeling(rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (g, z) = random_instance(rng, 10, 2, 6)?;
        let mut perm: Vec<usize> = (0..10).collect();
        perm.shuffle(rng);
        let h = g.relabel(&perm)?;
        let sets: Vec<VertexSet> = z.sets().iter().map(|s| s.iter().map(|v| perm[v]).collect()).collect();
        let zh = ZealotConfig::new(10, sets)?;
        let a = solve_harmonic(&g, &z)?;
        let b = solve_harmonic(&h, &zh)?;
        for (v, &pv) in perm.iter().enumerate() {
            worst = worst.max(max_abs_diff(a.row(v), b.row(pv)));
        }
    }
    Ok(result("relabel_equivariance", worst <= 1e-9, worst, "harmonic solve commutes with relabeling".into()))
}

/// Runs every property on instances drawn from `seed`.
pub fn run_property_suite(seed: u64, mutation: Mutation) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = vec![
        simplex(&mut rng)?,
        reduction(&mut rng)?,
        energy(&mut rng)?,
        submodular(&mut rng)?,
        greedy_bound(&mut rng)?,
        gradient(&mut rng, mutation)?,
        concavity(&mut rng)?,
        epsilon_limit(&mut rng)?,
        symmetry()?,
        relabeling(&mut rng)?,
    ];
    Ok(PropertyReport { seed, mutation, results })
}
