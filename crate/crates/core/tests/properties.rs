mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zealot_core::graph::{generate, random_connected, read_edge_list, write_edge_list, Graph, GraphFamily, VertexSet};
use zealot_core::greedy::{greedy, TargetingProblem, TieBreak};
use zealot_core::linalg::SolverOptions;
use zealot_core::opinion::{simulate_dynamics, solve_grouped, solve_harmonic, solve_harmonic_with, OpinionField};
use zealot_core::props::random_instance;
use zealot_core::relax::{project_simplex, solve_relaxed, RelaxPotential};
use zealot_core::ZealotConfig;

fn instance(seed: u64, n: usize, k: usize, free: usize) -> (Graph, ZealotConfig) {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), n, k, free).unwrap()
}

/// All-pairs hop counts by Floyd-Warshall, ignoring arc direction.
fn floyd(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for &(j, _) in g.out_neighbors(i) {
            d[i][j] = 1;
            d[j][i] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn harmonic_rows_lie_on_the_simplex(seed in any::<u64>(), n in 4usize..16, k in 2usize..5) {
        let free = n - k.min(n - 1);
        let (g, z) = instance(seed, n, k, free);
        let u = solve_harmonic(&g, &z).unwrap();
        prop_assert!(u.simplex_violation() <= 1e-9);
        for row in u.rows() {
            prop_assert!(row.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        }
    }

    #[test]
    fn harmonic_solve_matches_reference(seed in any::<u64>(), n in 4usize..14) {
        let (g, z) = instance(seed, n, 2, n - 2);
        let u = solve_harmonic(&g, &z).unwrap();
        let reference = common::grouped(&g, &z, 0, &[]);
        for (i, &r) in reference.iter().enumerate() {
            prop_assert!((u.row(i)[0] - r).abs() <= 1e-10);
        }
    }

    #[test]
    fn relabeling_commutes_with_the_solve(seed in any::<u64>(), n in 4usize..14) {
        let (g, z) = instance(seed, n, 3, n - 3);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x55));
        let h = g.relabel(&perm).unwrap();
        let sets = z.sets().iter().map(|s| s.iter().map(|v| perm[v]).collect()).collect();
        let zh = ZealotConfig::new(n, sets).unwrap();
        let a = solve_harmonic(&g, &z).unwrap();
        let b = solve_harmonic(&h, &zh).unwrap();
        for v in 0..n {
            for l in 0..3 {
                prop_assert!((a.row(v)[l] - b.row(perm[v])[l]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn hop_distances_match_floyd_warshall(seed in any::<u64>(), n in 2usize..20, directed in any::<bool>()) {
        let g = random_connected(n, directed, 0.15, seed).unwrap();
        let d = floyd(&g);
        let sources = [0, n / 2];
        let got = g.hop_distances(&sources);
        for v in 0..n {
            let want = sources.iter().map(|&s| d[s][v]).min().unwrap();
            prop_assert_eq!(got[v], Some(want));
        }
    }

    #[test]
    fn edge_list_round_trip(seed in any::<u64>(), n in 2usize..20, directed in any::<bool>()) {
        let g = random_connected(n, directed, 0.2, seed).unwrap();
        let text = write_edge_list(&g);
        let back = read_edge_list(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(write_edge_list(&back), text);
    }

    #[test]
    fn projection_is_nearest_simplex_point(y in prop::collection::vec(-2.0f64..2.0, 1..12), mass in 0.1f64..3.0) {
        let x = project_simplex(&y, mass);
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        prop_assert!((x.iter().sum::<f64>() - mass).abs() <= 1e-12);
        // optimality: y - x is constant on the support and no larger off it
        let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
        let theta = y[support[0]] - x[support[0]];
        for i in 0..x.len() {
            if x[i] > 0.0 {
                prop_assert!((y[i] - x[i] - theta).abs() <= 1e-12);
            } else {
                prop_assert!(y[i] <= theta + 1e-12);
            }
        }
    }

    #[test]
    fn greedy_trace_gains_are_true_marginals(seed in any::<u64>(), t in 1usize..4) {
        let (g, z) = instance(seed, 12, 2, 9);
        let p = TargetingProblem::new(&g, z.clone(), 1, t).unwrap();
        let sol = greedy(&p, TieBreak::LowestId).unwrap();
        prop_assert_eq!(sol.chosen.len(), t);
        prop_assert!(sol.chosen.is_disjoint(&z.union()));
        let mut taken = Vec::new();
        let mut prev = common::set_value(&g, &z, 1, &taken);
        for step in &sol.trace {
            taken.push(step.vertex);
            let cur = common::set_value(&g, &z, 1, &taken);
            prop_assert!((step.gain - (cur - prev)).abs() <= 1e-9);
            prev = cur;
        }
        prop_assert!((sol.value - prev).abs() <= 1e-9);
    }
}

#[test]
fn iterative_backend_matches_dense() {
    let g = generate(&GraphFamily::RandomGeometric { n: 60, radius: 0.3, seed: 2 }).unwrap().graph;
    let z = ZealotConfig::from_lists(60, &[&[0, 5], &[30], &[44]]).unwrap();
    let dense = solve_harmonic(&g, &z).unwrap();
    let iterative = solve_harmonic_with(&g, &z, &SolverOptions { dense_limit: 0, ..Default::default() }).unwrap();
    for i in 0..60 {
        for l in 0..3 {
            assert!((dense.row(i)[l] - iterative.row(i)[l]).abs() <= 1e-8);
        }
    }
    let d = random_connected(40, true, 0.1, 9).unwrap();
    let z = ZealotConfig::from_lists(40, &[&[1], &[2, 3]]).unwrap();
    let dense = solve_harmonic(&d, &z).unwrap();
    let iterative = solve_harmonic_with(&d, &z, &SolverOptions { dense_limit: 0, ..Default::default() }).unwrap();
    for i in 0..40 {
        assert!((dense.row(i)[0] - iterative.row(i)[0]).abs() <= 1e-8);
    }
}

#[test]
fn dynamics_conserve_row_sums_and_converge() {
    let g = generate(&GraphFamily::RandomGeometric { n: 40, radius: 0.3, seed: 4 }).unwrap().graph;
    let z = ZealotConfig::from_lists(40, &[&[0], &[1], &[2]]).unwrap();
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| match z.opinion_of(i) {
            Some(l) => (0..3).map(|m| if m == l { 1.0 } else { 0.0 }).collect(),
            None => vec![1.0 / 3.0; 3],
        })
        .collect();
    let u0 = OpinionField::from_rows(rows).unwrap();
    let dt = 0.9 / g.max_degree();
    let u = simulate_dynamics(&g, &z, &u0, dt, 10_000).unwrap();
    assert!(u.simplex_violation() <= 1e-9);
    let limit = solve_harmonic(&g, &z).unwrap();
    for i in 0..40 {
        for l in 0..3 {
            assert!((u.row(i)[l] - limit.row(i)[l]).abs() <= 1e-6);
        }
    }
}

#[test]
fn small_epsilon_pins_the_target() {
    for seed in 0..5 {
        let (g, z) = instance(seed, 12, 2, 8);
        let free = z.free();
        let t = [free[0], free[3]];
        let mut phi = vec![0.0; 12];
        for &v in &t {
            phi[v] = 0.5;
        }
        let state = solve_relaxed(&g, &z, 0, &RelaxPotential::new(phi, 1e-6, &z).unwrap()).unwrap();
        for &v in &t {
            assert!((state.v[v] - 1.0).abs() <= 1e-4);
        }
        let exact = solve_grouped(&g, &z, 0, &VertexSet::from_iter(t)).unwrap();
        let gap = state.v.iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-4);
    }
}
