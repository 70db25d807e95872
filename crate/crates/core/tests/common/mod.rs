//! Reference computations for integration tests. Everything here goes
//! through a full dense `n x n` system so it shares no code path with the
//! library's interior-block solves.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use zealot_core::graph::Graph;
use zealot_core::ZealotConfig;

/// Solves `L v = 0` off `pinned` with `v = value` on it, using identity rows
/// for pinned vertices and an extra diagonal term `penalty[i]` pulling
/// `v(i)` towards 1 everywhere else.
pub fn dense_solve(g: &Graph, pinned: &[Option<f64>], penalty: &[f64]) -> Vec<f64> {
    let n = g.n();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        if let Some(x) = pinned[i] {
            a[(i, i)] = 1.0;
            b[i] = x;
            continue;
        }
        for &(j, w) in g.out_neighbors(i) {
            a[(i, i)] += w;
            a[(i, j)] -= w;
        }
        a[(i, i)] += penalty[i];
        b[i] = penalty[i];
    }
    let x = a.lu().solve(&b).expect("reference system is nonsingular");
    x.iter().copied().collect()
}

/// `v` with `1` on `Z_m ∪ extra`, `0` on the other zealots.
pub fn grouped(g: &Graph, z: &ZealotConfig, m: usize, extra: &[usize]) -> Vec<f64> {
    let mut pinned: Vec<Option<f64>> =
        (0..g.n()).map(|v| z.opinion_of(v).map(|l| if l == m { 1.0 } else { 0.0 })).collect();
    for &v in extra {
        pinned[v] = Some(1.0);
    }
    dense_solve(g, &pinned, &vec![0.0; g.n()])
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `F_m(T)` by the reference solve.
pub fn set_value(g: &Graph, z: &ZealotConfig, m: usize, t: &[usize]) -> f64 {
    mean(&grouped(g, z, m, t))
}

/// Relaxed objective: `v = 1` on `Z_m`, `0` on the other zealots, and
/// `L v + ε⁻¹ φ (v − 1) = 0` elsewhere.
pub fn relaxed_objective(g: &Graph, z: &ZealotConfig, m: usize, phi: &[f64], eps: f64) -> f64 {
    let pinned: Vec<Option<f64>> =
        (0..g.n()).map(|v| z.opinion_of(v).map(|l| if l == m { 1.0 } else { 0.0 })).collect();
    let penalty: Vec<f64> = phi.iter().map(|p| p / eps).collect();
    mean(&dense_solve(g, &pinned, &penalty))
}

/// All `k`-subsets of `items` in lexicographic order.
pub fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (a, &x) in items.iter().enumerate() {
        for mut rest in subsets(&items[a + 1..], k - 1) {
            rest.insert(0, x);
            out.push(rest);
        }
    }
    out
}
