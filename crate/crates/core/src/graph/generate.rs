//! Generators for the experiment graph families.
//!
//! Lattice families carry integer coordinates: vertex `(col, row)` of a
//! `width x height` grid (both 1-based, rows increasing upward) has id
//! `(row - 1) * width + (col - 1)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Graph family tag plus parameters. Serialized as
/// `{"family": "square_grid", "width": 11, "height": 11}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphFamily {
    SquareGrid {
        width: usize,
        height: usize,
    },
    /// Grid with one edge removed; endpoints given as 1-based `(col, row)`.
    SquareGridWithDefect {
        width: usize,
        height: usize,
        removed: [[usize; 2]; 2],
    },
    /// Two `width x height` grids side by side joined by one bridge edge
    /// from `(bridge_row)` of the left grid's last column to the right
    /// grid's first column. Defaults to the middle row (rounded up).
    HGraph {
        width: usize,
        height: usize,
        #[serde(default)]
        bridge_row: Option<usize>,
    },
    /// Uniform points in the unit square joined when within `radius`.
    RandomGeometric {
        n: usize,
        radius: f64,
        seed: u64,
    },
    /// Complete `branching`-ary tree with `depth` levels below the root.
    Tree {
        branching: usize,
        depth: usize,
    },
    Ladder {
        length: usize,
    },
    /// Honeycomb drawn as a brick wall on a `width x height` grid.
    HexLattice {
        width: usize,
        height: usize,
    },
    TriLattice {
        width: usize,
        height: usize,
    },
    Cycle {
        n: usize,
    },
    /// Arcs `i -> i+1 (mod n)`.
    DirectedCycle {
        n: usize,
    },
    Star {
        leaves: usize,
    },
}

/// Vertex coordinates for rendering and for naming lattice vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub positions: Vec<[f64; 2]>,
}

impl Layout {
    /// Vertex placed exactly at `(x, y)`.
    pub fn vertex_at(&self, x: f64, y: f64) -> Option<usize> {
        self.positions.iter().position(|p| p[0] == x && p[1] == y)
    }

    /// Maps every vertex through a geometric transform and back to a vertex
    /// id. `None` unless the transform permutes the vertex positions.
    pub fn permutation_from<F>(&self, f: F) -> Option<Vec<usize>>
    where
        F: Fn([f64; 2]) -> [f64; 2],
    {
        let mut perm = Vec::with_capacity(self.positions.len());
        let mut seen = vec![false; self.positions.len()];
        for &p in &self.positions {
            let q = f(p);
            let j = self
                .positions
                .iter()
                .position(|r| (r[0] - q[0]).abs() < 1e-9 && (r[1] - q[1]).abs() < 1e-9)?;
            if std::mem::replace(&mut seen[j], true) {
                return None;
            }
            perm.push(j);
        }
        Some(perm)
    }

    /// The eight symmetries of the square about the centroid of the layout,
    /// keeping those that permute the vertex positions. Identity excluded.
    pub fn square_symmetries(&self) -> Vec<(&'static str, Vec<usize>)> {
        let n = self.positions.len() as f64;
        let cx = self.positions.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = self.positions.iter().map(|p| p[1]).sum::<f64>() / n;
        let transforms: [(&'static str, fn(f64, f64) -> (f64, f64)); 7] = [
            ("rotate_90", |x, y| (-y, x)),
            ("rotate_180", |x, y| (-x, -y)),
            ("rotate_270", |x, y| (y, -x)),
            ("mirror_left_right", |x, y| (-x, y)),
            ("mirror_top_bottom", |x, y| (x, -y)),
            ("mirror_diagonal", |x, y| (y, x)),
            ("mirror_antidiagonal", |x, y| (-y, -x)),
        ];
        transforms
            .into_iter()
            .filter_map(|(name, t)| {
                self.permutation_from(|p| {
                    let (x, y) = t(p[0] - cx, p[1] - cy);
                    [x + cx, y + cy]
                })
                .map(|perm| (name, perm))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub graph: Graph,
    pub layout: Layout,
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidParams(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

fn grid_arcs(width: usize, height: usize, offset: usize) -> Vec<(usize, usize, f64)> {
    let id = |c: usize, r: usize| offset + r * width + c;
    let mut arcs = Vec::new();
    for r in 0..height {
        for c in 0..width {
            if c + 1 < width {
                arcs.push((id(c, r), id(c + 1, r), 1.0));
            }
            if r + 1 < height {
                arcs.push((id(c, r), id(c, r + 1), 1.0));
            }
        }
    }
    arcs
}

fn grid_positions(width: usize, height: usize, x0: f64) -> Vec<[f64; 2]> {
    (0..height)
        .flat_map(|r| (0..width).map(move |c| [x0 + c as f64 + 1.0, r as f64 + 1.0]))
        .collect()
}

pub fn generate(family: &GraphFamily) -> Result<Embedded> {
    match *family {
        GraphFamily::SquareGrid { width, height } => {
            positive("width", width)?;
            positive("height", height)?;
            if width * height < 2 {
                return Err(Error::InvalidParams("grid needs at least two vertices".into()));
            }
            let graph = Graph::from_arcs(width * height, false, grid_arcs(width, height, 0))?;
            Ok(Embedded { graph, layout: Layout { positions: grid_positions(width, height, 0.0) } })
        }
        GraphFamily::SquareGridWithDefect { width, height, removed } => {
            let base = generate(&GraphFamily::SquareGrid { width, height })?;
            let id = |p: [usize; 2]| -> Result<usize> {
                if p[0] == 0 || p[1] == 0 || p[0] > width || p[1] > height {
                    return Err(Error::InvalidParams(format!("coordinate {p:?} outside grid")));
                }
                Ok((p[1] - 1) * width + (p[0] - 1))
            };
            let (a, b) = (id(removed[0])?, id(removed[1])?);
            if !base.graph.has_arc(a, b) {
                return Err(Error::InvalidParams(format!(
                    "{:?} and {:?} are not adjacent",
                    removed[0], removed[1]
                )));
            }
            let arcs: Vec<_> = base
                .graph
                .edges()
                .filter(|&(i, j, _)| !((i, j) == (a, b) || (i, j) == (b, a)))
                .collect();
            let graph = Graph::from_arcs(width * height, false, arcs)?;
            if !graph.is_strongly_connected() {
                return Err(Error::InvalidParams("removing the edge disconnects the grid".into()));
            }
            Ok(Embedded { graph, layout: base.layout })
        }
        GraphFamily::HGraph { width, height, bridge_row } => {
            positive("width", width)?;
            positive("height", height)?;
            let row = bridge_row.unwrap_or(height.div_ceil(2));
            if row == 0 || row > height {
                return Err(Error::InvalidParams(format!("bridge row {row} outside 1..={height}")));
            }
            let half = width * height;
            let mut arcs = grid_arcs(width, height, 0);
            arcs.extend(grid_arcs(width, height, half));
            let left = (row - 1) * width + (width - 1);
            let right = half + (row - 1) * width;
            arcs.push((left, right, 1.0));
            let graph = Graph::from_arcs(2 * half, false, arcs)?;
            let mut positions = grid_positions(width, height, 0.0);
            positions.extend(grid_positions(width, height, width as f64));
            Ok(Embedded { graph, layout: Layout { positions } })
        }
        GraphFamily::RandomGeometric { n, radius, seed } => {
            if n < 2 {
                return Err(Error::InvalidParams("random geometric graph needs n >= 2".into()));
            }
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidParams("radius must be positive".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let positions: Vec<[f64; 2]> =
                (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
            let mut arcs = Vec::new();
            let mut degree = vec![0usize; n];
            for i in 0..n {
                for j in i + 1..n {
                    let dx = positions[i][0] - positions[j][0];
                    let dy = positions[i][1] - positions[j][1];
                    if dx * dx + dy * dy <= radius * radius {
                        arcs.push((i, j, 1.0));
                        degree[i] += 1;
                        degree[j] += 1;
                    }
                }
            }
            if degree.contains(&0) {
                return Err(Error::InvalidParams(format!(
                    "radius {radius} leaves isolated vertices (seed {seed})"
                )));
            }
            let graph = Graph::from_arcs(n, false, arcs)?;
            if !graph.is_strongly_connected() {
                return Err(Error::InvalidParams(format!(
                    "radius {radius} gives a disconnected graph (seed {seed})"
                )));
            }
            Ok(Embedded { graph, layout: Layout { positions } })
        }
        GraphFamily::Tree { branching, depth } => {
            positive("branching", branching)?;
            positive("depth", depth)?;
            let mut arcs = Vec::new();
            let mut levels: Vec<Vec<usize>> = vec![vec![0]];
            let mut next = 1;
            for _ in 0..depth {
                let mut level = Vec::new();
                for &parent in levels.last().unwrap() {
                    for _ in 0..branching {
                        arcs.push((parent, next, 1.0));
                        level.push(next);
                        next += 1;
                    }
                }
                levels.push(level);
            }
            let mut positions = vec![[0.0, 0.0]; next];
            let width = levels.last().map_or(1, Vec::len) as f64;
            for (d, level) in levels.iter().enumerate() {
                let span = width / level.len() as f64;
                for (k, &v) in level.iter().enumerate() {
                    positions[v] = [(k as f64 + 0.5) * span, -(d as f64)];
                }
            }
            let graph = Graph::from_arcs(next, false, arcs)?;
            Ok(Embedded { graph, layout: Layout { positions } })
        }
        GraphFamily::Ladder { length } => {
            positive("length", length)?;
            generate(&GraphFamily::SquareGrid { width: length, height: 2 })
        }
        GraphFamily::HexLattice { width, height } => {
            if width < 2 || height < 2 {
                return Err(Error::InvalidParams("hex lattice needs width, height >= 2".into()));
            }
            let id = |c: usize, r: usize| r * width + c;
            let mut arcs = Vec::new();
            for r in 0..height {
                for c in 0..width {
                    if c + 1 < width {
                        arcs.push((id(c, r), id(c + 1, r), 1.0));
                    }
                    if r + 1 < height && (c + r) % 2 == 0 {
                        arcs.push((id(c, r), id(c, r + 1), 1.0));
                    }
                }
            }
            let graph = Graph::from_arcs(width * height, false, arcs)?;
            if !graph.is_strongly_connected() {
                return Err(Error::InvalidParams("hex lattice dimensions give a disconnected graph".into()));
            }
            Ok(Embedded { graph, layout: Layout { positions: grid_positions(width, height, 0.0) } })
        }
        GraphFamily::TriLattice { width, height } => {
            positive("width", width)?;
            positive("height", height)?;
            if width * height < 2 {
                return Err(Error::InvalidParams("lattice needs at least two vertices".into()));
            }
            let id = |c: usize, r: usize| r * width + c;
            let mut arcs = grid_arcs(width, height, 0);
            for r in 0..height.saturating_sub(1) {
                for c in 0..width.saturating_sub(1) {
                    arcs.push((id(c, r), id(c + 1, r + 1), 1.0));
                }
            }
            let graph = Graph::from_arcs(width * height, false, arcs)?;
            let positions = (0..height)
                .flat_map(|r| {
                    (0..width).map(move |c| [c as f64 - 0.5 * r as f64, r as f64 * 0.75f64.sqrt()])
                })
                .collect();
            Ok(Embedded { graph, layout: Layout { positions } })
        }
        GraphFamily::Cycle { n } | GraphFamily::DirectedCycle { n } => {
            let directed = matches!(family, GraphFamily::DirectedCycle { .. });
            let min = if directed { 2 } else { 3 };
            if n < min {
                return Err(Error::InvalidParams(format!("cycle needs at least {min} vertices")));
            }
            let arcs = (0..n).map(|i| (i, (i + 1) % n, 1.0));
            let graph = Graph::from_arcs(n, directed, arcs)?;
            let positions = (0..n)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / n as f64;
                    [a.cos(), a.sin()]
                })
                .collect();
            Ok(Embedded { graph, layout: Layout { positions } })
        }
        GraphFamily::Star { leaves } => {
            positive("leaves", leaves)?;
            let graph = Graph::from_arcs(leaves + 1, false, (1..=leaves).map(|i| (0, i, 1.0)))?;
            let mut positions = vec![[0.0, 0.0]];
            positions.extend((0..leaves).map(|i| {
                let a = std::f64::consts::TAU * i as f64 / leaves as f64;
                [a.cos(), a.sin()]
            }));
            Ok(Embedded { graph, layout: Layout { positions } })
        }
    }
}

/// Random strongly connected graph for property testing: a shuffled
/// Hamiltonian cycle (a spanning path when undirected) plus each remaining
/// pair with probability `density`, weights uniform in `[0.5, 2)`.
pub fn random_connected(n: usize, directed: bool, density: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParams("random graph needs at least two vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut present = vec![vec![false; n]; n];
    let mut arcs = Vec::new();
    let backbone = if directed { n } else { n - 1 };
    for k in 0..backbone {
        let (a, b) = (order[k], order[(k + 1) % n]);
        if !present[a][b] {
            present[a][b] = true;
            if !directed {
                present[b][a] = true;
            }
            arcs.push((a, b, rng.random_range(0.5..2.0)));
        }
    }
    for a in 0..n {
        let lo = if directed { 0 } else { a + 1 };
        for b in lo..n {
            if a != b && !present[a][b] && rng.random_bool(density) {
                present[a][b] = true;
                arcs.push((a, b, rng.random_range(0.5..2.0)));
            }
        }
    }
    Graph::from_arcs(n, directed, arcs)
}
