use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use zealot_core::game::{Player, DEFAULT_ROUNDS};
use zealot_core::graph::{generate, read_edge_list, GraphFamily, GraphRecord};
use zealot_core::relax::{frobenius_epsilon, DEFAULT_EPSILON};
use zealot_core::{spec_hash, Graph, Layout, VertexSet, ZealotConfig};

pub type CliResult<T> = std::result::Result<T, Box<dyn std::error::Error + Send + Sync>>;

/// Where the graph comes from: a generated family or an edge-list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Family(GraphFamily),
    EdgeList { edge_list: PathBuf },
}

/// A zealot given by id or by its layout coordinates, e.g. `[3, 5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexRef {
    Id(usize),
    At([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Value(f64),
    /// `"frobenius"`: the reciprocal Frobenius norm of the Laplacian.
    Named(String),
}

fn default_m() -> usize {
    1
}

fn default_eps() -> Vec<Epsilon> {
    vec![Epsilon::Value(DEFAULT_EPSILON)]
}

fn default_budget() -> usize {
    1
}

fn default_rounds() -> Option<usize> {
    Some(DEFAULT_ROUNDS)
}

fn default_matches() -> usize {
    1
}

/// One experiment. `m` is 1-based and indexes `zealots`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub graph: GraphSource,
    #[serde(default)]
    pub zealots: Vec<Vec<VertexRef>>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_eps")]
    pub eps: Vec<Epsilon>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub players: Option<[Player; 2]>,
    /// Moves per player; `null` plays until the board is full.
    #[serde(default = "default_rounds")]
    pub rounds: Option<usize>,
    #[serde(default = "default_matches")]
    pub matches: usize,
    /// Reseed a random geometric graph for every match.
    #[serde(default)]
    pub vary_graph: bool,
    /// Let the players swap seats on every other match.
    #[serde(default)]
    pub alternate: bool,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
    }

    pub fn resolve(&self) -> CliResult<Resolved> {
        let (graph, layout, hashed_graph) = match &self.graph {
            GraphSource::Family(f) => {
                let e = generate(f)?;
                (e.graph, e.layout, serde_json::to_value(f)?)
            }
            GraphSource::EdgeList { edge_list } => {
                let text =
                    std::fs::read_to_string(edge_list).map_err(|e| format!("{}: {e}", edge_list.display()))?;
                let g = read_edge_list(&text)?;
                let layout = Layout { positions: (0..g.n()).map(|i| [i as f64 + 1.0, 0.0]).collect() };
                let record = GraphRecord::from(g.clone());
                (g, layout, serde_json::to_value(record)?)
            }
        };
        let mut sets = Vec::with_capacity(self.zealots.len());
        for list in &self.zealots {
            let mut ids = Vec::with_capacity(list.len());
            for r in list {
                ids.push(match r {
                    VertexRef::Id(v) => *v,
                    VertexRef::At([x, y]) => {
                        layout.vertex_at(*x, *y).ok_or_else(|| format!("no vertex at ({x}, {y})"))?
                    }
                });
            }
            sets.push(VertexSet::new(ids, graph.n())?);
        }
        let mut eps = Vec::with_capacity(self.eps.len());
        for e in &self.eps {
            eps.push(match e {
                Epsilon::Value(v) if *v > 0.0 && v.is_finite() => *v,
                Epsilon::Value(v) => return Err(format!("eps must be positive, got {v}").into()),
                Epsilon::Named(s) if s == "frobenius" => frobenius_epsilon(&graph),
                Epsilon::Named(s) => return Err(format!("unknown eps {s:?}").into()),
            });
        }
        // Output paths do not change results, so they stay out of the hash.
        let mut hashed = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut hashed {
            map.remove("out");
            map.insert("graph".into(), hashed_graph);
        }
        Ok(Resolved { graph, layout, sets, eps, hash: spec_hash(&hashed), canonical: hashed })
    }
}

pub struct Resolved {
    pub graph: Graph,
    pub layout: Layout,
    pub sets: Vec<VertexSet>,
    pub eps: Vec<f64>,
    pub hash: String,
    /// The spec as hashed: no output path, edge lists inlined.
    pub canonical: Value,
}

impl Resolved {
    pub fn zealots(&self) -> CliResult<ZealotConfig> {
        Ok(ZealotConfig::new(self.graph.n(), self.sets.clone())?)
    }

    /// 0-based authority index.
    pub fn authority(&self, m: usize) -> CliResult<usize> {
        if m == 0 || m > self.sets.len() {
            return Err(format!("--m must be between 1 and {} (the number of zealot sets)", self.sets.len()).into());
        }
        Ok(m - 1)
    }
}

/// `--graph` accepts a family JSON object, an edge-list path, or a family
/// name whose parameters come from `--params`.
pub fn graph_from_flags(graph: &str, params: Option<&str>) -> CliResult<GraphSource> {
    let trimmed = graph.trim_start();
    if trimmed.starts_with('{') {
        if params.is_some() {
            return Err("--params only applies when --graph is a family name".into());
        }
        return Ok(GraphSource::Family(serde_json::from_str(trimmed)?));
    }
    if Path::new(graph).is_file() {
        return Ok(GraphSource::EdgeList { edge_list: graph.into() });
    }
    let mut object = match params {
        Some(p) => match serde_json::from_str::<Value>(p)? {
            Value::Object(map) => map,
            _ => return Err("--params must be a JSON object".into()),
        },
        None => serde_json::Map::new(),
    };
    object.insert("family".into(), Value::String(graph.into()));
    Ok(GraphSource::Family(serde_json::from_value(Value::Object(object))?))
}

pub fn parse_eps_list(text: &str) -> CliResult<Vec<Epsilon>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(v) => Ok(Epsilon::Value(v)),
                Err(_) if s.chars().all(|c| c.is_ascii_alphabetic()) => Ok(Epsilon::Named(s.into())),
                Err(e) => Err(format!("bad eps {s:?}: {e}").into()),
            }
        })
        .collect()
}

/// Comma separated strategy names; `random` takes the run seed.
pub fn parse_players(text: &str, seed: u64) -> CliResult<[Player; 2]> {
    let parsed: Vec<Player> = text
        .split(',')
        .map(|s| match s.trim() {
            "greedy" => Ok(Player::Greedy),
            "random" => Ok(Player::Random { seed }),
            "brute_small" => Ok(Player::BruteSmall),
            "relaxation" => Ok(Player::Relaxation { epsilon: DEFAULT_EPSILON }),
            other => match other.strip_prefix("relaxation:") {
                Some(e) => Ok(Player::Relaxation { epsilon: e.parse().map_err(|e| format!("bad epsilon: {e}"))? }),
                None => Err(format!("unknown strategy {other:?}")),
            },
        })
        .collect::<std::result::Result<_, String>>()?;
    <[Player; 2]>::try_from(parsed).map_err(|_| "--players needs exactly two strategies".into())
}
