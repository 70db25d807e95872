//! Two-authority conversion game. Player 1 holds opinion 0 and player 2
//! opinion 1; players alternate converting one free vertex per turn.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::greedy::{brute_force, greedy, TargetingProblem, TieBreak};
use crate::linalg::SolverOptions;
use crate::opinion::{grouped_unchecked, ZealotConfig};
use crate::relax::{relaxed_select, MaximizeOptions, DEFAULT_EPSILON};

/// Moves per player before the game ends.
pub const DEFAULT_ROUNDS: usize = 3;

/// Largest number of free vertices `brute_small` searches exhaustively.
pub const BRUTE_SMALL_CAP: usize = 60;

/// Largest number of free vertices for the two-ply opening search.
pub const OPENING_CAP: usize = 150;

/// Shares closer than this are a draw.
pub const DRAW_TOL: f64 = 1e-9;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Player {
    Human,
    Random {
        seed: u64,
    },
    Greedy,
    Relaxation {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    BruteSmall,
}

impl Player {
    pub fn is_automatic(&self) -> bool {
        !matches!(self, Player::Human)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    /// 1 or 2.
    pub player: u8,
    pub vertex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Player1,
    Player2,
    Draw,
}

#[derive(Debug, Clone)]
pub struct GameState {
    graph: Arc<Graph>,
    graph_id: String,
    initial: [VertexSet; 2],
    zealots: [VertexSet; 2],
    turn: u8,
    history: Vec<Move>,
    rounds: Option<usize>,
    /// `u_1` on every vertex; present once both sides own a vertex.
    field: Option<Vec<f64>>,
}

/// Serialized form of a [`GameState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameView {
    pub graph_id: String,
    pub n: usize,
    pub initial: [VertexSet; 2],
    pub zealots: [VertexSet; 2],
    pub turn: u8,
    pub history: Vec<Move>,
    pub rounds: Option<usize>,
    pub shares: Option<[f64; 2]>,
    pub field: Option<Vec<f64>>,
    pub legal_moves: VertexSet,
    pub game_over: bool,
    pub outcome: Option<Outcome>,
}

fn shares_of(field: &[f64]) -> [f64; 2] {
    let n = field.len() as f64;
    let p1 = field.iter().sum::<f64>() / n;
    let p2 = field.iter().map(|v| 1.0 - v).sum::<f64>() / n;
    [p1, p2]
}

fn compute_field(g: &Graph, sets: &[VertexSet; 2]) -> Result<Option<Vec<f64>>> {
    if sets[0].is_empty() || sets[1].is_empty() {
        return Ok(None);
    }
    let z = ZealotConfig::new(g.n(), sets.to_vec())?;
    let v = grouped_unchecked(g, &z, 0, &VertexSet::empty(), &SolverOptions::default())?;
    Ok(Some(v.0))
}

impl GameState {
    /// Fresh game; `seeds` are pre-placed zealots that are not part of the
    /// move history. `rounds` of `None` plays until the board is full.
    pub fn new(
        graph: Arc<Graph>,
        graph_id: impl Into<String>,
        seeds: [VertexSet; 2],
        rounds: Option<usize>,
    ) -> Result<Self> {
        graph.ensure_strongly_connected()?;
        let n = graph.n();
        for (p, s) in seeds.iter().enumerate() {
            if let Some(v) = s.max().filter(|&v| v >= n) {
                return Err(Error::InvalidZealots(format!("player {} seed {v} out of range", p + 1)));
            }
        }
        if !seeds[0].is_disjoint(&seeds[1]) {
            return Err(Error::InvalidZealots("seed sets overlap".into()));
        }
        if rounds == Some(0) {
            return Err(Error::InvalidParams("rounds must be positive".into()));
        }
        let field = compute_field(&graph, &seeds)?;
        Ok(Self {
            graph,
            graph_id: graph_id.into(),
            zealots: seeds.clone(),
            initial: seeds,
            turn: 1,
            history: Vec::new(),
            rounds,
            field,
        })
    }

    /// Rebuilds a state by replaying `history` from the seeds.
    pub fn replay(
        graph: Arc<Graph>,
        graph_id: impl Into<String>,
        seeds: [VertexSet; 2],
        rounds: Option<usize>,
        history: &[Move],
    ) -> Result<Self> {
        let mut s = Self::new(graph, graph_id, seeds, rounds)?;
        for mv in history {
            s = s.apply_move(mv.player, mv.vertex)?;
        }
        Ok(s)
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn graph_id(&self) -> &str {
        &self.graph_id
    }

    pub fn initial(&self) -> &[VertexSet; 2] {
        &self.initial
    }

    pub fn zealots(&self) -> &[VertexSet; 2] {
        &self.zealots
    }

    pub fn turn(&self) -> u8 {
        self.turn
    }

    pub fn history(&self) -> &[Move] {
        &self.history
    }

    pub fn rounds(&self) -> Option<usize> {
        self.rounds
    }

    pub fn field(&self) -> Option<&[f64]> {
        self.field.as_deref()
    }

    /// `(I_1, I_2)`, or `None` while a side owns nothing.
    pub fn shares(&self) -> Option<[f64; 2]> {
        self.field.as_deref().map(shares_of)
    }

    pub fn legal_moves(&self) -> VertexSet {
        (0..self.graph.n())
            .filter(|&v| !self.zealots[0].contains(v) && !self.zealots[1].contains(v))
            .collect()
    }

    pub fn is_over(&self) -> bool {
        let out_of_rounds = self.rounds.is_some_and(|r| self.history.len() >= 2 * r);
        out_of_rounds || self.legal_moves().is_empty()
    }

    /// Winner by final shares; `None` until the game is over or while
    /// shares are undefined.
    pub fn outcome(&self) -> Option<Outcome> {
        if !self.is_over() {
            return None;
        }
        let [a, b] = self.shares()?;
        Some(if (a - b).abs() <= DRAW_TOL {
            Outcome::Draw
        } else if a > b {
            Outcome::Player1
        } else {
            Outcome::Player2
        })
    }

    pub fn apply_move(&self, player: u8, vertex: usize) -> Result<Self> {
        if self.is_over() {
            return Err(Error::GameOver);
        }
        if player != self.turn {
            return Err(Error::OutOfTurn(player as usize));
        }
        if vertex >= self.graph.n() || self.zealots.iter().any(|s| s.contains(vertex)) {
            return Err(Error::IllegalMove(vertex));
        }
        let mut zealots = self.zealots.clone();
        let side = (player - 1) as usize;
        zealots[side] = zealots[side].with(vertex);
        let field = compute_field(&self.graph, &zealots)?;
        let mut history = self.history.clone();
        history.push(Move { player, vertex });
        Ok(Self {
            graph: Arc::clone(&self.graph),
            graph_id: self.graph_id.clone(),
            initial: self.initial.clone(),
            zealots,
            turn: 3 - player,
            history,
            rounds: self.rounds,
            field,
        })
    }

    pub fn view(&self) -> GameView {
        GameView {
            graph_id: self.graph_id.clone(),
            n: self.graph.n(),
            initial: self.initial.clone(),
            zealots: self.zealots.clone(),
            turn: self.turn,
            history: self.history.clone(),
            rounds: self.rounds,
            shares: self.shares(),
            field: self.field.clone(),
            legal_moves: self.legal_moves(),
            game_over: self.is_over(),
            outcome: self.outcome(),
        }
    }

    /// Zealot config with the side to move as opinion `0`.
    fn mover_config(&self) -> Result<Option<ZealotConfig>> {
        let me = (self.turn - 1) as usize;
        if self.zealots[1 - me].is_empty() {
            return Ok(None);
        }
        let sets = vec![self.zealots[me].clone(), self.zealots[1 - me].clone()];
        ZealotConfig::new(self.graph.n(), sets).map(Some)
    }
}

/// The vertex the automatic player `p` converts in state `s`.
pub fn ai_move(s: &GameState, p: &Player) -> Result<usize> {
    if s.is_over() {
        return Err(Error::GameOver);
    }
    let legal = s.legal_moves();
    if legal.is_empty() {
        return Err(Error::NoLegalMoves);
    }
    match p {
        Player::Human => Err(Error::InvalidParams("a human player has no automatic move".into())),
        Player::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(s.history().len() as u64);
            Ok(*legal.as_slice().choose(&mut rng).expect("legal moves are nonempty"))
        }
        Player::Greedy => match s.mover_config()? {
            Some(z) => {
                let problem = TargetingProblem::new(s.graph(), z, 0, 1)?;
                Ok(greedy(&problem, TieBreak::LowestId)?.chosen.as_slice()[0])
            }
            None => opening_move(s),
        },
        Player::Relaxation { epsilon } => match s.mover_config()? {
            Some(z) => {
                let problem = TargetingProblem::new(s.graph(), z, 0, 1)?;
                let sol = relaxed_select(&problem, *epsilon, &MaximizeOptions::default(), TieBreak::LowestId)?;
                Ok(sol.chosen.as_slice()[0])
            }
            None => opening_move(s),
        },
        Player::BruteSmall => {
            if legal.len() > BRUTE_SMALL_CAP {
                tracing::info!(free = legal.len(), "brute_small over its cap, playing greedy");
                return ai_move(s, &Player::Greedy);
            }
            two_ply(s, &legal, Reply::Exact)
        }
    }
}

#[derive(Clone, Copy)]
enum Reply {
    Exact,
    Greedy,
}

/// Share the mover keeps after converting `v` and the opponent's best
/// single reply. Falls back to the immediate share when no reply follows.
fn reply_value(s: &GameState, v: usize, reply: Reply) -> Result<f64> {
    let next = s.apply_move(s.turn, v)?;
    let me = (s.turn - 1) as usize;
    if next.is_over() {
        return Ok(next.shares().map_or(1.0, |sh| sh[me]));
    }
    let z = next.mover_config()?.expect("the mover just converted a vertex");
    let problem = TargetingProblem::new(s.graph(), z, 0, 1)?;
    let best = match reply {
        Reply::Exact => brute_force(&problem, u128::MAX)?,
        Reply::Greedy => greedy(&problem, TieBreak::LowestId)?,
    };
    Ok(1.0 - best.value)
}

fn two_ply(s: &GameState, legal: &VertexSet, reply: Reply) -> Result<usize> {
    let scored: Vec<(usize, f64)> = legal
        .as_slice()
        .par_iter()
        .map(|&v| reply_value(s, v, reply).map(|x| (v, x)))
        .collect::<Result<_>>()?;
    let best = scored.iter().map(|&(_, x)| x).fold(f64::NEG_INFINITY, f64::max);
    Ok(scored.iter().find(|&&(_, x)| x >= best - crate::TIE_TOL).expect("nonempty").0)
}

/// First conversion when the opponent owns nothing: every choice scores 1
/// immediately, so look one reply ahead. Large boards use the vertex of
/// least total hop distance instead.
fn opening_move(s: &GameState) -> Result<usize> {
    let legal = s.legal_moves();
    if legal.len() <= OPENING_CAP {
        return two_ply(s, &legal, Reply::Greedy);
    }
    let g = s.graph();
    let scored: Vec<(usize, usize)> = legal
        .as_slice()
        .par_iter()
        .map(|&v| (v, g.hop_distances(&[v]).iter().map(|d| d.unwrap_or(usize::MAX / g.n())).sum()))
        .collect();
    let least = scored.iter().map(|&(_, d)| d).min().expect("nonempty");
    Ok(scored.iter().find(|&&(_, d)| d == least).expect("nonempty").0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMove {
    pub player: u8,
    pub vertex: usize,
    pub shares: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub players: [Player; 2],
    pub moves: Vec<TranscriptMove>,
    pub final_shares: Option<[f64; 2]>,
    pub outcome: Option<Outcome>,
}

/// Plays two automatic players against each other until the game ends.
pub fn play_match(start: GameState, players: &[Player; 2]) -> Result<(GameState, MatchRecord)> {
    if players.iter().any(|p| !p.is_automatic()) {
        return Err(Error::InvalidParams("matches need two automatic players".into()));
    }
    let mut state = start;
    let mut moves = Vec::new();
    while !state.is_over() {
        let player = state.turn();
        let vertex = ai_move(&state, &players[(player - 1) as usize])?;
        state = state.apply_move(player, vertex)?;
        moves.push(TranscriptMove { player, vertex, shares: state.shares() });
    }
    let record = MatchRecord {
        players: players.clone(),
        moves,
        final_shares: state.shares(),
        outcome: state.outcome(),
    };
    Ok((state, record))
}
