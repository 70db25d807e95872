use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("invalid zealot configuration: {0}")]
    InvalidZealots(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("iterative solver did not reach tolerance after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("graph is directed; operation requires an undirected graph")]
    Directed,

    #[error("unstable time step {dt} (must be below {limit})")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("random walk exceeded {0} steps")]
    WalkCap(usize),

    #[error("budget {budget} exceeds the {available} available vertices")]
    Budget { budget: usize, available: usize },

    #[error("{count} candidate sets exceed the brute-force cap of {cap}")]
    CombinatorialCap { count: u128, cap: u128 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("optimizer stopped after {iterations} iterations with projected-gradient norm {norm:e}")]
    NotConverged { iterations: usize, norm: f64 },

    #[error("permutation is not an automorphism: {0}")]
    NotAutomorphism(String),

    #[error("it is not player {0}'s turn")]
    OutOfTurn(usize),

    #[error("vertex {0} is not a legal move")]
    IllegalMove(usize),

    #[error("game is over")]
    GameOver,

    #[error("no legal moves")]
    NoLegalMoves,
}
