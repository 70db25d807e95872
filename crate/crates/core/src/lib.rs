//! Harmonic opinion dynamics with zealots.
//!
//! Opinions live on the unit simplex; free vertices average their
//! out-neighbours and zealots are pinned to an extreme opinion. On top of the
//! steady-state solver this crate provides the targeting problem (choose `t`
//! vertices to convert so that one opinion's share is maximal), a greedy
//! algorithm with a brute-force oracle, a convex relaxation maximised by
//! projected gradient ascent, and a two-player game engine.

pub mod error;
pub mod game;
pub mod graph;
pub mod greedy;
pub mod heatmap;
pub mod linalg;
pub mod opinion;
pub mod props;
pub mod relax;

pub use error::{Error, Result};
pub use graph::{Graph, GraphFamily, Layout, VertexSet};
pub use opinion::{OpinionField, ScalarOpinion, ZealotConfig};

/// Invariant-assertion tolerance used across the crate.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Values within this distance of the best candidate count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Hex SHA-256 of a JSON value's compact serialization. `serde_json` keeps
/// object keys sorted, so equal values hash equally.
pub fn spec_hash(value: &serde_json::Value) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
