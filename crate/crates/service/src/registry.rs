//! Session and graph storage. Each session sits behind its own async mutex
//! so mutations of one session are totally ordered while distinct sessions
//! proceed in parallel.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use zealot_core::game::{GameState, Move, Player};
use zealot_core::graph::{generate, Graph, GraphFamily, Layout, VertexSet};

use crate::error::ApiError;

#[derive(Debug)]
pub struct GraphEntry {
    pub id: String,
    pub family: GraphFamily,
    pub graph: Arc<Graph>,
    pub layout: Layout,
}

/// Graph id: leading 16 hex digits of the family spec hash.
pub fn graph_id(family: &GraphFamily) -> String {
    let value = serde_json::to_value(family).expect("families serialize");
    zealot_core::spec_hash(&value)[..16].to_string()
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub graph: Arc<GraphEntry>,
    pub players: [Player; 2],
    pub state: GameState,
    pub created_unix: u64,
}

/// On-disk form; the state is rebuilt by replaying the history.
#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub family: GraphFamily,
    pub players: [Player; 2],
    pub seeds: [VertexSet; 2],
    pub rounds: Option<usize>,
    pub history: Vec<Move>,
    pub created_unix: u64,
}

impl Session {
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            session_id: self.id.clone(),
            family: self.graph.family.clone(),
            players: self.players.clone(),
            seeds: self.state.initial().clone(),
            rounds: self.state.rounds(),
            history: self.state.history().to_vec(),
            created_unix: self.created_unix,
        }
    }
}

pub struct Slot {
    pub session: tokio::sync::Mutex<Session>,
    touched: Mutex<Instant>,
}

pub struct Registry {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    graphs: RwLock<HashMap<String, Arc<GraphEntry>>>,
    ttl: Duration,
    snapshot_dir: Option<PathBuf>,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Registry {
    pub fn new(ttl: Duration, snapshot_dir: Option<PathBuf>) -> Self {
        Self { sessions: RwLock::default(), graphs: RwLock::default(), ttl, snapshot_dir }
    }

    /// Generates `family` once and shares it between sessions.
    pub fn graph(&self, family: &GraphFamily) -> Result<Arc<GraphEntry>, ApiError> {
        let id = graph_id(family);
        if let Some(entry) = self.graph_by_id(&id) {
            return Ok(entry);
        }
        let e = generate(family)?;
        let entry = Arc::new(GraphEntry { id: id.clone(), family: family.clone(), graph: Arc::new(e.graph), layout: e.layout });
        let mut graphs = self.graphs.write().expect("graph registry poisoned");
        Ok(Arc::clone(graphs.entry(id).or_insert(entry)))
    }

    pub fn graph_by_id(&self, id: &str) -> Option<Arc<GraphEntry>> {
        self.graphs.read().expect("graph registry poisoned").get(id).cloned()
    }

    pub fn insert(&self, session: Session) -> Arc<Slot> {
        let id = session.id.clone();
        let slot = Arc::new(Slot { session: tokio::sync::Mutex::new(session), touched: Mutex::new(Instant::now()) });
        self.sessions.write().expect("session registry poisoned").insert(id, Arc::clone(&slot));
        slot
    }

    /// Live session by id; refreshes its expiry.
    pub fn get(&self, id: &str) -> Option<Arc<Slot>> {
        let slot = self.sessions.read().expect("session registry poisoned").get(id).cloned()?;
        let mut touched = slot.touched.lock().expect("session clock poisoned");
        if touched.elapsed() > self.ttl {
            drop(touched);
            self.remove(id);
            return None;
        }
        *touched = Instant::now();
        drop(touched);
        Some(slot)
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session registry poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn remove(&self, id: &str) {
        self.sessions.write().expect("session registry poisoned").remove(id);
        if let Some(path) = self.snapshot_path(id) {
            let _ = std::fs::remove_file(path);
        }
    }

    /// Drops expired sessions; returns how many were removed.
    pub fn sweep(&self) -> usize {
        let expired: Vec<String> = self
            .sessions
            .read()
            .expect("session registry poisoned")
            .iter()
            .filter(|(_, slot)| slot.touched.lock().expect("session clock poisoned").elapsed() > self.ttl)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            self.remove(id);
        }
        expired.len()
    }

    fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        // ids are generated uuids; anything else never reaches the disk
        let safe = id.chars().all(|c| c.is_ascii_hexdigit() || c == '-');
        self.snapshot_dir.as_ref().filter(|_| safe).map(|d| d.join(format!("{id}.json")))
    }

    /// Writes the session snapshot when persistence is enabled. Failures
    /// are logged; the in-memory session stays authoritative.
    pub fn persist(&self, session: &Session) {
        let Some(path) = self.snapshot_path(&session.id) else { return };
        let text = serde_json::to_string(&session.snapshot()).expect("snapshots serialize");
        let tmp = path.with_extension("json.tmp");
        if let Err(e) = std::fs::write(&tmp, text).and_then(|_| std::fs::rename(&tmp, &path)) {
            tracing::warn!(session = %session.id, error = %e, "snapshot write failed");
        }
    }

    /// Restores every snapshot in the snapshot directory.
    pub fn restore(&self) -> usize {
        let Some(dir) = &self.snapshot_dir else { return 0 };
        let Ok(entries) = std::fs::read_dir(dir) else { return 0 };
        let mut restored = 0;
        for entry in entries.flatten() {
            let path = entry.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let loaded = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<Snapshot>(&t).map_err(|e| e.to_string()))
                .and_then(|s| self.revive(s).map_err(|e| e.message));
            match loaded {
                Ok(()) => restored += 1,
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping snapshot"),
            }
        }
        restored
    }

    fn revive(&self, s: Snapshot) -> Result<(), ApiError> {
        let graph = self.graph(&s.family)?;
        let state = GameState::replay(Arc::clone(&graph.graph), graph.id.clone(), s.seeds, s.rounds, &s.history)?;
        self.insert(Session { id: s.session_id, graph, players: s.players, state, created_unix: s.created_unix });
        Ok(())
    }
}
