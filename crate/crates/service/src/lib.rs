//! Session-oriented JSON API over the game engine.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/sessions` | `{"graph": family, "players"?: [p1, p2], "seeds"?: [[..], [..]], "rounds"?: n or null}` |
//! | GET | `/sessions/{id}` | |
//! | POST | `/sessions/{id}/moves` | `{"player": 1 or 2, "vertex": v}` |
//! | POST | `/sessions/{id}/ai-move` | |
//! | GET | `/sessions/{id}/hints` | `?strategy=greedy or relaxation&eps=0.15` |
//! | GET | `/graphs/{id}` | |
//!
//! Session responses carry `session_id`, `graph_id`, `players`, `state`
//! (the engine's game view) and `ai_moves`, the automatic moves played
//! while handling the request. Errors are `{"error": message}` with 400 for
//! invalid input, 404 for unknown ids, 409 for moves out of turn or after
//! the game ended, and 422 for occupied or out-of-range vertices.

mod error;
mod registry;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;
use zealot_core::game::{ai_move, GameState, GameView, Player, DEFAULT_ROUNDS};
use zealot_core::graph::{GraphFamily, VertexSet};
use zealot_core::heatmap::{energy_map, phi_map, Heatmap};
use zealot_core::relax::{MaximizeOptions, DEFAULT_EPSILON};
use zealot_core::ZealotConfig;

pub use error::ApiError;
pub use registry::{graph_id, Registry, Snapshot};

use registry::{now_unix, Session};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    /// Wall-clock limit for an automatic move before greedy takes over.
    pub ai_budget: Duration,
    pub snapshot_dir: Option<PathBuf>,
    /// Directory of static UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Allowed browser origin; any origin when absent.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            session_ttl: Duration::from_secs(3600),
            ai_budget: Duration::from_secs(5),
            snapshot_dir: None,
            static_dir: None,
            cors_origin: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub ai_budget: Duration,
}

fn default_players() -> [Player; 2] {
    [Player::Human, Player::Greedy]
}

fn default_rounds() -> Option<usize> {
    Some(DEFAULT_ROUNDS)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    graph: GraphFamily,
    #[serde(default = "default_players")]
    players: [Player; 2],
    #[serde(default)]
    seeds: [Vec<usize>; 2],
    /// Moves per player; `null` plays until the board is full.
    #[serde(default = "default_rounds")]
    rounds: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveRequest {
    player: u8,
    vertex: usize,
}

#[derive(Debug, Deserialize)]
struct HintQuery {
    strategy: Option<String>,
    eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AiMove {
    pub player: u8,
    pub vertex: usize,
    /// The strategy ran out of time and greedy chose this move.
    pub fallback: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_id: String,
    pub graph_id: String,
    pub players: [Player; 2],
    pub state: GameView,
    pub ai_moves: Vec<AiMove>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HintResponse {
    pub session_id: String,
    pub strategy: String,
    /// Player (1 or 2) the map is computed for.
    pub player: u8,
    pub map: Heatmap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphResponse {
    pub graph_id: String,
    pub family: GraphFamily,
    pub n: usize,
    pub directed: bool,
    pub positions: Vec<[f64; 2]>,
    pub edges: Vec<[usize; 2]>,
}

fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn respond(session: &Session, ai_moves: Vec<AiMove>) -> SessionResponse {
    SessionResponse {
        session_id: session.id.clone(),
        graph_id: session.graph.id.clone(),
        players: session.players.clone(),
        state: session.state.view(),
        ai_moves,
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> zealot_core::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?.map_err(ApiError::from)
}

/// Runs `player` under the time budget, substituting greedy on timeout.
async fn timed_move(state: &GameState, player: &Player, budget: Duration) -> Result<(usize, bool), ApiError> {
    let (s, p) = (state.clone(), player.clone());
    if matches!(player, Player::Greedy | Player::Random { .. }) {
        return Ok((blocking(move || ai_move(&s, &p)).await?, false));
    }
    match tokio::time::timeout(budget, blocking(move || ai_move(&s, &p))).await {
        Ok(v) => Ok((v?, false)),
        Err(_) => {
            tracing::info!(?player, "automatic move over budget, using greedy");
            let s = state.clone();
            Ok((blocking(move || ai_move(&s, &Player::Greedy)).await?, true))
        }
    }
}

async fn play_one(session: &mut Session, budget: Duration) -> Result<AiMove, ApiError> {
    let player = session.state.turn();
    let strategy = session.players[(player - 1) as usize].clone();
    let (vertex, fallback) = timed_move(&session.state, &strategy, budget).await?;
    session.state = session.state.apply_move(player, vertex)?;
    Ok(AiMove { player, vertex, fallback })
}

/// Plays automatic moves while an automatic player faces a human.
async fn auto_reply(session: &mut Session, budget: Duration) -> Result<Vec<AiMove>, ApiError> {
    let mut moves = Vec::new();
    while !session.state.is_over() {
        let turn = (session.state.turn() - 1) as usize;
        if !session.players[turn].is_automatic() || session.players[1 - turn].is_automatic() {
            break;
        }
        moves.push(play_one(session, budget).await?);
    }
    Ok(moves)
}

async fn create_session(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionResponse>), ApiError> {
    let req: CreateSession = parse(&body)?;
    let registry = Arc::clone(&app.registry);
    let family = req.graph.clone();
    let graph = tokio::task::spawn_blocking(move || registry.graph(&family))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let n = graph.graph.n();
    let seeds = req.seeds.map(|s| VertexSet::new(s, n));
    let [a, b] = seeds;
    let state = GameState::new(Arc::clone(&graph.graph), graph.id.clone(), [a?, b?], req.rounds)?;
    let mut session = Session {
        id: uuid::Uuid::new_v4().to_string(),
        graph,
        players: req.players,
        state,
        created_unix: now_unix(),
    };
    let ai_moves = auto_reply(&mut session, app.ai_budget).await?;
    app.registry.persist(&session);
    let response = respond(&session, ai_moves);
    app.registry.insert(session);
    Ok((StatusCode::CREATED, Json(response)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionResponse>, ApiError> {
    let slot = app.registry.get(&id).ok_or_else(|| ApiError::not_found("session"))?;
    let session = slot.session.lock().await;
    Ok(Json(respond(&session, Vec::new())))
}

async fn post_move(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionResponse>, ApiError> {
    let slot = app.registry.get(&id).ok_or_else(|| ApiError::not_found("session"))?;
    let req: MoveRequest = parse(&body)?;
    if !(1..=2).contains(&req.player) {
        return Err(ApiError::bad_request("player must be 1 or 2"));
    }
    let mut session = slot.session.lock().await;
    if session.players[(req.player - 1) as usize].is_automatic() && !session.state.is_over() {
        return Err(ApiError::conflict(format!("player {} is automatic", req.player)));
    }
    session.state = session.state.apply_move(req.player, req.vertex)?;
    let ai_moves = auto_reply(&mut session, app.ai_budget).await;
    app.registry.persist(&session);
    Ok(Json(respond(&session, ai_moves?)))
}

async fn post_ai_move(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionResponse>, ApiError> {
    let slot = app.registry.get(&id).ok_or_else(|| ApiError::not_found("session"))?;
    let mut session = slot.session.lock().await;
    if session.state.is_over() {
        return Err(ApiError::conflict("game is over"));
    }
    let turn = session.state.turn();
    if !session.players[(turn - 1) as usize].is_automatic() {
        return Err(ApiError::conflict(format!("player {turn} is human")));
    }
    let played = play_one(&mut session, app.ai_budget).await?;
    app.registry.persist(&session);
    Ok(Json(respond(&session, vec![played])))
}

async fn get_hints(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HintQuery>,
) -> Result<Json<HintResponse>, ApiError> {
    let slot = app.registry.get(&id).ok_or_else(|| ApiError::not_found("session"))?;
    let strategy = q.strategy.unwrap_or_else(|| "greedy".into());
    let eps = q.eps.unwrap_or(DEFAULT_EPSILON);
    if strategy != "greedy" && strategy != "relaxation" {
        return Err(ApiError::bad_request(format!("unknown strategy {strategy:?}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ApiError::bad_request("eps must be positive"));
    }
    let (state, graph) = {
        let session = slot.session.lock().await;
        (session.state.clone(), Arc::clone(&session.graph))
    };
    if state.is_over() {
        return Err(ApiError::conflict("game is over"));
    }
    let player = state.turn();
    let m = (player - 1) as usize;
    if state.zealots()[1 - m].is_empty() {
        return Err(ApiError::conflict("hints need an opposing vertex on the board"));
    }
    let relaxation = strategy == "relaxation";
    let map = blocking(move || {
        let z = ZealotConfig::new(graph.graph.n(), state.zealots().to_vec())?;
        if relaxation {
            phi_map(&graph.graph, &graph.layout, &z, m, eps, &MaximizeOptions::default())
        } else {
            energy_map(&graph.graph, &graph.layout, &z, m)
        }
    })
    .await?;
    Ok(Json(HintResponse { session_id: id, strategy, player, map }))
}

async fn get_graph(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<GraphResponse>, ApiError> {
    let entry = app.registry.graph_by_id(&id).ok_or_else(|| ApiError::not_found("graph"))?;
    Ok(Json(GraphResponse {
        graph_id: entry.id.clone(),
        family: entry.family.clone(),
        n: entry.graph.n(),
        directed: entry.graph.is_directed(),
        positions: entry.layout.positions.clone(),
        edges: if entry.graph.is_directed() {
            entry.graph.arcs().map(|(i, j, _)| [i, j]).collect()
        } else {
            entry.graph.edges().map(|(i, j, _)| [i, j]).collect()
        },
    }))
}

pub fn router(app: AppState, config: &ServiceConfig) -> Router {
    let cors = match config.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => CorsLayer::new().allow_origin(origin),
        _ => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/moves", post(post_move))
        .route("/sessions/{id}/ai-move", post(post_ai_move))
        .route("/sessions/{id}/hints", get(get_hints))
        .route("/graphs/{id}", get(get_graph))
        .with_state(app);
    let api = match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    api.layer(cors)
}

/// Registry plus router, with snapshots restored.
pub fn build(config: &ServiceConfig) -> (Arc<Registry>, Router) {
    if let Some(dir) = &config.snapshot_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            tracing::warn!(dir = %dir.display(), error = %e, "cannot create snapshot directory");
        }
    }
    let registry = Arc::new(Registry::new(config.session_ttl, config.snapshot_dir.clone()));
    let restored = registry.restore();
    if restored > 0 {
        tracing::info!(restored, "sessions restored from snapshots");
    }
    let app = AppState { registry: Arc::clone(&registry), ai_budget: config.ai_budget };
    (registry, router(app, config))
}

/// Serves until interrupted.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let (registry, app) = build(&config);
    let period = (config.session_ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let dropped = registry.sweep();
            if dropped > 0 {
                tracing::info!(dropped, "expired sessions removed");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
