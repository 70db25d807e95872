//! `zealot`: experiment runner and game server.
//!
//! Every experiment command reads an [`ExperimentSpec`] (from `--spec`, with
//! individual flags overriding its fields) and writes deterministic output
//! whose header carries the spec hash.

mod spec;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use zealot_core::game::{play_match, GameState, MatchRecord, Outcome, Player};
use zealot_core::graph::{generate, GraphFamily};
use zealot_core::greedy::{brute_force, greedy, TargetingProblem, TieBreak, DEFAULT_BRUTE_FORCE_CAP};
use zealot_core::heatmap::{energy_map, phi_map, Heatmap};
use zealot_core::props::{run_property_suite, Mutation};
use zealot_core::relax::{localization_mass, relaxed_select, MaximizeOptions};
use zealot_core::{spec_hash, VertexSet};
use zealot_service::ServiceConfig;

use crate::spec::{graph_from_flags, parse_eps_list, parse_players, CliResult, ExperimentSpec, GraphSource, Resolved};

#[derive(Parser)]
#[command(name = "zealot", version, about = "Influence targeting with zealots: experiments and game server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalized share gained by converting each free vertex.
    EnergyMap {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Normalized maximizer of the relaxed objective, one map per epsilon.
    PhiMap {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Hop radius around the opposing zealots for the localization mass.
        #[arg(long, default_value_t = 2)]
        radius: usize,
    },
    /// Greedy targeting with `--budget` picks.
    Greedy {
        #[command(flatten)]
        spec: SpecArgs,
        /// Also solve exactly by enumeration.
        #[arg(long)]
        exact: bool,
    },
    /// Targeting by repeatedly maximizing the relaxation, once per epsilon.
    RelaxSelect {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Games between two automatic players.
    Match {
        #[command(flatten)]
        spec: SpecArgs,
        /// Two strategies: greedy, random, brute_small, relaxation[:eps].
        #[arg(long)]
        players: Option<String>,
        /// Moves per player, or `full` to play until the board is full.
        #[arg(long)]
        rounds: Option<String>,
        #[arg(long)]
        matches: Option<usize>,
        /// Reseed the random geometric graph for every match.
        #[arg(long)]
        vary_graph: bool,
        /// Swap seats on every other match.
        #[arg(long)]
        alternate: bool,
    },
    /// Randomized checks of the model's structural properties.
    Props {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MutationArg::None)]
        mutation: MutationArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// HTTP API for interactive games.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Idle seconds before a session is dropped.
        #[arg(long, default_value_t = 3600)]
        session_ttl: u64,
        #[arg(long, default_value_t = 5000)]
        ai_budget_ms: u64,
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// ExperimentSpec JSON file; the flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Family JSON, edge-list path, or family name used with --params.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    params: Option<String>,
    /// JSON list of zealot sets; entries are ids or [x, y] coordinates.
    #[arg(long)]
    zealots: Option<String>,
    /// 1-based index of the authority being optimized.
    #[arg(long = "m")]
    m: Option<usize>,
    /// Comma separated epsilons; `frobenius` picks the Laplacian heuristic.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    Gradient,
}

impl SpecArgs {
    fn build(&self) -> CliResult<ExperimentSpec> {
        let graph = match &self.graph {
            Some(g) => Some(graph_from_flags(g, self.params.as_deref())?),
            None if self.params.is_some() => return Err("--params needs --graph".into()),
            None => None,
        };
        let mut spec = match (&self.spec, graph) {
            (Some(path), graph) => {
                let mut spec = ExperimentSpec::load(path)?;
                if let Some(g) = graph {
                    spec.graph = g;
                }
                spec
            }
            (None, Some(g)) => serde_json::from_value(json!({ "graph": g }))?,
            (None, None) => return Err("either --spec or --graph is required".into()),
        };
        if let Some(z) = &self.zealots {
            spec.zealots = serde_json::from_str(z).map_err(|e| format!("--zealots: {e}"))?;
        }
        if let Some(m) = self.m {
            spec.m = m;
        }
        if let Some(e) = &self.eps {
            spec.eps = parse_eps_list(e)?;
        }
        if let Some(b) = self.budget {
            spec.budget = b;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(o) = &self.out {
            spec.out = Some(o.clone());
        }
        Ok(spec)
    }
}

fn header(command: &str, r: &Resolved) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.into()),
        ("spec_hash".into(), r.hash.clone()),
        ("spec".into(), r.canonical.to_string()),
    ]
}

fn header_json(h: &[(String, String)]) -> Value {
    Value::Object(h.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()).into()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &impl Serialize) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn format_for(format: Option<Format>, out: Option<&Path>) -> Format {
    format.unwrap_or(match out.and_then(|p| p.extension()) {
        Some(ext) if ext == "json" => Format::Json,
        _ => Format::Csv,
    })
}

fn render(map: &Heatmap, h: &[(String, String)], format: Format) -> CliResult<String> {
    Ok(match format {
        Format::Csv => map.to_csv(h),
        Format::Json => pretty(&map.to_json(h))?,
    })
}

/// `maps/phi.csv` with several epsilons becomes `maps/phi-eps0.15.csv`, ...
fn per_eps_path(out: &Path, eps: f64) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}-eps{eps}.{}", ext.to_string_lossy()),
        None => format!("{stem}-eps{eps}"),
    };
    out.with_file_name(name)
}

fn energy_map_cmd(args: &SpecArgs, format: Option<Format>) -> CliResult<()> {
    let spec = args.build()?;
    let r = spec.resolve()?;
    let m = r.authority(spec.m)?;
    let map = energy_map(&r.graph, &r.layout, &r.zealots()?, m)?;
    if map.degenerate {
        eprintln!("warning: every candidate scores the same; map is all zeros");
    }
    let out = spec.out.as_deref();
    emit(out, &render(&map, &header("energy-map", &r), format_for(format, out))?)
}

fn phi_map_cmd(args: &SpecArgs, format: Option<Format>, radius: usize) -> CliResult<()> {
    let spec = args.build()?;
    let r = spec.resolve()?;
    let m = r.authority(spec.m)?;
    let z = r.zealots()?;
    let out = spec.out.as_deref();
    let format = format_for(format, out);
    // Independent maximizations; outputs are written afterwards in input order.
    let maps: Vec<CliResult<Heatmap>> = std::thread::scope(|scope| {
        let handles: Vec<_> = r
            .eps
            .iter()
            .map(|&eps| {
                let (r, z) = (&r, &z);
                scope.spawn(move || Ok(phi_map(&r.graph, &r.layout, z, m, eps, &MaximizeOptions::default())?))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("maximizer thread panicked")).collect()
    });
    let mut stdout = String::new();
    for (eps, map) in r.eps.iter().zip(maps) {
        let map = map?;
        let phi: Vec<f64> = map.entries.iter().map(|e| e.value.unwrap_or(0.0)).collect();
        let mass = localization_mass(&r.graph, &phi, z.opposing(m).as_slice(), radius);
        let mut h = header("phi-map", &r);
        h.push(("epsilon".into(), eps.to_string()));
        h.push((format!("localization_radius{radius}"), mass.to_string()));
        let text = render(&map, &h, format)?;
        match out {
            Some(path) if r.eps.len() > 1 => emit(Some(&per_eps_path(path, *eps)), &text)?,
            Some(path) => emit(Some(path), &text)?,
            None => stdout.push_str(&text),
        }
    }
    emit(None, &stdout)
}

fn greedy_cmd(args: &SpecArgs, exact: bool) -> CliResult<()> {
    let spec = args.build()?;
    let r = spec.resolve()?;
    let p = TargetingProblem::new(&r.graph, r.zealots()?, r.authority(spec.m)?, spec.budget)?;
    let solution = greedy(&p, TieBreak::LowestId)?;
    let mut doc = json!({"header": header_json(&header("greedy", &r)), "greedy": solution});
    if exact {
        let best = brute_force(&p, DEFAULT_BRUTE_FORCE_CAP)?;
        doc["ratio"] = json!(solution.value / best.value);
        doc["exact"] = serde_json::to_value(best)?;
    }
    emit(spec.out.as_deref(), &pretty(&doc)?)
}

fn relax_select_cmd(args: &SpecArgs) -> CliResult<()> {
    let spec = args.build()?;
    let r = spec.resolve()?;
    let p = TargetingProblem::new(&r.graph, r.zealots()?, r.authority(spec.m)?, spec.budget)?;
    let runs = r
        .eps
        .iter()
        .map(|&eps| {
            let s = relaxed_select(&p, eps, &MaximizeOptions::default(), TieBreak::LowestId)?;
            Ok(json!({"epsilon": eps, "solution": s}))
        })
        .collect::<CliResult<Vec<Value>>>()?;
    let doc = json!({"header": header_json(&header("relax-select", &r)), "runs": runs});
    emit(spec.out.as_deref(), &pretty(&doc)?)
}

#[derive(Serialize)]
struct MatchEntry {
    index: usize,
    /// Players swapped seats, so the second listed strategy moved first.
    swapped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph_seed: Option<u64>,
    record: MatchRecord,
}

#[derive(Serialize, Default)]
struct MatchSummary {
    matches: usize,
    /// Wins of the first and second listed strategy.
    strategy_wins: [usize; 2],
    /// Wins of whoever moved first and second.
    seat_wins: [usize; 2],
    draws: usize,
    /// Mean final share of the first listed strategy.
    mean_share: Option<f64>,
}

fn reseed(p: &Player, offset: u64) -> Player {
    match p {
        Player::Random { seed } => Player::Random { seed: seed.wrapping_add(offset) },
        other => other.clone(),
    }
}

fn match_cmd(
    args: &SpecArgs,
    players: Option<&str>,
    rounds: Option<&str>,
    matches: Option<usize>,
    vary_graph: bool,
    alternate: bool,
) -> CliResult<()> {
    let mut spec = args.build()?;
    if let Some(p) = players {
        spec.players = Some(parse_players(p, spec.seed)?);
    }
    if let Some(r) = rounds {
        spec.rounds = if r == "full" { None } else { Some(r.parse().map_err(|e| format!("--rounds: {e}"))?) };
    }
    if let Some(k) = matches {
        spec.matches = k;
    }
    spec.vary_graph |= vary_graph;
    spec.alternate |= alternate;
    let players = spec.players.clone().ok_or("--players is required")?;
    let r = spec.resolve()?;
    let seeds: [VertexSet; 2] = match r.sets.len() {
        0 => [VertexSet::empty(), VertexSet::empty()],
        2 => [r.sets[0].clone(), r.sets[1].clone()],
        k => return Err(format!("a game takes 0 or 2 seed sets, got {k}").into()),
    };
    let base = match (&spec.graph, spec.vary_graph) {
        (GraphSource::Family(GraphFamily::RandomGeometric { n, radius, seed }), true) => Some((*n, *radius, *seed)),
        (_, true) => return Err("--vary-graph needs a random_geometric graph".into()),
        _ => None,
    };
    let fixed = Arc::new(r.graph.clone());
    let mut entries = Vec::with_capacity(spec.matches);
    let mut summary = MatchSummary { matches: spec.matches, ..Default::default() };
    let mut share_sum = 0.0;
    let mut shares_seen = 0;
    for index in 0..spec.matches {
        let (graph, graph_seed, family) = match base {
            Some((n, radius, seed)) => {
                let seed = seed.wrapping_add(index as u64);
                let family = GraphFamily::RandomGeometric { n, radius, seed };
                (Arc::new(generate(&family)?.graph), Some(seed), serde_json::to_value(family)?)
            }
            None => (Arc::clone(&fixed), None, r.canonical["graph"].clone()),
        };
        let swapped = spec.alternate && index % 2 == 1;
        let listed = [reseed(&players[0], index as u64), reseed(&players[1], index as u64)];
        let seated = if swapped { [listed[1].clone(), listed[0].clone()] } else { listed };
        let id = spec_hash(&family)[..16].to_string();
        let start = GameState::new(graph, id, seeds.clone(), spec.rounds)?;
        let (_, record) = play_match(start, &seated)?;
        let first_listed_seat = usize::from(swapped);
        match record.outcome {
            Some(Outcome::Draw) => summary.draws += 1,
            Some(o) => {
                let seat = usize::from(o == Outcome::Player2);
                summary.seat_wins[seat] += 1;
                summary.strategy_wins[usize::from(seat != first_listed_seat)] += 1;
            }
            None => {}
        }
        if let Some(s) = record.final_shares {
            share_sum += s[first_listed_seat];
            shares_seen += 1;
        }
        entries.push(MatchEntry { index, swapped, graph_seed, record });
    }
    summary.mean_share = (shares_seen > 0).then(|| share_sum / shares_seen as f64);
    eprintln!(
        "strategy wins {:?}, seat wins {:?}, draws {}",
        summary.strategy_wins, summary.seat_wins, summary.draws
    );
    let doc = json!({
        "header": header_json(&header("match", &r)),
        "matches": entries,
        "summary": summary,
    });
    emit(spec.out.as_deref(), &pretty(&doc)?)
}

fn props_cmd(seed: u64, mutation: MutationArg, out: Option<&Path>) -> CliResult<bool> {
    let mutation = match mutation {
        MutationArg::None => Mutation::None,
        MutationArg::Gradient => Mutation::Gradient,
    };
    let report = run_property_suite(seed, mutation)?;
    for p in &report.results {
        let mark = if p.passed { "PASS" } else { "FAIL" };
        println!("{mark} {:<28} worst={:.3e} {}", p.name, p.worst, p.detail);
    }
    if let Some(path) = out {
        emit(Some(path), &pretty(&report)?)?;
    }
    Ok(report.all_passed())
}

fn serve_cmd(addr: SocketAddr, config: ServiceConfig) -> CliResult<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(zealot_service::serve(addr, config))?;
    Ok(())
}

fn init_tracing(default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_tracing(if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" });
    let result = match cli.command {
        Command::EnergyMap { spec, format } => energy_map_cmd(&spec, format).map(|_| true),
        Command::PhiMap { spec, format, radius } => phi_map_cmd(&spec, format, radius).map(|_| true),
        Command::Greedy { spec, exact } => greedy_cmd(&spec, exact).map(|_| true),
        Command::RelaxSelect { spec } => relax_select_cmd(&spec).map(|_| true),
        Command::Match { spec, players, rounds, matches, vary_graph, alternate } => {
            match_cmd(&spec, players.as_deref(), rounds.as_deref(), matches, vary_graph, alternate).map(|_| true)
        }
        Command::Props { seed, mutation, out } => props_cmd(seed, mutation, out.as_deref()),
        Command::Serve { host, port, session_ttl, ai_budget_ms, snapshot_dir, static_dir, cors_origin } => {
            let config = ServiceConfig {
                session_ttl: Duration::from_secs(session_ttl),
                ai_budget: Duration::from_millis(ai_budget_ms),
                snapshot_dir,
                static_dir,
                cors_origin,
            };
            serve_cmd(SocketAddr::new(host, port), config).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
