use std::sync::Arc;

use zealot_core::game::{ai_move, play_match, GameState, GameView, Outcome, Player};
use zealot_core::graph::{generate, Graph, GraphFamily, VertexSet};
use zealot_core::greedy::{greedy, TargetingProblem, TieBreak};
use zealot_core::opinion::solve_harmonic;
use zealot_core::{Error, ZealotConfig};

fn empty() -> [VertexSet; 2] {
    [VertexSet::empty(), VertexSet::empty()]
}

fn family(f: GraphFamily) -> Arc<Graph> {
    Arc::new(generate(&f).unwrap().graph)
}

#[test]
fn greedy_reply_to_grid_center_is_a_neighbour() {
    let g = family(GraphFamily::SquareGrid { width: 11, height: 11 });
    let s = GameState::new(g, "grid", empty(), None).unwrap().apply_move(1, 60).unwrap();
    let v = ai_move(&s, &Player::Greedy).unwrap();
    assert!([49, 59, 61, 71].contains(&v), "picked {v}");
    let v = ai_move(&s, &Player::Relaxation { epsilon: 0.15 }).unwrap();
    assert!([49, 59, 61, 71].contains(&v), "picked {v}");
}

#[test]
fn greedy_player_is_single_step_greedy() {
    let g = family(GraphFamily::RandomGeometric { n: 30, radius: 0.35, seed: 3 });
    let mut s = GameState::new(Arc::clone(&g), "rg", empty(), None).unwrap();
    for (p, v) in [(1, 4), (2, 17), (1, 9)] {
        s = s.apply_move(p, v).unwrap();
    }
    let z = ZealotConfig::new(30, vec![s.zealots()[1].clone(), s.zealots()[0].clone()]).unwrap();
    let problem = TargetingProblem::new(&g, z, 0, 1).unwrap();
    let expected = greedy(&problem, TieBreak::LowestId).unwrap().chosen.as_slice()[0];
    assert_eq!(ai_move(&s, &Player::Greedy).unwrap(), expected);
}

#[test]
fn shares_match_full_solve_and_sum_to_one() {
    let g = family(GraphFamily::TriLattice { width: 5, height: 4 });
    let mut s = GameState::new(Arc::clone(&g), "tri", empty(), None).unwrap();
    for (p, v) in [(1, 0), (2, 19), (1, 7), (2, 12)] {
        s = s.apply_move(p, v).unwrap();
        let Some([a, b]) = s.shares() else { continue };
        assert!((a + b - 1.0).abs() <= 1e-9);
        let z = ZealotConfig::new(20, s.zealots().to_vec()).unwrap();
        let full = solve_harmonic(&g, &z).unwrap();
        assert!((full.influence(0) - a).abs() <= 1e-12);
        assert!((full.influence(1) - b).abs() <= 1e-12);
    }
}

#[test]
fn replay_reproduces_the_state() {
    let g = family(GraphFamily::Ladder { length: 6 });
    let seeds = [VertexSet::singleton(0), VertexSet::empty()];
    let start = GameState::new(Arc::clone(&g), "ladder", seeds.clone(), Some(3)).unwrap();
    let players = [Player::Random { seed: 5 }, Player::Greedy];
    let (end, _) = play_match(start, &players).unwrap();
    let again = GameState::replay(g, "ladder", seeds, Some(3), end.history()).unwrap();
    assert_eq!(again.view(), end.view());
    assert_eq!(again.shares(), end.shares());
}

#[test]
fn apply_move_is_pure() {
    let g = family(GraphFamily::Cycle { n: 9 });
    let s = GameState::new(g, "c9", empty(), None).unwrap().apply_move(1, 2).unwrap();
    let a = s.apply_move(2, 6).unwrap();
    let b = s.apply_move(2, 6).unwrap();
    assert_eq!(a.view(), b.view());
    assert_eq!(s.history().len(), 1);
}

#[test]
fn mirror_position_gives_equal_shares() {
    let g = family(GraphFamily::SquareGrid { width: 6, height: 3 });
    // (1,2) and (6,2) are swapped by the left-right mirror
    let s = GameState::new(g, "g", [VertexSet::singleton(6), VertexSet::singleton(11)], None).unwrap();
    let [a, b] = s.shares().unwrap();
    assert!((a - 0.5).abs() <= 1e-12 && (b - 0.5).abs() <= 1e-12);
}

#[test]
fn view_round_trips_through_json() {
    let g = family(GraphFamily::Star { leaves: 5 });
    let s = GameState::new(g, "star", empty(), Some(2)).unwrap().apply_move(1, 0).unwrap();
    let json = serde_json::to_string(&s.view()).unwrap();
    let back: GameView = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s.view());
    assert_eq!(back.shares, None);
    assert_eq!(back.turn, 2);
}

#[test]
fn legal_moves_shrink_and_empty_board_errors() {
    let g = family(GraphFamily::Cycle { n: 3 });
    let mut s = GameState::new(g, "c3", empty(), None).unwrap();
    assert_eq!(s.legal_moves().len(), 3);
    s = s.apply_move(1, 0).unwrap();
    assert_eq!(s.legal_moves().as_slice(), &[1, 2]);
    s = s.apply_move(2, 1).unwrap().apply_move(1, 2).unwrap();
    assert!(s.legal_moves().is_empty());
    assert_eq!(ai_move(&s, &Player::Greedy).unwrap_err(), Error::GameOver);
}

#[test]
fn greedy_beats_random_on_geometric_graphs() {
    let mut wins = 0;
    for seed in 0..20u64 {
        let g = family(GraphFamily::RandomGeometric { n: 50, radius: 0.3, seed });
        let greedy_first = seed % 2 == 0;
        let players = if greedy_first {
            [Player::Greedy, Player::Random { seed }]
        } else {
            [Player::Random { seed }, Player::Greedy]
        };
        let start = GameState::new(g, "rg", empty(), Some(3)).unwrap();
        let (_, record) = play_match(start, &players).unwrap();
        let share = record.final_shares.unwrap()[if greedy_first { 0 } else { 1 }];
        if share > 0.5 {
            wins += 1;
        }
    }
    assert!(wins >= 18, "greedy won {wins}/20");
}

#[test]
fn greedy_mirror_match_on_cycle_is_drawn() {
    let g = family(GraphFamily::Cycle { n: 12 });
    let start = GameState::new(g, "c12", empty(), Some(3)).unwrap();
    let (_, record) = play_match(start, &[Player::Greedy, Player::Greedy]).unwrap();
    let moves: Vec<usize> = record.moves.iter().map(|m| m.vertex).collect();
    assert_eq!(moves, [0, 1, 2, 3, 4, 5]);
    assert_eq!(record.outcome, Some(Outcome::Draw));
}

#[test]
fn second_player_wins_directed_cycle() {
    for n in [5usize, 7, 10] {
        let g = family(GraphFamily::DirectedCycle { n });
        for first in 0..n {
            let s = GameState::new(Arc::clone(&g), "dc", empty(), Some(1)).unwrap().apply_move(1, first).unwrap();
            let reply = ai_move(&s, &Player::Greedy).unwrap();
            let end = s.apply_move(2, reply).unwrap();
            assert_eq!(end.outcome(), Some(Outcome::Player2));
            let share = end.shares().unwrap()[1];
            assert!((share - (n as f64 - 1.0) / n as f64).abs() <= 1e-12);
        }
    }
}

#[test]
fn brute_small_falls_back_to_greedy_on_large_boards() {
    let g = family(GraphFamily::SquareGrid { width: 9, height: 9 });
    let s = GameState::new(g, "g9", empty(), None).unwrap().apply_move(1, 40).unwrap();
    assert_eq!(ai_move(&s, &Player::BruteSmall).unwrap(), ai_move(&s, &Player::Greedy).unwrap());
}

#[test]
fn humans_cannot_play_matches() {
    let g = family(GraphFamily::Cycle { n: 5 });
    let s = GameState::new(g, "c5", empty(), None).unwrap();
    assert!(matches!(play_match(s.clone(), &[Player::Human, Player::Greedy]), Err(Error::InvalidParams(_))));
    assert!(matches!(ai_move(&s, &Player::Human), Err(Error::InvalidParams(_))));
}

#[test]
fn not_strongly_connected_graph_is_rejected() {
    let g = Arc::new(Graph::from_arcs(3, true, [(0, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)]).unwrap());
    assert_eq!(GameState::new(g, "x", empty(), None).unwrap_err(), Error::NotStronglyConnected);
}
