use pohp::games::bundled::{kuhn, matching_pennies, MATCHING_PENNIES};
use pohp::games::{GameDescription, PohpFormGame, Seat, SeatView};
use pohp::history::Turn;
use pohp::process::Environment;
use pohp::{History, TreeConfig};

#[test]
fn text_format_round_trips_bundled_games() {
    for game in [kuhn(), matching_pennies()] {
        assert_eq!(GameDescription::parse(&game.to_text()).unwrap(), game);
    }
    assert_eq!(GameDescription::parse(MATCHING_PENNIES).unwrap(), matching_pennies());
}

#[test]
fn seat_views_alternate_turns() {
    let game = std::sync::Arc::new(kuhn());
    let view = SeatView::new(game.clone(), Seat::Player(0));
    assert_eq!(view.first_turn(), Turn::Daimon);
    let root = view.legal_actions(&History::initial(0)).unwrap();
    assert_eq!(root.len(), 6);
    assert!(root.iter().any(|a| a.as_str() == "J.Q"));
    let after = view.legal_actions(&History::from_tokens(0, ["J.Q"])).unwrap();
    assert_eq!(after.iter().map(|a| a.as_str()).collect::<Vec<_>>(), vec!["bet", "check"]);
    let chance = SeatView::new(game, Seat::Chance);
    assert_eq!(chance.first_turn(), Turn::Agent);
}

#[test]
fn sampled_returns_track_exact_values() {
    let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
    let profile = form.uniform_profile();
    let n = 20_000;
    let mean: f64 = (0..n).map(|k| form.play_round(&profile, k as u64).unwrap().returns[0]).sum::<f64>() / n as f64;
    let exact = form.view_value(0, &profile).unwrap();
    assert!((mean - exact).abs() <= 4.0 * 2.0 / (n as f64).sqrt(), "{mean} vs {exact}");
}
