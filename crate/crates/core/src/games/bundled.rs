//! The bundled test games.

use crate::error::{PohpError, Result};
use crate::games::efg::{GameBuilder, GameDescription};
use crate::games::form::PohpFormGame;
use crate::games::markov::{markov_to_pohp_form, MarkovModel, Observability};
use crate::tree::TreeConfig;

pub const BUNDLED_IDS: [&str; 4] = ["kuhn", "matching_pennies", "theorem1_gadget", "chain_mdp3"];

/// Serialized matching pennies; player 1 wins on a match.
pub const MATCHING_PENNIES: &str = "\
# matching pennies: player 2 moves without seeing player 1's coin
players 2
/      player 1 @p1 H T
/H     player 2 @p2 H T
/T     player 2 @p2 H T
/H/H   terminal 1 -1
/H/T   terminal -1 1
/T/H   terminal -1 1
/T/T   terminal 1 -1
";

pub fn matching_pennies() -> GameDescription {
    GameDescription::parse(MATCHING_PENNIES).expect("bundled game parses")
}

const CARDS: [&str; 3] = ["J", "Q", "K"];

/// Three-card Kuhn poker with a one-chip ante; chance deals player 1's card, then player 2's.
pub fn kuhn() -> GameDescription {
    let third = 1.0 / 3.0;
    let mut b = GameBuilder::new(2);
    b.chance(&[], Some("deal1"), &[("J", third), ("Q", third), ("K", third)]);
    for (i, c1) in CARDS.iter().enumerate() {
        let rest: Vec<(&str, f64)> = CARDS.iter().filter(|c| *c != c1).map(|c| (*c, 0.5)).collect();
        b.chance(&[c1], Some(&format!("deal2:{c1}")), &rest);
        for (j, c2) in CARDS.iter().enumerate() {
            if i == j {
                continue;
            }
            let win = if i > j { 1.0 } else { -1.0 };
            let l1_cb = format!("{c1}:cb");
            let l2_b = format!("{c2}:b");
            let l2_c = format!("{c2}:c");
            b.decision(&[c1, c2], 0, c1, &["bet", "check"]);
            b.decision(&[c1, c2, "bet"], 1, &l2_b, &["call", "fold"]);
            b.terminal(&[c1, c2, "bet", "call"], &[2.0 * win, -2.0 * win]);
            b.terminal(&[c1, c2, "bet", "fold"], &[1.0, -1.0]);
            b.decision(&[c1, c2, "check"], 1, &l2_c, &["bet", "check"]);
            b.terminal(&[c1, c2, "check", "check"], &[win, -win]);
            b.decision(&[c1, c2, "check", "bet"], 0, &l1_cb, &["call", "fold"]);
            b.terminal(&[c1, c2, "check", "bet", "call"], &[2.0 * win, -2.0 * win]);
            b.terminal(&[c1, c2, "check", "bet", "fold"], &[-1.0, 1.0]);
        }
    }
    b.build().expect("bundled game is valid")
}

/// A deterministic three-state chain: `advance` moves right (2 is absorbing), `stay` stays.
/// Acting in state 2 pays 1; discount 0.9 over three stages from state 0.
pub fn chain_mdp3_model() -> MarkovModel {
    let next = |s: usize, a: usize| if a == 0 { (s + 1).min(2) } else { s };
    let transitions = (0..3)
        .map(|s| {
            (0..2)
                .map(|a| {
                    let mut row = vec![0.0; 3];
                    row[next(s, a)] = 1.0;
                    row
                })
                .collect()
        })
        .collect();
    let rewards = (0..3).map(|s| vec![vec![if s == 2 { 1.0 } else { 0.0 }]; 2]).collect();
    MarkovModel {
        states: 3,
        actions: vec![vec!["advance".into(), "stay".into()]],
        transitions,
        rewards,
        initial: vec![1.0, 0.0, 0.0],
        discount: 0.9,
        horizon: Some(3),
        observability: vec![Observability::Full],
    }
}

pub fn chain_mdp3() -> Result<PohpFormGame> {
    markov_to_pohp_form(&chain_mdp3_model(), &TreeConfig::default())
}

/// A bundled game: a game in POHP form, or the standalone forgetting gadget.
#[derive(Debug, Clone)]
pub enum Bundled {
    Form(PohpFormGame),
    Gadget,
}

pub fn load_bundled(id: &str, config: &TreeConfig) -> Result<Bundled> {
    match id {
        "kuhn" => Ok(Bundled::Form(PohpFormGame::new(kuhn(), config)?)),
        "matching_pennies" => Ok(Bundled::Form(PohpFormGame::new(matching_pennies(), config)?)),
        "theorem1_gadget" => Ok(Bundled::Gadget),
        "chain_mdp3" => Ok(Bundled::Form(markov_to_pohp_form(&chain_mdp3_model(), config)?)),
        other => Err(PohpError::Validation(format!(
            "unknown game {other:?}; bundled games are {}",
            BUNDLED_IDS.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_load() {
        for id in BUNDLED_IDS {
            assert!(load_bundled(id, &TreeConfig::default()).is_ok(), "{id}");
        }
        assert!(matches!(load_bundled("go", &TreeConfig::default()), Err(PohpError::Validation(_))));
    }
}
