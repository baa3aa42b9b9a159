use std::path::PathBuf;
use std::process::{Command, Output};

use pohp_cli::{CSV_HEADER, EXIT_BAD_ARGS, EXIT_CHECK_FAILED, EXIT_IO, EXIT_LOAD, EXIT_OK, EXIT_RESOURCE};

fn pohp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pohp")).args(args).env_remove("POHP_NODE_BUDGET").output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pohp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn zero_rounds_write_the_header_only() {
    let out = pohp(&["run", "--game", "kuhn", "--rounds", "0"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), format!("{CSV_HEADER}\n"));
}

#[test]
fn gadget_regret_column_reaches_the_round_count() {
    let out = pohp(&["run", "--game", "theorem1_gadget", "--rounds", "100", "--stride", "25"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    let last: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("100,"))
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(last.iter().copied().fold(0.0, f64::max), 100.0);
}

#[test]
fn verify_exit_codes() {
    let path = scratch("report.jsonl");
    let ok = pohp(&["verify", "--out", path.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let lines = std::fs::read_to_string(&path).unwrap();
    assert!(lines.lines().count() >= 12);
    assert!(lines.lines().all(|l| l.contains(r#""pass":true"#)));
    assert_eq!(pohp(&["verify", "--tolerance", "0"]).status.code(), Some(EXIT_CHECK_FAILED));
}

#[test]
fn error_paths_have_distinct_codes() {
    assert_eq!(pohp(&["run", "--game", "chess"]).status.code(), Some(EXIT_BAD_ARGS));
    assert_eq!(pohp(&["run", "--game", "kuhn", "--deviations", "blind"]).status.code(), Some(EXIT_BAD_ARGS));
    assert_eq!(pohp(&["run", "--game", "kuhn", "--stride", "0"]).status.code(), Some(EXIT_BAD_ARGS));
    assert_eq!(pohp(&["frobnicate"]).status.code(), Some(EXIT_BAD_ARGS));

    let bad = scratch("bad.game");
    std::fs::write(&bad, "players 1\n/ player 1 a\n").unwrap();
    assert_eq!(pohp(&["inspect", "--game", bad.to_str().unwrap()]).status.code(), Some(EXIT_LOAD));

    let tiny = Command::new(env!("CARGO_BIN_EXE_pohp"))
        .args(["inspect", "--game", "kuhn"])
        .env("POHP_NODE_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(tiny.status.code(), Some(EXIT_RESOURCE));

    let unwritable = scratch("missing-dir").join("nested").join("out.csv");
    let out = pohp(&["run", "--game", "kuhn", "--rounds", "1", "--out", unwritable.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_IO));
}

#[test]
fn inspect_summaries() {
    let text = |game: &str| String::from_utf8(pohp(&["inspect", "--game", game]).stdout).unwrap();
    assert!(text("theorem1_gadget").contains("2 active states, 4 pure strategies"));
    assert!(text("matching_pennies").contains("1 active state per player"));
    let empty = scratch("empty.game");
    std::fs::write(&empty, "players 2\n/ terminal 0 0\n").unwrap();
    assert!(text(empty.to_str().unwrap()).contains("1 state (initial only)"));
}

#[test]
fn forgetful_games_run_with_remembering_players() {
    let out = pohp(&["run", "--game", "chain_mdp3", "--rounds", "50", "--stride", "50"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 1);
}
