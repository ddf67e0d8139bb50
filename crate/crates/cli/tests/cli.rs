//! End-to-end checks of the `si-bench` binary: subcommand behavior, exit
//! codes, and file round-trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_si-bench"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("si-bench-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_lists_equilibria_and_pone() {
    let catalog = configs().join("catalog.toml");
    let out = run(&["solve", "--game", catalog.to_str().unwrap(), "--id", "coordination"]);
    let text = stdout_of(&out);
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let game = &parsed[0];
    assert_eq!(game["id"], "coordination");
    assert_eq!(game["equilibria"]["profiles"].as_array().unwrap().len(), 3);
    let pone = game["pone"]["profiles"].as_array().unwrap();
    assert_eq!(pone.len(), 1);
    assert_eq!(pone[0]["payoffs"]["p1"], 2.0);
}

#[test]
fn solve_rejects_malformed_input_with_exit_2() {
    let dir = tmp_dir("malformed");
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "definitely not [ a catalog").unwrap();
    let out = run(&["solve", "--game", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_rejects_oversized_games_with_exit_3() {
    let dir = tmp_dir("oversized");
    let path = dir.join("big.toml");
    let row = "[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]";
    let matrix = format!("[{row}, {row}, {row}, {row}, {row}, {row}]");
    std::fs::write(
        &path,
        format!(
            "[[games]]\nid = \"big\"\nn_actions = 6\npayoff_1 = {matrix}\npayoff_2 = {matrix}\n"
        ),
    )
    .unwrap();
    let out = run(&["solve", "--game", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn convention_of_demo_catalog_picks_the_efficient_profile() {
    let catalog = configs().join("catalog.toml");
    let out = run(&["convention", "--catalog", catalog.to_str().unwrap()]);
    let text = stdout_of(&out);
    assert!(text.contains("[coordination]"));
    assert!(text.contains("s1 = [1.0, 0.0]"));
    // The battle game's welfare tie breaks toward player 1's payoff.
    assert!(text.contains("[battle]"));
    let battle = text.split("[battle]").nth(1).unwrap();
    assert!(battle.contains("s1 = [1.0, 0.0]"));
}

#[test]
fn simulate_then_regret_roundtrip() {
    let dir = tmp_dir("simulate");
    let trace_path = dir.join("trace.json");
    let config = configs().join("match_demo.toml");
    let catalog = configs().join("catalog.toml");

    stdout_of(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        trace_path.to_str().unwrap(),
    ]));

    // Rerunning writes byte-identical traces.
    let first = std::fs::read(&trace_path).unwrap();
    stdout_of(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        trace_path.to_str().unwrap(),
    ]));
    assert_eq!(first, std::fs::read(&trace_path).unwrap());

    // The fictitious-play seat has zero expected stochastic regret.
    let out = run(&[
        "regret",
        "--trace",
        trace_path.to_str().unwrap(),
        "--catalog",
        catalog.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let text = stdout_of(&out);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "trace_id,player,external,stochastic,expected_external,expected_stochastic,max_prefix_expected_external"
    );
    let seat1: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(seat1[1], "1");
    let expected_stochastic: f64 = seat1[5].parse().unwrap();
    assert!(expected_stochastic.abs() <= 1e-9);

    // And the trace file round-trips losslessly through the parser.
    let parsed = si_core::game::MatchTrace::from_json(
        &std::fs::read_to_string(&trace_path).unwrap(),
    )
    .unwrap();
    let mut rendered = parsed.to_json();
    rendered.push('\n');
    assert_eq!(rendered.as_bytes(), first.as_slice());
}

#[test]
fn certify_quick_run_passes_and_is_deterministic_across_workers() {
    let dir = tmp_dir("certify");
    let experiment = configs().join("quick_certify.toml");
    let out_1 = dir.join("w1");
    let out_4 = dir.join("w4");

    let run_1 = run(&[
        "certify",
        "--experiment",
        experiment.to_str().unwrap(),
        "--seed",
        "7",
        "--workers",
        "1",
        "--out",
        out_1.to_str().unwrap(),
    ]);
    assert_eq!(run_1.status.code(), Some(0), "{}", String::from_utf8_lossy(&run_1.stderr));

    let run_4 = run(&[
        "certify",
        "--experiment",
        experiment.to_str().unwrap(),
        "--seed",
        "7",
        "--workers",
        "4",
        "--out",
        out_4.to_str().unwrap(),
    ]);
    assert_eq!(run_4.status.code(), Some(0));

    let csv_1 = std::fs::read(out_1.join("trials.csv")).unwrap();
    let csv_4 = std::fs::read(out_4.join("trials.csv")).unwrap();
    assert_eq!(csv_1, csv_4, "per-trial CSV differs across worker counts");
    assert_eq!(
        std::fs::read(out_1.join("report.json")).unwrap(),
        std::fs::read(out_4.join("report.json")).unwrap()
    );

    // The report embeds the reproduction data.
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_1.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["master_seed"], 7);
    assert!(report["config_hash"].as_str().unwrap().len() == 64);
    assert!(report["overall_pass"].as_bool().unwrap());
}

#[test]
fn certify_requires_a_seed() {
    let experiment = configs().join("quick_certify.toml");
    let out = run(&["certify", "--experiment", experiment.to_str().unwrap()]);
    assert!(!out.status.success());
    // clap usage errors exit with 2.
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn certify_rejects_zero_trials() {
    let dir = tmp_dir("zero-trials");
    let experiment = dir.join("exp.toml");
    let catalog = configs().join("si_catalog.toml");
    std::fs::write(
        &experiment,
        format!(
            "catalog = \"{}\"\ndelta = 0.1\nepsilon = 0.05\nT = 10\ntrials = 0\nflavor = \"stochastic\"\n[[class]]\nkind = \"fictitious_play\"\n",
            catalog.display()
        ),
    )
    .unwrap();
    let out = run(&[
        "certify",
        "--experiment",
        experiment.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
