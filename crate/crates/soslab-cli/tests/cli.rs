//! End-to-end checks of the command-line interface: exit codes, record
//! streams, determinism, and trace replay through files.

use std::process::{Command, Output};

fn soslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soslab"))
        .args(args)
        .env_remove("SOSLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn decide_exit_codes() {
    let unsolvable = soslab(&["decide", "--sos", "{{1},{1,2},{1,3},{2,3}}", "--t", "1"]);
    assert_eq!(unsolvable.status.code(), Some(3));
    assert!(stdout(&unsolvable).contains("solvable=false"));
    assert!(stdout(&unsolvable).contains("reason=disconnected-graph"));

    let solvable = soslab(&["decide", "--sos", "{{1},{2}}", "--t", "0"]);
    assert_eq!(solvable.status.code(), Some(0));
    assert!(stdout(&solvable).contains("reason=zero-crashes"));

    let trivial = soslab(&["decide", "--sos", "{{}}", "--t", "7"]);
    assert_eq!(trivial.status.code(), Some(0));
    assert!(stdout(&trivial).contains("reason=trivial-empty-sos"));

    let garbled = soslab(&["decide", "--sos", "{{1},", "--t", "1"]);
    assert_eq!(garbled.status.code(), Some(2));

    let bad_flag = soslab(&["decide", "--nonsense"]);
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn bounds_record() {
    let output = soslab(&["bounds", "--d", "3", "--t", "5"]);
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(stdout(&output).trim(), "bounds d=3 t=5 lower=11 upper=12");
}

#[test]
fn run_is_deterministic_per_seed() {
    let args = [
        "run", "--protocol", "alg2", "--d", "2", "--n", "3", "--t", "1", "--seed", "42",
    ];
    let a = soslab(&args);
    let b = soslab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));

    let c = soslab(&[
        "run", "--protocol", "alg2", "--d", "2", "--n", "3", "--t", "1", "--seed", "43",
    ]);
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn seed_env_var_is_the_default() {
    let with_flag = soslab(&[
        "run", "--protocol", "alg2", "--d", "2", "--n", "3", "--t", "1", "--seed", "7",
    ]);
    let with_env = Command::new(env!("CARGO_BIN_EXE_soslab"))
        .args(["run", "--protocol", "alg2", "--d", "2", "--n", "3", "--t", "1"])
        .env("SOSLAB_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&with_flag), stdout(&with_env));
}

#[test]
fn trace_file_replays_to_identical_result() {
    let dir = std::env::temp_dir().join("soslab-cli-replay-test");
    std::fs::create_dir_all(&dir).unwrap();
    let trace_path = dir.join("run.trace");

    let original = soslab(&[
        "run", "--protocol", "alg1", "--sos", "{{1},{3},{1,2},{1,3},{2,3}}", "--n", "6", "--t",
        "1", "--seed", "9", "--crash", "p3",
    ]);
    assert_eq!(original.status.code(), Some(0));
    std::fs::write(&trace_path, stdout(&original)).unwrap();

    let replayed = soslab(&[
        "run",
        "--protocol",
        "alg1",
        "--sos",
        "{{1},{3},{1,2},{1,3},{2,3}}",
        "--n",
        "6",
        "--t",
        "1",
        "--schedule",
        trace_path.to_str().unwrap(),
    ]);
    assert_eq!(replayed.status.code(), Some(0));
    assert_eq!(stdout(&original), stdout(&replayed));
}

#[test]
fn explore_lists_both_choice_outcomes() {
    let args = ["explore", "--protocol", "alg3", "--sos", "{{0},{1}}", "--n", "1"];
    let output = soslab(&args);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert!(text.contains("output_sets={{0},{1}}"));
    // The record stream is canonical: a second invocation is byte-identical.
    assert_eq!(text, stdout(&soslab(&args)));
}

#[test]
fn adversary_violates_below_bound_and_not_above() {
    let attack = soslab(&[
        "adversary", "--protocol", "alg2-relaxed", "--d", "2", "--t", "1", "--n", "2", "--seed",
        "3",
    ]);
    assert_eq!(attack.status.code(), Some(0));
    assert!(stdout(&attack).contains("adversary violated=true"));

    let defended = soslab(&[
        "adversary", "--protocol", "alg2", "--d", "2", "--t", "1", "--n", "3", "--seed", "3",
    ]);
    assert_eq!(defended.status.code(), Some(0));
    assert!(stdout(&defended).contains("adversary violated=false"));
}

#[test]
fn valence_extraction_reports_critical_states() {
    let output = soslab(&["valence", "--protocol", "alg3", "--sos", "{{0},{1}}", "--n", "1"]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert!(text.contains("critical=true"));
    assert!(text.contains("resilience=false"));
    assert!(text.lines().any(|l| l.starts_with("summary states=")));
}

#[test]
fn valence_reads_graph_files() {
    let dir = std::env::temp_dir().join("soslab-cli-valence-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("diamond.stategraph");
    std::fs::write(
        &path,
        "soslab-stategraph v1\n\
         state 0 events [] output false\n\
         state 1 events [p1.1.out(0)] output true\n\
         state 2 events [p2.1.out(1)] output true\n",
    )
    .unwrap();
    let output = soslab(&["valence", "--graph", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).contains("asynchrony=false"));
}

#[test]
fn campaign_runs_from_config() {
    let dir = std::env::temp_dir().join("soslab-cli-campaign-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("walk.campaign");
    std::fs::write(
        &path,
        "soslab-campaign v1\n\
         protocol = alg1\n\
         sos = {{1},{3},{1,2},{1,3},{2,3}}\n\
         n = 6\n\
         t = 1\n\
         seeds = 0..20\n\
         crash-patterns = exhaustive:1\n\
         checks = safety, settled-structure, union-rule, model, completeness\n\
         completeness = witness\n",
    )
    .unwrap();
    let output = soslab(&["campaign", "--config", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));
    let text = stdout(&output);
    assert!(text.contains("check safety passed"));
    assert!(text.contains("check completeness passed"));

    // Workers must not change the verdict.
    let parallel = soslab(&[
        "campaign", "--config", path.to_str().unwrap(), "--workers", "4",
    ]);
    assert_eq!(parallel.status.code(), Some(0));

    // An empty seed override leaves seeded completeness inconclusive.
    let inconclusive_path = dir.join("inconclusive.campaign");
    std::fs::write(
        &inconclusive_path,
        "soslab-campaign v1\n\
         protocol = alg1\n\
         sos = {{1},{3},{1,2},{1,3},{2,3}}\n\
         n = 6\n\
         t = 1\n\
         seeds = 0..0\n\
         checks = completeness\n",
    )
    .unwrap();
    let inconclusive = soslab(&["campaign", "--config", inconclusive_path.to_str().unwrap()]);
    assert_eq!(inconclusive.status.code(), Some(3));
    assert!(stdout(&inconclusive).contains("check completeness inconclusive"));
}

#[test]
fn run_rejects_bad_input_vector() {
    let output = soslab(&[
        "run", "--protocol", "alg2", "--d", "2", "--n", "3", "--t", "1", "--input", "1,2",
    ]);
    assert_eq!(output.status.code(), Some(2));
}
