use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use sinkatlas::corpus::CorpusId;
use sinkatlas::Game;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sinkatlas"))
        .args(args)
        .env("SINKATLAS_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn export(dir: &TempDir, id: &str) -> PathBuf {
    let path = dir.path().join(format!("{id}.json"));
    let o = run(&["corpus", "export", id, "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn corpus_list_names_every_fixture() {
    let out = stdout(&run(&["corpus", "list"]));
    for id in CorpusId::ALL {
        assert!(out.contains(id.as_str()), "{id} missing from\n{out}");
    }
    assert_eq!(out.lines().count(), CorpusId::ALL.len());
}

#[test]
fn analyze_reports_shapley_and_cog_verdicts() {
    let dir = TempDir::new().unwrap();
    let o = run(&["analyze", s(&export(&dir, "shapley"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("1 sink equilibria"));
    assert!(text.contains("pseudoconvex: true"));
    assert!(text.contains("no certificate in searched families"));

    let o = run(&["--json", "analyze", s(&export(&dir, "cog_fig2"))]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let sink = &v["sinks"][0];
    assert_eq!(sink["pseudoconvex"]["verdict"], Value::Bool(false));
    assert_eq!(sink["local_sources"]["certificates"].as_array().unwrap().len(), 1);
}

#[test]
fn strict_flag_rejects_shapley() {
    let dir = TempDir::new().unwrap();
    let o = run(&["analyze", "--strict-pseudoconvex", s(&export(&dir, "shapley"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("pseudoconvex: false"));
}

#[test]
fn tied_game_exits_with_genericity_code() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("tie.json");
    Game::new(vec![2, 2], vec![vec![1.0, 0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0, 2.0]])
        .unwrap()
        .write(&path)
        .unwrap();
    let o = run(&["analyze", s(&path)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("(0,0)") && stderr(&o).contains("(1,0)"), "{}", stderr(&o));
    let dot = dir.path().join("tie.dot");
    let o = run(&["graph", s(&path), "--dot", s(&dot)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(fs::read_to_string(&dot).unwrap().contains("style=dashed"));
    // A looser absolute tolerance than the payoff gaps turns every pair into a tie.
    let o = run(&["graph", s(&export(&dir, "shapley")), "--tie-tol", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_file_is_an_input_error_with_position() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"players\": 2,\n  \"strategy_counts\": [2, 2\n}\n").unwrap();
    let o = run(&["analyze", s(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let o = run(&["analyze", s(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = run(&["gen", "zero_sum", "3x3", "--seed", "7", "--out", s(p)]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("sha256"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let o = run(&["gen", "zero_sum", "2x2x2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generated_potential_game_has_only_pure_sinks() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("p.json");
    run(&["gen", "potential", "2x2x2", "--seed", "1", "--out", s(&path)]);
    let v: Value = serde_json::from_str(&stdout(&run(&["--json", "analyze", s(&path)]))).unwrap();
    assert_eq!(v["scc_count"], Value::from(8));
    let sinks = v["sinks"].as_array().unwrap();
    assert!(!sinks.is_empty());
    assert!(sinks.iter().all(|h| h["is_singleton_pne"] == Value::Bool(true)));

    let path = dir.path().join("g.json");
    run(&["gen", "generic", "4x4", "--seed", "3", "--out", s(&path)]);
    let v: Value = serde_json::from_str(&stdout(&run(&["--json", "analyze", s(&path)]))).unwrap();
    assert!(!v["sinks"].as_array().unwrap().is_empty());
}

#[test]
fn dot_export_highlights_sinks_deterministically() {
    let dir = TempDir::new().unwrap();
    let shapley = export(&dir, "shapley");
    let d1 = dir.path().join("1.dot");
    let d2 = dir.path().join("2.dot");
    run(&["graph", s(&shapley), "--dot", s(&d1)]);
    run(&["graph", s(&shapley), "--dot", s(&d2)]);
    let text = fs::read_to_string(&d1).unwrap();
    assert_eq!(text, fs::read_to_string(&d2).unwrap());
    let nodes = text.lines().filter(|l| l.trim().starts_with('"') && !l.contains("->")).count();
    assert_eq!(nodes, 9);

    let cog = export(&dir, "cog_fig2");
    let d = dir.path().join("cog.dot");
    run(&["graph", s(&cog), "--dot", s(&d)]);
    let dot = fs::read_to_string(&d).unwrap();
    let grey: Vec<&str> = dot
        .lines()
        .filter(|l| l.contains("fillcolor=gray80"))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let expected: Vec<String> = CorpusId::CogFig2.build().expected.sinks[0]
        .iter()
        .map(|p| p.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(grey, expected);
}

#[test]
fn vertex_start_gives_a_constant_csv() {
    let dir = TempDir::new().unwrap();
    let game = export(&dir, "cog_fig2");
    let csv = dir.path().join("v.csv");
    let o = run(&["simulate", s(&game), "--start", "1,0,0;0,0,1", "--tmax", "0.01", "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    let state = |r: &str| r.split_once(',').unwrap().1.to_string();
    assert!(rows.iter().all(|r| state(r) == state(rows[0])));
}

#[test]
fn dominance_run_settles_on_the_face() {
    let dir = TempDir::new().unwrap();
    let game = export(&dir, "dominance_fig6");
    let o = run(&["--json", "simulate", s(&game), "--tmax", "1000", "--record-every", "100"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let omega: Vec<Vec<u64>> = v[0]["omega_support"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect())
        .collect();
    assert_eq!(omega, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
}

#[test]
fn three_player_run_past_the_saddle_ends_at_b() {
    let dir = TempDir::new().unwrap();
    let game = export(&dir, "three_player_fig3");
    let start = sinkatlas::corpus::three_player_diagonal(0.501)
        .dists()
        .iter()
        .map(|d| d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";");
    let o = run(&["simulate", s(&game), "--start", &start, "--stop", "near:1,1,1:1e-3", "--tmax", "10000", "--record-every", "1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("(Near)") && text.contains("nearest pure profile (1,1,1)"), "{text}");
}

#[test]
fn ensemble_output_is_ordered_by_run() {
    let dir = TempDir::new().unwrap();
    let game = export(&dir, "shapley");
    let out = dir.path().join("e.csv");
    let args = ["--json", "simulate", s(&game), "--start", "random:5", "--ensemble", "4", "--tmax", "2", "--record-every", "100", "--out", s(&out)];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    let ids: Vec<u64> = v.as_array().unwrap().iter().map(|r| r["run"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![0, 1, 2, 3]);
    for k in 0..4 {
        assert!(dir.path().join(format!("e.{k}.csv")).exists());
    }
    let o = run(&["simulate", s(&game), "--ensemble", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_inputs_exit_with_code_one() {
    let dir = TempDir::new().unwrap();
    let game = export(&dir, "shapley");
    let o = run(&["simulate", s(&game), "--start", "0.5,0.5;1,0,0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["simulate", s(&game), "--start", "0.9,0.9,0.9;1,0,0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["verify", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("known ids"));
}

#[test]
fn verify_passes_for_cog_and_shapley() {
    for id in ["cog_fig2", "shapley"] {
        let o = run(&["verify", id]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(!stdout(&o).contains("[FAIL]"));
    }
}
