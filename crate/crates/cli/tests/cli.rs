//! End-to-end runs of the `binpack3d` executable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use binpack3d_cli::format::{InstanceFile, SolutionFile};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_binpack3d"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const THREE_ITEMS: &str = r#"{
  "bin": {"L": 3, "W": 2, "H": 2, "n": 2},
  "items": [
    {"id": 0, "l": 1, "w": 1, "h": 1, "mu": 1, "category": 0},
    {"id": 1, "l": 2, "w": 1, "h": 1, "mu": 2, "category": 1},
    {"id": 2, "l": 1, "w": 2, "h": 1, "mu": 1, "category": 0}
  ]
}"#;

const ONE_CUBE: &str = r#"{
  "bin": {"L": 2, "W": 2, "H": 2, "n": 1},
  "items": [{"id": 0, "l": 1, "w": 1, "h": 1, "mu": 1, "category": 0}]
}"#;

#[test]
fn generate_archetype_writes_items() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["generate", "--archetype", "1", "--seed", "7", "--out", "a1.json"]);
    assert_eq!(code(&out), 0);
    let file: InstanceFile = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a1.json")).unwrap()).unwrap();
    assert_eq!(file.items.len(), 51);
    assert!(String::from_utf8_lossy(&out.stderr).contains("total weight"));
}

#[test]
fn generate_rejects_bad_specs() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["generate", "--archetype", "13"])), 2);
    assert_eq!(code(&run(dir.path(), &["generate", "--items", "5", "--positive", "1:2", "--negative", "2:1"])), 2);
    assert_eq!(code(&run(dir.path(), &["generate", "--items", "5", "--bin-dims", "10,10"])), 2);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 2);
}

#[test]
fn generate_from_explicit_settings() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &["generate", "--items", "12", "--bin-dims", "100,100,100", "--eta", "2", "--com-target", "50,50", "--negative", "1:2"],
    );
    assert_eq!(code(&out), 0);
    let file: InstanceFile = serde_json::from_slice(&out.stdout).unwrap();
    let inst = file.to_instance().unwrap();
    assert_eq!(inst.item_count(), 12);
    assert!(inst.eta().is_some() && inst.com_target().is_some());
    assert_eq!(inst.affinities().negative.len(), 1);
}

#[test]
fn counts_only_reports_the_four_totals() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        dir.path(),
        "i.json",
        r#"{"bin": {"L": 10, "W": 10, "H": 10, "n": 2},
            "items": [{"id": 0, "l": 1, "w": 2, "h": 3, "mu": 1, "category": 0},
                      {"id": 1, "l": 2, "w": 3, "h": 4, "mu": 1, "category": 1},
                      {"id": 2, "l": 1, "w": 3, "h": 5, "mu": 1, "category": 2}]}"#,
    );
    let out = run(dir.path(), &["build", "--instance", inst.to_str().unwrap(), "--counts-only"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        v,
        serde_json::json!({"binary": 44, "continuous": 9, "quadratic_constraints": 38, "linear_constraints": 31})
    );
    // Building the model gives the same totals.
    let full = run(dir.path(), &["build", "--instance", "i.json", "--export-lp", "m.lp"]);
    assert_eq!(code(&full), 0);
    assert_eq!(serde_json::from_slice::<serde_json::Value>(&full.stdout).unwrap(), v);
    let lp = std::fs::read_to_string(dir.path().join("m.lp")).unwrap();
    assert!(lp.contains("Minimize") && lp.contains("Subject To") && lp.trim_end().ends_with("End"));
}

#[test]
fn solve_validate_render_and_stats() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "t.json", THREE_ITEMS);
    let solved = run(
        dir.path(),
        &["solve", "--instance", "t.json", "--iterations", "500", "--runs", "3", "--out", "s.json"],
    );
    assert_eq!(code(&solved), 0, "{}", String::from_utf8_lossy(&solved.stderr));
    assert!(String::from_utf8_lossy(&solved.stderr).contains("sigma_bar"));
    let sol: SolutionFile = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(sol.objectives.o1, 1);
    assert!(sol.elapsed_s.is_some());
    assert_eq!(sol.run_log.as_ref().unwrap().energies.len(), 3);

    let checked = run(dir.path(), &["validate", "--instance", "t.json", "--solution", "s.json"]);
    assert_eq!(code(&checked), 0);
    assert_eq!(String::from_utf8_lossy(&checked.stdout).trim(), "[]");

    assert_eq!(code(&run(dir.path(), &["render", "--instance", "t.json", "--solution", "s.json", "--out", "s.svg"])), 0);
    let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(r#"stroke="red""#));

    let stats = run(dir.path(), &["stats", "--runlogs", "s.json", "--csv", "s.csv"]);
    assert_eq!(code(&stats), 0);
    assert!(String::from_utf8_lossy(&stats.stdout).contains("sigma_bar"));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn overlapping_solution_fails_validation() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "t.json", THREE_ITEMS);
    let placement = |item: usize, x: u32| format!(r#"{{"item": {item}, "bin": 1, "k": 1, "x": {x}, "y": 0, "z": 0}}"#);
    let body = |placements: &str| {
        format!(
            r#"{{"placements": [{placements}], "objectives": {{"o1": 1, "o2": "1/2"}}, "energy": "3/2", "solver": "hand", "seed": 0}}"#
        )
    };
    write(dir.path(), "bad.json", &body(&[placement(0, 0), placement(1, 0), placement(2, 2)].join(",")));
    let out = run(dir.path(), &["validate", "--instance", "t.json", "--solution", "bad.json"]);
    assert_eq!(code(&out), 1);
    let entries: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(entries.as_array().unwrap().iter().any(|e| e["rule"] == "Overlap"));

    write(dir.path(), "unknown.json", &body(&[placement(0, 0), placement(1, 1), placement(7, 2)].join(",")));
    assert_eq!(code(&run(dir.path(), &["validate", "--instance", "t.json", "--solution", "unknown.json"])), 2);
}

#[test]
fn infeasible_instance_exits_three() {
    let dir = TempDir::new().unwrap();
    // Two unit cubes of incompatible categories, one bin allowed.
    write(
        dir.path(),
        "tight.json",
        r#"{"bin": {"L": 2, "W": 1, "H": 1, "n": 1},
            "items": [{"id": 0, "l": 1, "w": 1, "h": 1, "mu": 1, "category": 0},
                      {"id": 1, "l": 1, "w": 1, "h": 1, "mu": 1, "category": 1}],
            "affinities": {"negative": [[0, 1]]}}"#,
    );
    let out = run(dir.path(), &["solve", "--instance", "tight.json", "--iterations", "200"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("certificate"));
}

#[test]
fn oracle_refuses_large_instances() {
    let dir = TempDir::new().unwrap();
    let items: Vec<String> = (0..5)
        .map(|i| format!(r#"{{"id": {i}, "l": 1, "w": 1, "h": 1, "mu": 1, "category": 0}}"#))
        .collect();
    write(
        dir.path(),
        "five.json",
        &format!(r#"{{"bin": {{"L": 4, "W": 4, "H": 4, "n": 2}}, "items": [{}]}}"#, items.join(",")),
    );
    let out = run(dir.path(), &["solve", "--instance", "five.json", "--backend", "oracle"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle"));
}

#[test]
fn oracle_solves_one_cube() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.json", ONE_CUBE);
    let out = run(dir.path(), &["solve", "--instance", "c.json", "--backend", "oracle", "--no-timing"]);
    assert_eq!(code(&out), 0);
    let sol: SolutionFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(sol.solver, "oracle");
    assert!(sol.elapsed_s.is_none());
}

#[test]
fn unknown_keys_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "x.json", r#"{"bin": {"L": 2, "W": 2, "H": 2}, "items": [], "extra": true}"#);
    let out = run(dir.path(), &["build", "--instance", "x.json", "--counts-only"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_writes_run_logs_per_limit() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "t.json", THREE_ITEMS);
    let out = run(
        dir.path(),
        &["sweep", "--instance", "t.json", "--limits", "0.1,0.2", "--runs", "2", "--stall-limit", "100", "--out", "logs.json", "--csv", "sweep.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let logs: Vec<binpack3d_cli::format::RunLog> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("logs.json")).unwrap()).unwrap();
    assert_eq!(logs.len(), 2);
    let again = run(dir.path(), &["stats", "--runlogs", "logs.json"]);
    assert_eq!(code(&again), 0);
    assert_eq!(String::from_utf8_lossy(&again.stdout).lines().count(), 3);
}

#[test]
fn inputs_are_left_untouched() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "t.json", THREE_ITEMS);
    assert_eq!(code(&run(dir.path(), &["solve", "--instance", "t.json", "--iterations", "100", "--out", "s.json"])), 0);
    let sol_before = std::fs::read(dir.path().join("s.json")).unwrap();
    for args in [
        &["build", "--instance", "t.json"][..],
        &["validate", "--instance", "t.json", "--solution", "s.json"],
        &["render", "--instance", "t.json", "--solution", "s.json", "--out", "r.svg"],
        &["stats", "--runlogs", "s.json"],
    ] {
        assert_eq!(code(&run(dir.path(), args)), 0, "{args:?}");
    }
    assert_eq!(std::fs::read_to_string(dir.path().join("t.json")).unwrap(), THREE_ITEMS);
    assert_eq!(std::fs::read(dir.path().join("s.json")).unwrap(), sol_before);
}
