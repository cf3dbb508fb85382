use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qaoa_ms(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qaoa-ms"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = qaoa_ms(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str], dir: &Path) -> i32 {
    qaoa_ms(args, dir).status.code().expect("exit code")
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&read(path)).unwrap()
}

#[test]
fn gen_caveman_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(&["gen", "--caveman", "4", "4", "--out", "cv.edges"], d);
    assert!(String::from_utf8_lossy(&out.stdout).contains("16 vertices"));
    assert!(read(d.join("cv.edges")).contains("n 16\n"));

    ok(&["gen", "--caveman", "4", "4", "--out", "again.edges"], d);
    assert_eq!(fs::read(d.join("cv.edges")).unwrap(), fs::read(d.join("again.edges")).unwrap());

    let small = ok(&["gen", "--caveman", "2", "2"], d);
    assert!(String::from_utf8_lossy(&small.stdout).contains("n 4\n"));
    assert!(String::from_utf8_lossy(&small.stderr).contains("4 vertices"));

    ok(&["gen", "--partition", "3,4", "--seed", "5", "--out", "part.edges"], d);
    assert!(read(d.join("part.edges")).contains("n 7\n"));
}

#[test]
fn gen_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["gen"], d), 2);
    assert_eq!(code(&["gen", "--caveman", "0", "3"], d), 2);
    assert_eq!(code(&["gen", "--caveman", "3"], d), 2);
    assert_eq!(code(&["gen", "--suite"], d), 2);
    assert_eq!(code(&["frobnicate"], d), 2);
}

#[test]
fn gen_suite_matches_fixture_names() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--suite", "--out", "suite"], dir.path());
    let mut names: Vec<String> = fs::read_dir(dir.path().join("suite"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 6);
    assert!(names.contains(&"caveman-3x4.edges".to_string()));
}

#[test]
fn landscape_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "2", "3", "--out", "g.edges"], d);

    let one = ok(&["landscape", "--graph", "g.edges", "--res", "1", "1"], d);
    let text = String::from_utf8(one.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "beta,gamma,f");
    assert_eq!(lines.len(), 2);

    ok(&["landscape", "--graph", "g.edges", "--res", "200", "200", "--out", "grid.csv"], d);
    assert_eq!(read(d.join("grid.csv")).lines().count(), 40_001);

    assert_eq!(code(&["landscape", "--graph", "missing.edges"], d), 1);
    assert_eq!(code(&["landscape", "--graph", "g.edges", "--res", "0", "3"], d), 2);
}

#[test]
fn optimize_rejects_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "2", "3", "--out", "g.edges"], d);
    let out = qaoa_ms(&["optimize", "--graph", "g.edges", "--method", "simplex", "--out", "o"], d);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["nelder-mead", "pattern", "model-tr", "restarting:pattern", "multistart:model-tr"] {
        assert!(err.contains(name), "{err}");
    }
    assert!(!d.join("o").exists());
}

#[test]
fn optimize_single_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "2", "3", "--out", "g.edges"], d);
    ok(&["optimize", "--graph", "g.edges", "--budget", "1", "--out", "o"], d);
    let trace = read(d.join("o/trace.csv"));
    assert_eq!(trace.lines().count(), 2);
    assert_eq!(trace.lines().next(), Some("eval_index,beta_1,gamma_1,f"));
    assert_eq!(json(d.join("o/summary.json"))["evals"], 1);

    // a lone model-TR run cannot build its model from one evaluation
    let args = ["optimize", "--graph", "g.edges", "--budget", "1", "--method", "model-tr", "--out", "m"];
    assert_eq!(code(&args, d), 2);
}

#[test]
fn optimize_caveman_with_budget_200() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "4", "4", "--out", "cv.edges"], d);
    let args = |out: &'static str| {
        ["optimize", "--graph", "cv.edges", "--method", "multistart:model-tr", "--budget", "200", "--seed", "7", "--out", out]
    };
    let first = ok(&args("a"), d);
    ok(&args("b"), d);
    assert_eq!(read(d.join("a/summary.json")), read(d.join("b/summary.json")));
    assert_eq!(read(d.join("a/trace.csv")), read(d.join("b/trace.csv")));
    assert_eq!(String::from_utf8(first.stdout).unwrap(), read(d.join("a/summary.json")));

    let s = json(d.join("a/summary.json"));
    assert_eq!(s["evals"], 200);
    assert_eq!(s["p"], 1);
    assert_eq!(s["best_beta"].as_array().unwrap().len(), 1);
    let neg_f = s["neg_f"].as_f64().unwrap();
    let brute: Value = serde_json::from_slice(&ok(&["bruteforce", "--graph", "cv.edges"], d).stdout).unwrap();
    let bound = brute["modularity"].as_f64().unwrap();
    assert!((bound - 5.0 / 12.0).abs() < 1e-12);
    assert!(neg_f > 0.0 && neg_f <= bound + 1e-9);
}

#[test]
fn optimize_starts_from_warm_points() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "2", "3", "--out", "g.edges"], d);
    fs::write(d.join("warm.txt"), "# beta gamma\n0.4, 1.25\n").unwrap();
    let args = ["optimize", "--graph", "g.edges", "--method", "restarting:pattern", "--budget", "40", "--warm-start", "warm.txt", "--out", "o"];
    ok(&args, d);
    let trace = read(d.join("o/trace.csv"));
    assert!(trace.lines().nth(1).unwrap().starts_with("1,0.4,1.25,"));

    fs::write(d.join("bad.txt"), "0.4 9.0\n").unwrap();
    let args = ["optimize", "--graph", "g.edges", "--warm-start", "bad.txt", "--out", "o2"];
    assert_eq!(code(&args, d), 1);
}

#[test]
fn shot_sampled_summary_reports_exact_value() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "2", "3", "--out", "g.edges"], d);
    ok(&["optimize", "--graph", "g.edges", "--method", "nelder-mead", "--budget", "30", "--shots", "64", "--out", "o"], d);
    let s = json(d.join("o/summary.json"));
    assert_eq!(s["shots"], 64);
    assert!(s["exact_f"].as_f64().unwrap().is_finite());
    assert_eq!(code(&["optimize", "--graph", "g.edges", "--shots", "0", "--out", "z"], d), 2);
}

const BENCH: &str = r#"
graphs = ["g/a.edges", "g/b.edges"]
out = "run1"
p_values = [1, 2]
methods = ["restarting:pattern", "multistart:model-tr"]
budget = 40
seeds = 3
"#;

#[test]
fn bench_outputs_and_manifest_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "2", "3", "--out", "g/a.edges"], d);
    ok(&["gen", "--partition", "3,3", "--seed", "2", "--out", "g/b.edges"], d);
    fs::write(d.join("bench.toml"), BENCH).unwrap();
    ok(&["bench", "--config", "bench.toml"], d);

    // 2 graphs x 2 depths x 2 methods x 3 seeds x 40 evaluations
    assert_eq!(read(d.join("run1/runs.csv")).lines().count(), 1 + 2 * 2 * 2 * 3 * 40);
    assert_eq!(read(d.join("run1/ratios.csv")).lines().count(), 1 + 2 * 2 * 2 * 3);
    assert_eq!(read(d.join("run1/profiles.csv")).lines().count(), 1 + 2 * 2 * 40);
    let manifest = json(d.join("run1/manifest.json"));
    assert_eq!(manifest["config"]["budget"], 40);
    assert_eq!(manifest["graphs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["out"], "run1");

    ok(&["bench", "--config", "run1/manifest.json", "--out", "run8", "--workers", "8"], d);
    for f in ["runs.csv", "profiles.csv", "ratios.csv"] {
        assert_eq!(read(d.join("run1").join(f)), read(d.join("run8").join(f)), "{f}");
    }
}

#[test]
fn bench_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("typo.toml"), "budgt = 10\n").unwrap();
    assert_eq!(code(&["bench", "--config", "typo.toml"], d), 2);
    fs::write(d.join("tau.toml"), "tau = 1.5\n").unwrap();
    assert_eq!(code(&["bench", "--config", "tau.toml"], d), 2);
    fs::write(d.join("method.toml"), "methods = [\"gradient\"]\n").unwrap();
    assert_eq!(code(&["bench", "--config", "method.toml"], d), 2);
    assert_eq!(code(&["bench", "--config", "absent.toml"], d), 1);
    fs::write(d.join("g.toml"), "graphs = [\"nowhere.edges\"]\n").unwrap();
    assert_eq!(code(&["bench", "--config", "g.toml"], d), 1);
}

#[test]
fn reuse_rows_and_shared_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--caveman", "2", "3", "--out", "g/a.edges"], d);
    ok(&["gen", "--caveman", "3", "3", "--out", "g/b.edges"], d);
    let config = "graphs = [\"g/a.edges\", \"g/b.edges\"]\nbudget = 40\nseeds = 2\nexhaustive_budget = 1500\nn_random_edges = 2\n";
    fs::write(d.join("reuse.toml"), config).unwrap();
    ok(&["reuse", "--config", "reuse.toml", "--out", "r"], d);

    let csv = read(d.join("r/reuse.csv"));
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // columns: base,removed_u,removed_v,mode,method,seed,warm_start,...
    let count = |mode: &str, method: &str| {
        rows.iter().filter(|r| r[3] == mode && r[4] == method && r[6] == "true").count()
    };
    for method in ["restarting:model-tr", "multistart:model-tr"] {
        // graphs x edges x seeds
        assert_eq!(count("random", method), 2 * 2 * 2);
        assert_eq!(count("worst-case", method), 2 * 2);
    }

    let manifest = json(d.join("r/reuse_manifest.json"));
    let cells = manifest["cells"].as_array().unwrap();
    for warm in cells.iter().filter(|c| c["warm_start"] == true) {
        let twin = cells
            .iter()
            .find(|c| {
                c["warm_start"] == false
                    && ["base", "removed_edge", "mode", "method", "seed"].iter().all(|k| c[*k] == warm[*k])
            })
            .expect("cold twin");
        assert_eq!(twin["cell_seed"], warm["cell_seed"]);
    }
}
