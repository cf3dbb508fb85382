use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use qaoa_multistart::bench::{
    self, run_fixed_budget_experiment, run_method, suite_graphs, ExperimentConfig, ExperimentResult, Mode,
    NamedGraph, ProblemInstance, ReuseConfig, ReuseResult,
};
use qaoa_multistart::graphs::{connected_caveman, random_partition, read_edge_list, write_edge_list, Graph};
use qaoa_multistart::hamiltonian::{best_partition_bruteforce, cost_diagonal};
use qaoa_multistart::localopt::Bounds;
use qaoa_multistart::simulator::{landscape_grid, QaoaParams};
use qaoa_multistart::Error;
use serde_json::{json, Value};

use crate::{CliError, ExperimentArgs, GenArgs, GraphArg, LandscapeArgs, OptimizeArgs};

type CliResult<T = ()> = Result<T, CliError>;

/// Argument-shaped library errors are usage errors, the rest are runtime.
fn classify(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(_) | Error::BudgetTooSmall { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn runtime(context: impl std::fmt::Display) -> impl FnOnce(Error) -> CliError {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn read_graph(path: &Path) -> CliResult<Graph> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    read_edge_list(&text).map_err(runtime(path.display()))
}

fn named_graph(path: &Path) -> CliResult<NamedGraph> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(NamedGraph {
        id,
        graph: read_graph(path)?,
    })
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    text
}

pub fn gen(a: &GenArgs) -> CliResult {
    // only a failed connectivity search is a runtime failure; everything
    // else the generators reject comes from the flags
    let gen_err = |e: Error| match e {
        Error::GenerationFailed { .. } => CliError::Runtime(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    };
    if a.suite {
        let dir = a.out.as_deref().expect("clap requires --out with --suite");
        for named in suite_graphs().map_err(gen_err)? {
            let path = dir.join(format!("{}.edges", named.id));
            write_text(&path, &write_edge_list(&named.graph))?;
            println!("{}: {} vertices, {} edges", path.display(), named.graph.n_vertices(), named.graph.num_edges());
        }
        return Ok(());
    }
    let g = if let Some(cv) = &a.caveman {
        connected_caveman(cv[0], cv[1]).map_err(gen_err)?
    } else {
        let sizes = a.partition.as_deref().expect("clap requires one graph family");
        random_partition(sizes, a.p_in, a.p_out, a.seed).map_err(gen_err)?
    };
    let text = write_edge_list(&g);
    let counts = format!("{} vertices, {} edges", g.n_vertices(), g.num_edges());
    match &a.out {
        Some(path) => {
            write_text(path, &text)?;
            println!("{}: {counts}", path.display());
        }
        None => {
            print!("{text}");
            eprintln!("{counts}");
        }
    }
    Ok(())
}

pub fn landscape(a: &LandscapeArgs) -> CliResult {
    let g = read_graph(&a.graph)?;
    let diag = cost_diagonal::<f64>(&g).map_err(runtime(a.graph.display()))?;
    let grid = landscape_grid(&diag, a.res[0] as usize, a.res[1] as usize).map_err(classify)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(["beta", "gamma", "f"]).map_err(csv_err)?;
    for (i, b) in grid.beta.iter().enumerate() {
        for (j, c) in grid.gamma.iter().enumerate() {
            w.write_record([b.to_string(), c.to_string(), grid.get(i, j).to_string()])
                .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    match &a.out {
        Some(path) => write_text(path, &String::from_utf8_lossy(&bytes)),
        None => io::stdout().write_all(&bytes).map_err(|e| CliError::Runtime(e.to_string())),
    }
}

/// Points file: one point per line, comma or whitespace separated, `#`
/// comments and blank lines ignored.
fn read_points(path: &Path, bounds: &Bounds<f64>) -> CliResult<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: String| CliError::Runtime(format!("{} line {}: {m}", path.display(), idx + 1));
        let point = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}"))))
            .collect::<CliResult<Vec<f64>>>()?;
        if point.len() != bounds.dim() {
            return Err(bad(format!("expected {} coordinates, found {}", bounds.dim(), point.len())));
        }
        if !bounds.contains(&point) {
            return Err(bad("point lies outside the parameter box".into()));
        }
        points.push(point);
    }
    Ok(points)
}

pub fn optimize(a: &OptimizeArgs) -> CliResult {
    let named = named_graph(&a.graph)?;
    let p = a.p as usize;
    let instance = ProblemInstance::new(&named, p).map_err(runtime(a.graph.display()))?;
    let warm = match &a.warm_start {
        Some(path) => read_points(path, &instance.bounds)?,
        None => Vec::new(),
    };
    let stop = Mode::Restart.stop_rule(a.method, a.budget);
    let run = run_method(
        a.method,
        instance.objective_fn(a.shots, a.seed),
        &instance.bounds,
        &stop,
        a.budget,
        a.seed,
        &warm,
        warm.len(),
    )
    .map_err(classify)?;

    let history = &run.history;
    let (best_x, best_f) = history
        .best()
        .ok_or_else(|| CliError::Runtime("optimizer made no evaluations".into()))?;
    let params = QaoaParams::from_point(best_x).map_err(classify)?;
    let exact_f = instance.evaluate(best_x).map_err(classify)?;
    let summary = json!({
        "graph": a.graph.display().to_string(),
        "label": named.graph.label(),
        "n_vertices": named.graph.n_vertices(),
        "n_edges": named.graph.num_edges(),
        "p": p,
        "method": a.method,
        "budget": a.budget,
        "seed": a.seed,
        "shots": a.shots,
        "warm_points": warm.len(),
        "evals": history.len(),
        "status": run.status,
        "best_beta": params.beta,
        "best_gamma": params.gamma,
        "best_f": best_f,
        "neg_f": -best_f,
        "exact_f": exact_f,
        "local_optima": run.local_optima.len(),
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    let mut header = vec!["eval_index".to_string()];
    header.extend((1..=p).map(|l| format!("beta_{l}")));
    header.extend((1..=p).map(|l| format!("gamma_{l}")));
    header.push("f".into());
    w.write_record(&header).map_err(csv_err)?;
    for (i, (x, f)) in history.points().iter().zip(history.values()).enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(x.iter().map(f64::to_string));
        row.push(f.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let trace = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;

    write_text(&a.out.join("trace.csv"), &String::from_utf8_lossy(&trace))?;
    let text = pretty(&summary);
    write_text(&a.out.join("summary.json"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn bruteforce(a: &GraphArg) -> CliResult {
    let g = read_graph(&a.graph)?;
    let (spins, q) = best_partition_bruteforce::<f64>(&g).map_err(runtime(a.graph.display()))?;
    let community: Vec<usize> = spins.spins().iter().map(|&s| usize::from(s < 0)).collect();
    print!(
        "{}",
        pretty(&json!({
            "graph": a.graph.display().to_string(),
            "n_vertices": g.n_vertices(),
            "n_edges": g.num_edges(),
            "modularity": q,
            "bits": spins.to_bits(),
            "community": community,
        }))
    );
    Ok(())
}

/// A config document split into the library config and the CLI's own keys.
struct LoadedConfig {
    body: Value,
    graphs: Option<Vec<PathBuf>>,
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>, experiment: &str) -> CliResult<LoadedConfig> {
    let Some(path) = path else {
        return Ok(LoadedConfig {
            body: json!({}),
            graphs: None,
            out: None,
        });
    };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let usage = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let base = path.parent().unwrap_or(Path::new(""));

    let mut doc: Value = if path.extension().is_some_and(|e| e == "json") {
        // a manifest from an earlier run
        let mut manifest: Value = serde_json::from_str(&text).map_err(|e| usage(e.to_string()))?;
        if manifest.get("experiment").and_then(Value::as_str) != Some(experiment) {
            return Err(usage(format!("not a {experiment} manifest")));
        }
        let mut doc = manifest["config"].take();
        let obj = doc.as_object_mut().ok_or_else(|| usage("manifest has no config".into()))?;
        for key in ["graphs", "out"] {
            obj.insert(key.into(), manifest[key].take());
        }
        doc
    } else {
        let table: toml::Table = toml::from_str(&text).map_err(|e| usage(e.to_string()))?;
        serde_json::to_value(table).map_err(|e| usage(e.to_string()))?
    };

    let obj = doc.as_object_mut().ok_or_else(|| usage("config must be a table".into()))?;
    let graphs = match obj.remove("graphs") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|v| v.as_str().map(|s| base.join(s)))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| usage("graphs must be a list of paths".into()))?,
        ),
        Some(_) => return Err(usage("graphs must be a list of paths".into())),
    };
    let out = match obj.remove("out") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(usage("out must be a path".into())),
    };
    Ok(LoadedConfig { body: doc, graphs, out })
}

fn experiment_graphs(paths: &Option<Vec<PathBuf>>) -> CliResult<(Vec<NamedGraph>, Value)> {
    match paths {
        None => Ok((suite_graphs().map_err(classify)?, Value::Null)),
        Some(paths) => {
            let mut graphs = Vec::new();
            let mut echo = Vec::new();
            for p in paths {
                graphs.push(named_graph(p)?);
                let abs = fs::canonicalize(p).map_err(io_err(p))?;
                echo.push(Value::String(abs.display().to_string()));
            }
            Ok((graphs, Value::Array(echo)))
        }
    }
}

/// Adds the CLI-level fields to a manifest so it can drive a rerun.
fn write_manifest(path: &Path, mut manifest: Value, graphs: Value, out: &Path) -> CliResult {
    if let Some(obj) = manifest.as_object_mut() {
        obj.insert("graphs".into(), graphs);
        obj.insert("out".into(), Value::String(out.display().to_string()));
    }
    write_text(path, &pretty(&manifest))
}

pub fn bench(a: &ExperimentArgs) -> CliResult {
    let loaded = load_config(a.config.as_deref(), "fixed-budget")?;
    let mut config: ExperimentConfig =
        serde_json::from_value(loaded.body).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    if let Some(w) = a.workers {
        config.workers = w;
    }
    let config = config.resolved().map_err(classify)?;
    let out = a.out.clone().or(loaded.out).unwrap_or_else(|| PathBuf::from("bench-output"));
    let (graphs, echo) = experiment_graphs(&loaded.graphs)?;

    log::info!(
        "{} graphs x {} depths x {} methods x {} seeds",
        graphs.len(),
        config.p_values.len(),
        config.methods.len(),
        config.seeds
    );
    let result = run_fixed_budget_experiment(&graphs, &config).map_err(classify)?;
    result.write_outputs(&out).map_err(runtime(out.display()))?;
    write_manifest(&out.join("manifest.json"), result.manifest(), echo, &out)?;
    report_bench(&result);

    if result.failures == result.cells.len() {
        return Err(CliError::Runtime(format!("all {} cells failed", result.failures)));
    }
    Ok(())
}

fn report_bench(result: &ExperimentResult) {
    for r in &result.ratios {
        let d = result.solved_fraction(r.p, r.method);
        let median = r.quartiles.as_ref().map_or("n/a".to_string(), |q| format!("{:.5}", q.median));
        println!("p={} {:<24} solved {:.3}  median ratio {median}", r.p, r.method.to_string(), d);
    }
    if result.failures > 0 {
        println!("{} of {} cells failed; see manifest.json", result.failures, result.cells.len());
    }
}

pub fn reuse(a: &ExperimentArgs) -> CliResult {
    let loaded = load_config(a.config.as_deref(), "reuse")?;
    let mut config: ReuseConfig =
        serde_json::from_value(loaded.body).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    if let Some(w) = a.workers {
        config.workers = w;
    }
    config.validate().map_err(classify)?;
    let out = a.out.clone().or(loaded.out).unwrap_or_else(|| PathBuf::from("reuse-output"));
    let (graphs, echo) = experiment_graphs(&loaded.graphs)?;

    let result = bench::reuse_experiment(&graphs, &config).map_err(classify)?;
    result.write_outputs(&out).map_err(runtime(out.display()))?;
    write_manifest(&out.join("reuse_manifest.json"), result.manifest(), echo, &out)?;
    report_reuse(&result);

    let failed = result.records.iter().filter(|r| r.error.is_some()).count();
    if failed == result.records.len() {
        return Err(CliError::Runtime(format!("all {failed} reuse runs failed")));
    }
    Ok(())
}

fn report_reuse(result: &ReuseResult) {
    for &mode in &result.config.modes {
        for &method in &result.config.methods {
            let median = |warm| {
                bench::quartiles(&result.evals_to_tau(mode, Some(method), warm)).map_or("n/a".to_string(), |q| format!("{}", q.median))
            };
            println!(
                "{:<10} {:<24} median evals to tau: warm {}  cold {}",
                mode.as_str(),
                method.to_string(),
                median(true),
                median(false)
            );
        }
    }
    for s in &result.skipped {
        println!("skipped {s}");
    }
}
