//! Experiment engine: fixed-budget comparisons, convergence accounting,
//! data profiles, approximation ratios and the parameter-reuse study.
//!
//! Experiments are double precision. Every (problem, method, seed) cell is
//! independent and seeded from its coordinates, so results do not depend on
//! the worker count; tables are assembled in cell order.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{connected_caveman, random_partition, remove_edge, worst_case_edge, Edge, Graph};
use crate::hamiltonian::{best_partition_bruteforce, cost_diagonal, CostDiagonal};
use crate::localopt::{restarting_from, single_run, Bounds, EvalHistory, LocalMethod, StartQueue, Status, StopRule};
use crate::multistart::{harvest_local_optima, multistart_minimize, MultistartConfig};
use crate::simulator::{objective, sampled_objective, QaoaParams};

pub const SUITE_P: [usize; 3] = [1, 2, 4];
pub const PARTITION_P_IN: f64 = 0.75;
pub const PARTITION_P_OUT: f64 = 0.1;
pub const PARTITION_SEEDS: [u64; 3] = [1, 2, 3];
pub const DEFAULT_BUDGET: usize = 1000;
pub const DEFAULT_SEEDS: usize = 10;
pub const DEFAULT_TAU: f64 = 0.01;
pub const EXHAUSTIVE_BUDGET: usize = 100_000;
pub const RANDOM_EDGES: usize = 5;
/// Harvested optima handed to a multistart warm arm.
pub const MULTISTART_WARM_POINTS: usize = 8;
/// Uniform points per multistart batch in benchmark runs.
pub const MULTISTART_BATCH: usize = 32;
/// Multistart radius aggressiveness in benchmark runs.
pub const MULTISTART_SIGMA: f64 = 1.0;

/// A graph with a stable identifier used in every output table.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedGraph {
    pub id: String,
    pub graph: Graph,
}

/// The six fixed benchmark graphs, 10 to 12 vertices each.
pub fn suite_graphs() -> Result<Vec<NamedGraph>> {
    let mut out = Vec::new();
    for (l, k) in [(5, 2), (3, 4), (2, 6)] {
        out.push(NamedGraph {
            id: format!("caveman-{l}x{k}"),
            graph: connected_caveman(l, k)?,
        });
    }
    for (sizes, seed) in [[5usize, 5], [6, 5], [6, 6]].iter().zip(PARTITION_SEEDS) {
        out.push(NamedGraph {
            id: format!("partition-{}-{}", sizes[0], sizes[1]),
            graph: random_partition(sizes, PARTITION_P_IN, PARTITION_P_OUT, seed)?,
        });
    }
    Ok(out)
}

/// One graph at one QAOA depth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub id: String,
    pub graph: Graph,
    pub p_steps: usize,
    pub diag: CostDiagonal<f64>,
    pub bounds: Bounds<f64>,
    /// Smallest objective value seen by any method; infinite until set.
    pub best_known_f: f64,
}

impl ProblemInstance {
    pub fn new(named: &NamedGraph, p_steps: usize) -> Result<Self> {
        Ok(Self {
            id: named.id.clone(),
            diag: cost_diagonal(&named.graph)?,
            bounds: Bounds::qaoa(p_steps)?,
            graph: named.graph.clone(),
            p_steps,
            best_known_f: f64::INFINITY,
        })
    }

    /// Exact objective at a point laid out as `[beta.., gamma..]`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok(objective(&self.diag, &QaoaParams::from_point(x)?)?.f)
    }

    /// Objective closure; with `shots` each call draws from its own stream
    /// derived from `seed` and the call index.
    pub fn objective_fn(&self, shots: Option<usize>, seed: u64) -> impl FnMut(&[f64]) -> Result<f64> + '_ {
        let mut calls = 0u64;
        move |x: &[f64]| match shots {
            None => self.evaluate(x),
            Some(s) => {
                calls += 1;
                let params = QaoaParams::from_point(x)?;
                Ok(sampled_objective(&self.diag, &params, s, mix_seed(&[seed, calls]))?.f)
            }
        }
    }
}

/// Every suite graph at depth `p_steps`.
pub fn benchmark_suite(p_steps: usize) -> Result<Vec<ProblemInstance>> {
    suite_graphs()?.iter().map(|g| ProblemInstance::new(g, p_steps)).collect()
}

/// SplitMix64 finalizer folded over `parts`.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3u64;
    for &part in parts {
        let mut z = (h ^ part).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// An optimizer as named on the command line and in output tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodSpec {
    /// One local run.
    Single(LocalMethod),
    /// Local runs restarted from uniform points until the budget is spent.
    Restarting(LocalMethod),
    /// The multistart coordinator with the given local method.
    Multistart(LocalMethod),
}

impl MethodSpec {
    pub fn local(self) -> LocalMethod {
        match self {
            MethodSpec::Single(m) | MethodSpec::Restarting(m) | MethodSpec::Multistart(m) => m,
        }
    }

    /// Every accepted name, for error messages.
    pub fn valid_names() -> Vec<String> {
        let mut names = Vec::new();
        for wrap in [MethodSpec::Single, MethodSpec::Restarting, MethodSpec::Multistart] {
            names.extend(LocalMethod::ALL.iter().map(|&m| wrap(m).to_string()));
        }
        names
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Single(m) => write!(f, "{m}"),
            MethodSpec::Restarting(m) => write!(f, "restarting:{m}"),
            MethodSpec::Multistart(m) => write!(f, "multistart:{m}"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = match s.split_once(':') {
            None => s.parse().map(MethodSpec::Single),
            Some(("restarting", m)) => m.parse().map(MethodSpec::Restarting),
            Some(("multistart", m)) => m.parse().map(MethodSpec::Multistart),
            Some(_) => Err(Error::InvalidArgument(String::new())),
        };
        parsed.map_err(|_| {
            Error::InvalidArgument(format!(
                "unknown method {s:?}; valid methods: {}",
                MethodSpec::valid_names().join(", ")
            ))
        })
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

/// Outcome of one optimizer invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub history: EvalHistory<f64>,
    pub status: Status,
    /// Minimizers of local runs that stopped on a tolerance.
    pub local_optima: Vec<(Vec<f64>, f64)>,
}

/// Runs `spec` with at most `budget` evaluations. Warm points are used as
/// starts in order before uniform draws seeded by `seed`; a multistart
/// receives at most `warm_cap` of them as initial points.
#[allow(clippy::too_many_arguments)]
pub fn run_method<F>(
    spec: MethodSpec,
    f: F,
    bounds: &Bounds<f64>,
    stop: &StopRule<f64>,
    budget: usize,
    seed: u64,
    warm: &[Vec<f64>],
    warm_cap: usize,
) -> Result<MethodRun>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let stop = stop.with_max_evals(stop.max_evals.min(budget));
    let run = match spec {
        MethodSpec::Single(m) => {
            let (x0, _) = StartQueue::warm(warm.iter().cloned(), seed).next_start(bounds);
            single_run(m, f, &x0, bounds, &stop)
        }
        MethodSpec::Restarting(m) => {
            restarting_from(m, f, bounds, &stop, budget, &mut StartQueue::warm(warm.iter().cloned(), seed))
        }
        MethodSpec::Multistart(m) => {
            let mut config = MultistartConfig::new(budget, seed).with_local(m, stop);
            config.sample_batch = MULTISTART_BATCH.min(budget);
            config.sigma = MULTISTART_SIGMA;
            config.initial_points = warm.iter().take(warm_cap).cloned().collect();
            let r = multistart_minimize(f, bounds, &config)?;
            return Ok(MethodRun {
                local_optima: r.local_optima,
                status: Status::BudgetExhausted,
                history: r.history,
            });
        }
    };
    let r = run.map_err(|e| e.source)?;
    Ok(MethodRun {
        local_optima: r.converged_minimizers(),
        status: r.status,
        history: r.history,
    })
}

fn multistart_settings() -> serde_json::Value {
    serde_json::json!({
        "sample_batch": MULTISTART_BATCH,
        "sigma": MULTISTART_SIGMA,
        "max_active_runs": crate::multistart::DEFAULT_MAX_ACTIVE_RUNS,
    })
}

/// First 1-based evaluation count at which the decrease from `x0_value`
/// reaches `(1 - tau)` of the best possible decrease to `best_known`.
pub fn solved_after(values: &[f64], x0_value: f64, best_known: f64, tau: f64) -> Result<Option<usize>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty history".into()));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")));
    }
    let target = (1.0 - tau) * (x0_value - best_known);
    Ok(values.iter().position(|&v| x0_value - v >= target).map(|j| j + 1))
}

/// Evaluations-to-solve per `[problem][method][seed]`; `None` is unsolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub tau: f64,
    pub problems: Vec<String>,
    pub methods: Vec<String>,
    pub entries: Vec<Vec<Vec<Option<usize>>>>,
}

impl ProfileTable {
    /// Number of (problem, seed) pairs per method.
    pub fn pairs(&self) -> usize {
        self.entries.iter().map(|per_method| per_method.first().map_or(0, Vec::len)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub method: String,
    pub alpha: Vec<usize>,
    pub d: Vec<f64>,
}

/// Fraction of (problem, seed) pairs each method solves within each alpha.
pub fn data_profile(table: &ProfileTable, alpha_grid: &[usize]) -> Result<Vec<ProfileCurve>> {
    let pairs = table.pairs();
    if pairs == 0 {
        return Err(Error::InvalidArgument("empty profile table".into()));
    }
    Ok(table
        .methods
        .iter()
        .enumerate()
        .map(|(s, name)| {
            let solved: Vec<usize> = table
                .entries
                .iter()
                .flat_map(|per_method| per_method[s].iter().flatten().copied())
                .collect();
            let d = alpha_grid
                .iter()
                .map(|&a| solved.iter().filter(|&&t| t <= a).count() as f64 / pairs as f64)
                .collect();
            ProfileCurve {
                method: name.clone(),
                alpha: alpha_grid.to_vec(),
                d,
            }
        })
        .collect())
}

/// `(-found_f) / (-best_f)`; requires `best_f < 0`.
pub fn approximation_ratio(found_f: f64, best_f: f64) -> Result<f64> {
    if !(best_f < 0.0) {
        return Err(Error::UndefinedRatio(best_f));
    }
    Ok(found_f / best_f)
}

/// Median and quartiles with linear interpolation between order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub count: usize,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q25: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q75: quantile(&v, 0.75),
        count: v.len(),
    })
}

/// Tolerance regime of a fixed-budget experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Local solvers run once with zero tolerances.
    ZeroTol,
    /// Local solvers use the standard tolerances and restart.
    Restart,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ZeroTol => "zero-tol",
            Mode::Restart => "restart",
        }
    }

    pub fn default_methods(self) -> Vec<MethodSpec> {
        use LocalMethod::*;
        match self {
            Mode::ZeroTol => vec![
                MethodSpec::Single(NelderMead),
                MethodSpec::Single(Pattern),
                MethodSpec::Single(ModelTrustRegion),
                MethodSpec::Multistart(ModelTrustRegion),
            ],
            Mode::Restart => vec![
                MethodSpec::Restarting(NelderMead),
                MethodSpec::Restarting(Pattern),
                MethodSpec::Restarting(ModelTrustRegion),
                MethodSpec::Multistart(ModelTrustRegion),
            ],
        }
    }

    /// Stopping rule for `spec`; a multistart always uses the standard
    /// tolerances for its local runs.
    pub fn stop_rule(self, spec: MethodSpec, budget: usize) -> StopRule<f64> {
        match (self, spec) {
            (Mode::ZeroTol, MethodSpec::Single(_) | MethodSpec::Restarting(_)) => StopRule::zero_tolerance(budget),
            _ => StopRule::standard(budget),
        }
    }
}

fn default_p_values() -> Vec<usize> {
    SUITE_P.to_vec()
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_seeds() -> usize {
    DEFAULT_SEEDS
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_workers() -> usize {
    1
}
fn default_mode() -> Mode {
    Mode::Restart
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_p_values")]
    pub p_values: Vec<usize>,
    /// Empty selects the mode's default method list.
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Sampled objective with this many shots instead of the exact value.
    #[serde(default)]
    pub shots: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            p_values: default_p_values(),
            methods: Vec::new(),
            budget: DEFAULT_BUDGET,
            seeds: DEFAULT_SEEDS,
            tau: DEFAULT_TAU,
            base_seed: 0,
            workers: 1,
            shots: None,
        }
    }
}

fn check_common(budget: usize, seeds: usize, tau: f64, workers: usize, shots: Option<usize>) -> Result<()> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be >= 1".into()));
    }
    if seeds == 0 {
        return Err(Error::InvalidArgument("seeds must be >= 1".into()));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")));
    }
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    if shots == Some(0) {
        return Err(Error::InvalidArgument("shots must be >= 1".into()));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Validates and fills the method list.
    pub fn resolved(&self) -> Result<Self> {
        check_common(self.budget, self.seeds, self.tau, self.workers, self.shots)?;
        if self.p_values.is_empty() || self.p_values.contains(&0) {
            return Err(Error::InvalidArgument("p_values must be nonempty and >= 1".into()));
        }
        let mut out = self.clone();
        if out.methods.is_empty() {
            out.methods = self.mode.default_methods();
        }
        Ok(out)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))
}

/// One (problem, method, seed) run of a fixed-budget experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub problem: usize,
    pub method: MethodSpec,
    pub seed: usize,
    pub cell_seed: u64,
    pub values: Vec<f64>,
    pub error: Option<String>,
    pub solved_after: Option<usize>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub id: String,
    pub label: String,
    pub p: usize,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub best_known_f: f64,
    /// Brute-force modularity optimum; `-f` can never exceed it.
    pub modularity_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub p: usize,
    pub method: MethodSpec,
    pub quartiles: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub problems: Vec<ProblemSummary>,
    pub cells: Vec<Cell>,
    /// One table per entry of `config.p_values`.
    pub profiles: Vec<ProfileTable>,
    pub ratios: Vec<RatioSummary>,
    pub failures: usize,
}

/// Runs every (graph, p, method, seed) cell and derives profiles and ratios.
pub fn run_fixed_budget_experiment(graphs: &[NamedGraph], config: &ExperimentConfig) -> Result<ExperimentResult> {
    let config = config.resolved()?;
    let mut problems = Vec::new();
    for &p in &config.p_values {
        for g in graphs {
            problems.push(ProblemInstance::new(g, p)?);
        }
    }
    let mut specs = Vec::new();
    for (pi, prob) in problems.iter().enumerate() {
        let graph_index = pi % graphs.len();
        for &method in &config.methods {
            for seed in 0..config.seeds {
                let cell_seed = mix_seed(&[config.base_seed, graph_index as u64, prob.p_steps as u64, seed as u64]);
                specs.push((pi, method, seed, cell_seed));
            }
        }
    }
    let run_cell = |&(pi, method, seed, cell_seed): &(usize, MethodSpec, usize, u64)| -> Cell {
        let prob: &ProblemInstance = &problems[pi];
        let stop = config.mode.stop_rule(method, config.budget);
        let f = prob.objective_fn(config.shots, cell_seed);
        let outcome = run_method(method, f, &prob.bounds, &stop, config.budget, cell_seed, &[], 0);
        let (values, error) = match outcome {
            Ok(run) => (run.history.values().to_vec(), None),
            Err(e) => {
                log::warn!("{} p={} {method} seed {seed}: {e}", prob.id, prob.p_steps);
                (Vec::new(), Some(e.to_string()))
            }
        };
        Cell {
            problem: pi,
            method,
            seed,
            cell_seed,
            values,
            error,
            solved_after: None,
            ratio: None,
        }
    };
    let mut cells: Vec<Cell> = pool(config.workers)?.install(|| specs.par_iter().map(run_cell).collect());

    for c in &cells {
        for &v in &c.values {
            let best = &mut problems[c.problem].best_known_f;
            *best = best.min(v);
        }
    }
    for c in &mut cells {
        if c.values.is_empty() {
            continue;
        }
        let best = problems[c.problem].best_known_f;
        c.solved_after = solved_after(&c.values, c.values[0], best, config.tau)?;
        let found = c.values.iter().copied().fold(f64::INFINITY, f64::min);
        c.ratio = match approximation_ratio(found, best) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("{}: {e}", problems[c.problem].id);
                None
            }
        };
    }

    let mut profiles = Vec::new();
    let mut ratios = Vec::new();
    for &p in &config.p_values {
        let ids: Vec<usize> = (0..problems.len()).filter(|&i| problems[i].p_steps == p).collect();
        let mut entries = vec![vec![vec![None; config.seeds]; config.methods.len()]; ids.len()];
        for c in cells.iter().filter(|c| problems[c.problem].p_steps == p) {
            let row = ids.iter().position(|&i| i == c.problem).unwrap_or(0);
            let m = config.methods.iter().position(|&m| m == c.method).unwrap_or(0);
            entries[row][m][c.seed] = c.solved_after;
        }
        profiles.push(ProfileTable {
            tau: config.tau,
            problems: ids.iter().map(|&i| problems[i].id.clone()).collect(),
            methods: config.methods.iter().map(|m| m.to_string()).collect(),
            entries,
        });
        for &method in &config.methods {
            let r: Vec<f64> = cells
                .iter()
                .filter(|c| problems[c.problem].p_steps == p && c.method == method)
                .filter_map(|c| c.ratio)
                .collect();
            ratios.push(RatioSummary {
                p,
                method,
                quartiles: quartiles(&r),
            });
        }
    }

    let mut summaries = Vec::new();
    for prob in &problems {
        let (_, bound) = best_partition_bruteforce::<f64>(&prob.graph)?;
        summaries.push(ProblemSummary {
            id: prob.id.clone(),
            label: prob.graph.label().to_string(),
            p: prob.p_steps,
            n_vertices: prob.graph.n_vertices(),
            n_edges: prob.graph.num_edges(),
            best_known_f: prob.best_known_f,
            modularity_bound: bound,
        });
    }
    let failures = cells.iter().filter(|c| c.error.is_some()).count();
    Ok(ExperimentResult {
        config,
        problems: summaries,
        cells,
        profiles,
        ratios,
        failures,
    })
}

impl ExperimentResult {
    pub fn curves(&self) -> Result<Vec<(usize, Vec<ProfileCurve>)>> {
        let alpha: Vec<usize> = (1..=self.config.budget).collect();
        self.config
            .p_values
            .iter()
            .zip(&self.profiles)
            .map(|(&p, t)| Ok((p, data_profile(t, &alpha)?)))
            .collect()
    }

    /// Fraction of a method's cells solved within the budget at depth `p`.
    pub fn solved_fraction(&self, p: usize, method: MethodSpec) -> f64 {
        let cells: Vec<&Cell> = self
            .cells
            .iter()
            .filter(|c| self.problems[c.problem].p == p && c.method == method)
            .collect();
        let solved = cells.iter().filter(|c| c.solved_after.is_some()).count();
        solved as f64 / cells.len().max(1) as f64
    }

    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["problem", "p", "method", "seed", "mode", "eval_index", "f"])?;
        let mode = self.config.mode.as_str();
        for c in &self.cells {
            let prob = &self.problems[c.problem];
            let (p, method, seed) = (prob.p.to_string(), c.method.to_string(), c.seed.to_string());
            for (i, v) in c.values.iter().enumerate() {
                w.write_record([
                    prob.id.as_str(),
                    &p,
                    &method,
                    &seed,
                    mode,
                    &(i + 1).to_string(),
                    &v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `p,method,alpha,d`; the depth column separates the tables.
    pub fn write_profiles_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "method", "alpha", "d"])?;
        for (p, curves) in self.curves()? {
            for c in curves {
                for (a, d) in c.alpha.iter().zip(&c.d) {
                    w.write_record([p.to_string(), c.method.clone(), a.to_string(), d.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_ratios_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["problem", "p", "method", "seed", "ratio"])?;
        for c in &self.cells {
            let prob = &self.problems[c.problem];
            w.write_record([
                prob.id.clone(),
                prob.p.to_string(),
                c.method.to_string(),
                c.seed.to_string(),
                c.ratio.map_or(String::new(), |r| r.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": "fixed-budget",
            "version": env!("CARGO_PKG_VERSION"),
            "multistart": multistart_settings(),
            "config": self.config,
            "problems": self.problems,
            "cell_seeds": self.cells.iter().map(|c| serde_json::json!({
                "problem": self.problems[c.problem].id,
                "p": self.problems[c.problem].p,
                "method": c.method,
                "seed": c.seed,
                "cell_seed": c.cell_seed,
            })).collect::<Vec<_>>(),
            "ratio_summaries": self.ratios,
            "failures": self.cells.iter().filter_map(|c| c.error.as_ref().map(|e| serde_json::json!({
                "problem": self.problems[c.problem].id,
                "p": self.problems[c.problem].p,
                "method": c.method,
                "seed": c.seed,
                "error": e,
            }))).collect::<Vec<_>>(),
        })
    }

    /// Writes `runs.csv`, `profiles.csv`, `ratios.csv` and `manifest.json`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_runs_csv(fs::File::create(dir.join("runs.csv"))?)?;
        self.write_profiles_csv(fs::File::create(dir.join("profiles.csv"))?)?;
        self.write_ratios_csv(fs::File::create(dir.join("ratios.csv"))?)?;
        write_json(&dir.join("manifest.json"), &self.manifest())
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Distinct local optima from a long restarting model-trust-region run,
/// sorted ascending by objective value.
pub fn exhaustive_optima(instance: &ProblemInstance, budget: usize, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
    let stop = StopRule::standard(budget);
    let r = restarting_from(
        LocalMethod::ModelTrustRegion,
        |x: &[f64]| instance.evaluate(x),
        &instance.bounds,
        &stop,
        budget,
        &mut StartQueue::random(seed),
    )
    .map_err(|e| e.source)?;
    Ok(harvest_local_optima(&r.converged_minimizers(), stop.xtol_abs))
}

/// How edges are chosen for removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeMode {
    Random,
    WorstCase,
}

impl EdgeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeMode::Random => "random",
            EdgeMode::WorstCase => "worst-case",
        }
    }
}

fn default_reuse_methods() -> Vec<MethodSpec> {
    vec![
        MethodSpec::Restarting(LocalMethod::ModelTrustRegion),
        MethodSpec::Multistart(LocalMethod::ModelTrustRegion),
    ]
}
fn default_edge_modes() -> Vec<EdgeMode> {
    vec![EdgeMode::Random, EdgeMode::WorstCase]
}
fn default_reuse_p() -> usize {
    1
}
fn default_random_edges() -> usize {
    RANDOM_EDGES
}
fn default_exhaustive_budget() -> usize {
    EXHAUSTIVE_BUDGET
}
fn default_warm_points() -> usize {
    MULTISTART_WARM_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReuseConfig {
    #[serde(default = "default_reuse_p")]
    pub p: usize,
    #[serde(default = "default_reuse_methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_edge_modes")]
    pub modes: Vec<EdgeMode>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_random_edges")]
    pub n_random_edges: usize,
    #[serde(default = "default_exhaustive_budget")]
    pub exhaustive_budget: usize,
    /// Cap on harvested optima passed to a multistart warm arm.
    #[serde(default = "default_warm_points")]
    pub multistart_warm_points: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub shots: Option<usize>,
}

impl Default for ReuseConfig {
    fn default() -> Self {
        Self {
            p: 1,
            methods: default_reuse_methods(),
            modes: default_edge_modes(),
            budget: DEFAULT_BUDGET,
            seeds: DEFAULT_SEEDS,
            tau: DEFAULT_TAU,
            n_random_edges: RANDOM_EDGES,
            exhaustive_budget: EXHAUSTIVE_BUDGET,
            multistart_warm_points: MULTISTART_WARM_POINTS,
            base_seed: 0,
            workers: 1,
            shots: None,
        }
    }
}

impl ReuseConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(self.budget, self.seeds, self.tau, self.workers, self.shots)?;
        if self.p == 0 {
            return Err(Error::InvalidArgument("p must be >= 1".into()));
        }
        if self.methods.is_empty() || self.modes.is_empty() {
            return Err(Error::InvalidArgument("methods and modes must be nonempty".into()));
        }
        if self.exhaustive_budget == 0 {
            return Err(Error::InvalidArgument("exhaustive budget must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReuseRecord {
    pub base: String,
    pub removed_edge: Edge,
    pub mode: EdgeMode,
    pub method: MethodSpec,
    pub seed: usize,
    pub cell_seed: u64,
    pub warm_start: bool,
    pub evals: usize,
    pub evals_to_tau: Option<usize>,
    pub final_ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseOptima {
    pub base: String,
    pub optima: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReuseResult {
    pub config: ReuseConfig,
    pub bases: Vec<BaseOptima>,
    pub records: Vec<ReuseRecord>,
    pub skipped: Vec<String>,
}

/// Edges removed from `g` in `mode`, in ascending order.
pub fn edges_to_remove(g: &Graph, mode: EdgeMode, count: usize, seed: u64) -> Result<Vec<Edge>> {
    let edges: Vec<Edge> = g.edges().collect();
    match mode {
        EdgeMode::WorstCase => Ok(vec![worst_case_edge(g)?]),
        EdgeMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<Edge> = sample(&mut rng, edges.len(), count.min(edges.len()))
                .into_iter()
                .map(|i| edges[i])
                .collect();
            picked.sort_unstable();
            Ok(picked)
        }
    }
}

/// Warm versus cold starts on graphs with one edge removed.
pub fn reuse_experiment(graphs: &[NamedGraph], config: &ReuseConfig) -> Result<ReuseResult> {
    config.validate()?;
    let workers = pool(config.workers)?;
    let bases: Vec<ProblemInstance> = graphs
        .iter()
        .map(|g| ProblemInstance::new(g, config.p))
        .collect::<Result<_>>()?;
    let optima: Vec<Vec<(Vec<f64>, f64)>> = workers.install(|| {
        bases
            .par_iter()
            .enumerate()
            .map(|(i, b)| exhaustive_optima(b, config.exhaustive_budget, mix_seed(&[config.base_seed, i as u64, 0xE0])))
            .collect::<Result<_>>()
    })?;

    let mut skipped = Vec::new();
    let mut perturbed: Vec<(usize, EdgeMode, Edge, ProblemInstance)> = Vec::new();
    for &mode in &config.modes {
        for (i, g) in graphs.iter().enumerate() {
            let edges = edges_to_remove(&g.graph, mode, config.n_random_edges, mix_seed(&[config.base_seed, i as u64, 0xED]))?;
            for e in edges {
                let reduced = remove_edge(&g.graph, e)?;
                if reduced.num_edges() == 0 {
                    let reason = format!("{} without {e:?} has no edges", g.id);
                    log::warn!("skipping {reason}");
                    skipped.push(reason);
                    continue;
                }
                let named = NamedGraph {
                    id: g.id.clone(),
                    graph: reduced,
                };
                perturbed.push((i, mode, e, ProblemInstance::new(&named, config.p)?));
            }
        }
    }

    struct Job {
        group: usize,
        method: MethodSpec,
        seed: usize,
        cell_seed: u64,
        warm: bool,
    }
    let mut jobs = Vec::new();
    for (group, (base, _, e, _)) in perturbed.iter().enumerate() {
        for &method in &config.methods {
            for seed in 0..config.seeds {
                // both arms share the seed; only the start points differ
                let cell_seed = mix_seed(&[config.base_seed, *base as u64, e.0 as u64, e.1 as u64, seed as u64]);
                for warm in [true, false] {
                    jobs.push(Job {
                        group,
                        method,
                        seed,
                        cell_seed,
                        warm,
                    });
                }
            }
        }
    }
    let outcomes: Vec<Result<EvalHistory<f64>>> = workers.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (base, _, _, prob) = &perturbed[job.group];
                let warm: Vec<Vec<f64>> = if job.warm {
                    optima[*base].iter().map(|(x, _)| x.clone()).collect()
                } else {
                    Vec::new()
                };
                let stop = StopRule::standard(config.budget);
                let f = prob.objective_fn(config.shots, job.cell_seed);
                run_method(
                    job.method,
                    f,
                    &prob.bounds,
                    &stop,
                    config.budget,
                    job.cell_seed,
                    &warm,
                    config.multistart_warm_points,
                )
                .map(|r| r.history)
            })
            .collect()
    });

    let mut best = vec![f64::INFINITY; perturbed.len()];
    for (job, out) in jobs.iter().zip(&outcomes) {
        if let Ok(h) = out {
            if let Some(v) = h.best_value() {
                best[job.group] = best[job.group].min(v);
            }
        }
    }
    // f(x0) for Eq. 6 is the shared random start of the cold arm
    let x0_value = |group: usize, seed: usize| -> Option<f64> {
        jobs.iter()
            .zip(&outcomes)
            .find(|(j, o)| j.group == group && j.seed == seed && !j.warm && o.as_ref().is_ok_and(|h| !h.is_empty()))
            .and_then(|(_, o)| o.as_ref().ok().map(|h| h.value(0)))
    };

    let mut records = Vec::new();
    for (job, out) in jobs.iter().zip(&outcomes) {
        let (base, mode, edge, _) = &perturbed[job.group];
        let mut record = ReuseRecord {
            base: graphs[*base].id.clone(),
            removed_edge: *edge,
            mode: *mode,
            method: job.method,
            seed: job.seed,
            cell_seed: job.cell_seed,
            warm_start: job.warm,
            evals: 0,
            evals_to_tau: None,
            final_ratio: None,
            error: None,
        };
        match out {
            Err(e) => record.error = Some(e.to_string()),
            Ok(h) => {
                record.evals = h.len();
                if let (Some(x0), Some(found)) = (x0_value(job.group, job.seed), h.best_value()) {
                    record.evals_to_tau = solved_after(h.values(), x0, best[job.group], config.tau)?;
                    record.final_ratio = approximation_ratio(found, best[job.group]).ok();
                }
            }
        }
        records.push(record);
    }
    Ok(ReuseResult {
        config: config.clone(),
        bases: graphs
            .iter()
            .zip(optima)
            .map(|(g, o)| BaseOptima {
                base: g.id.clone(),
                optima: o,
            })
            .collect(),
        records,
        skipped,
    })
}

impl ReuseResult {
    pub fn write_reuse_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "base",
            "removed_u",
            "removed_v",
            "mode",
            "method",
            "seed",
            "warm_start",
            "evals",
            "evals_to_tau",
            "final_ratio",
        ])?;
        for r in &self.records {
            w.write_record([
                r.base.clone(),
                r.removed_edge.0.to_string(),
                r.removed_edge.1.to_string(),
                r.mode.as_str().to_string(),
                r.method.to_string(),
                r.seed.to_string(),
                r.warm_start.to_string(),
                r.evals.to_string(),
                r.evals_to_tau.map_or(String::new(), |t| t.to_string()),
                r.final_ratio.map_or(String::new(), |x| x.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": "reuse",
            "version": env!("CARGO_PKG_VERSION"),
            "multistart": multistart_settings(),
            "config": self.config,
            "base_optima": self.bases.iter().map(|b| serde_json::json!({
                "base": b.base,
                "count": b.optima.len(),
                "best": b.optima.first().map(|o| o.1),
            })).collect::<Vec<_>>(),
            "cells": self.records.iter().map(|r| serde_json::json!({
                "base": r.base,
                "removed_edge": r.removed_edge,
                "mode": r.mode,
                "method": r.method,
                "seed": r.seed,
                "warm_start": r.warm_start,
                "cell_seed": r.cell_seed,
            })).collect::<Vec<_>>(),
            "skipped": self.skipped,
            "failures": self.records.iter().filter(|r| r.error.is_some()).count(),
        })
    }

    /// Writes `reuse.csv` and `reuse_manifest.json`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_reuse_csv(fs::File::create(dir.join("reuse.csv"))?)?;
        write_json(&dir.join("reuse_manifest.json"), &self.manifest())
    }

    /// Evaluations to tau for one arm, unsolved runs counted as
    /// `budget + 1` so they sort last.
    pub fn evals_to_tau(&self, mode: EdgeMode, method: Option<MethodSpec>, warm: bool) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.mode == mode && r.warm_start == warm && r.error.is_none())
            .filter(|r| method.is_none_or(|m| r.method == m))
            .map(|r| r.evals_to_tau.map_or(self.config.budget as f64 + 1.0, |t| t as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_shape() {
        let s = suite_graphs().unwrap();
        assert_eq!(s.len(), 6);
        for g in &s {
            assert!((10..=12).contains(&g.graph.n_vertices()), "{}", g.id);
            assert!(g.graph.is_connected());
        }
        let problems = benchmark_suite(2).unwrap();
        assert!(problems.iter().all(|p| p.bounds.dim() == 4));
    }

    #[test]
    fn method_names_round_trip() {
        for name in MethodSpec::valid_names() {
            let m: MethodSpec = name.parse().unwrap();
            assert_eq!(m.to_string(), name);
        }
        assert_eq!(MethodSpec::valid_names().len(), 9);
        let err = "cobyla".parse::<MethodSpec>().unwrap_err().to_string();
        assert!(err.contains("restarting:model-tr"));
        assert!("restarting:".parse::<MethodSpec>().is_err());
        assert!("sometimes:pattern".parse::<MethodSpec>().is_err());
        let json = serde_json::to_string(&MethodSpec::Multistart(LocalMethod::Pattern)).unwrap();
        assert_eq!(json, "\"multistart:pattern\"");
    }

    #[test]
    fn solved_after_substitution() {
        // f(x0) = 0, best = -1, tau = 0.01: first value <= -0.99
        let values = [0.0, -0.5, -0.98, -0.99, -1.0];
        assert_eq!(solved_after(&values, 0.0, -1.0, 0.01).unwrap(), Some(4));
        assert_eq!(solved_after(&[0.0, 0.0, 0.1], 0.0, -1.0, 0.01).unwrap(), None);
        assert!(solved_after(&[], 0.0, -1.0, 0.01).is_err());
        assert!(solved_after(&[0.0], 0.0, -1.0, 1.0).is_err());
        // a start that is already the best point is solved immediately
        assert_eq!(solved_after(&[-1.0], -1.0, -1.0, 0.01).unwrap(), Some(1));
    }

    #[test]
    fn profile_step_function() {
        let table = ProfileTable {
            tau: 0.01,
            problems: vec!["a".into()],
            methods: vec!["m".into()],
            entries: vec![vec![vec![Some(5)]]],
        };
        let c = &data_profile(&table, &(1..=8).collect::<Vec<_>>()).unwrap()[0];
        assert_eq!(c.d, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let empty = ProfileTable {
            tau: 0.01,
            problems: vec![],
            methods: vec!["m".into()],
            entries: vec![],
        };
        assert!(data_profile(&empty, &[1]).is_err());
    }

    #[test]
    fn ratio_cases() {
        assert_eq!(approximation_ratio(-0.4, -0.4).unwrap(), 1.0);
        assert_eq!(approximation_ratio(0.0, -0.4).unwrap(), 0.0);
        assert_eq!(approximation_ratio(-0.1, 0.0).unwrap_err(), Error::UndefinedRatio(0.0));
    }

    #[test]
    fn quartiles_interpolate() {
        let q = quartiles(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.q25, q.median, q.q75), (1.75, 2.5, 3.25));
        assert!(quartiles(&[]).is_none());
        assert_eq!(quartiles(&[7.0]).unwrap().median, 7.0);
    }

    #[test]
    fn seeds_mix_all_parts() {
        assert_ne!(mix_seed(&[0, 1, 2]), mix_seed(&[0, 2, 1]));
        assert_eq!(mix_seed(&[5, 6]), mix_seed(&[5, 6]));
    }

    #[test]
    fn run_method_respects_budget_and_shared_start() {
        let prob = ProblemInstance::new(&suite_graphs().unwrap()[1], 1).unwrap();
        let mut firsts = Vec::new();
        for spec in Mode::Restart.default_methods().into_iter().chain(Mode::ZeroTol.default_methods()) {
            let stop = Mode::Restart.stop_rule(spec, 60);
            let r = run_method(spec, |x: &[f64]| prob.evaluate(x), &prob.bounds, &stop, 60, 9, &[], 0).unwrap();
            assert!(r.history.len() <= 60, "{spec}");
            firsts.push(r.history.point(0).to_vec());
        }
        assert!(firsts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn single_run_stops_after_one_segment() {
        let prob = ProblemInstance::new(&suite_graphs().unwrap()[0], 1).unwrap();
        let spec = MethodSpec::Single(LocalMethod::NelderMead);
        let r = run_method(spec, |x: &[f64]| prob.evaluate(x), &prob.bounds, &StopRule::standard(1000), 1000, 4, &[], 0)
            .unwrap();
        assert!(r.status.is_converged());
        assert!(r.history.len() < 1000);
        let zero = run_method(spec, |x: &[f64]| prob.evaluate(x), &prob.bounds, &StopRule::zero_tolerance(300), 300, 4, &[], 0)
            .unwrap();
        assert_eq!(zero.history.point(0), r.history.point(0));
    }

    #[test]
    fn small_experiment_tables() {
        let graphs = &suite_graphs().unwrap()[..2];
        let config = ExperimentConfig {
            p_values: vec![1],
            budget: 40,
            seeds: 2,
            ..Default::default()
        };
        let r = run_fixed_budget_experiment(graphs, &config).unwrap();
        assert_eq!(r.cells.len(), 2 * 4 * 2);
        assert_eq!(r.failures, 0);
        for c in &r.cells {
            assert!(c.values.len() <= 40);
            let best = r.problems[c.problem].best_known_f;
            assert!(c.values.iter().all(|&v| v >= best));
            assert!(c.ratio.unwrap() <= 1.0 + 1e-12);
        }
        let mut buf = Vec::new();
        r.write_profiles_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 40);
        assert!(text.starts_with("p,method,alpha,d\n1,restarting:nelder-mead,1,"));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let bad: std::result::Result<ExperimentConfig, _> = serde_json::from_str(r#"{"budgte": 5}"#);
        assert!(bad.is_err());
        let ok: ExperimentConfig = serde_json::from_str(r#"{"mode": "zero-tol"}"#).unwrap();
        assert_eq!(ok.resolved().unwrap().methods, Mode::ZeroTol.default_methods());
        assert!(ExperimentConfig { tau: 0.0, ..Default::default() }.resolved().is_err());
    }

    #[test]
    fn removal_choices() {
        let g = connected_caveman(3, 4).unwrap();
        let a = edges_to_remove(&g, EdgeMode::Random, 5, 1).unwrap();
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&(u, v)| g.has_edge(u, v)));
        assert_eq!(a, edges_to_remove(&g, EdgeMode::Random, 5, 1).unwrap());
        assert_eq!(edges_to_remove(&g, EdgeMode::WorstCase, 5, 1).unwrap().len(), 1);
    }
}
