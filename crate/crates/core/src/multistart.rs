//! Multistart coordinator in the MLSL/APOSMM family.
//!
//! Uniform sample batches and local-run evaluations share one history and
//! one budget. After each batch every history point is screened: a point
//! starts a new local run when no strictly better point lies within the
//! critical radius and it is not near a known or active minimum. Active
//! runs are stepped round-robin, one evaluation each, so results do not
//! depend on scheduling.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localopt::{Ask, Bounds, EvalHistory, LocalMethod, LocalSolver, Status, StopRule};
use crate::scalar::{distance, Real};

pub const DEFAULT_SAMPLE_BATCH: usize = 8;
pub const DEFAULT_SIGMA: f64 = 2.0;
pub const DEFAULT_MAX_ACTIVE_RUNS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartConfig<T> {
    pub total_budget: usize,
    pub sample_batch: usize,
    /// Radius aggressiveness; larger values start fewer runs.
    pub sigma: T,
    pub local_stop: StopRule<T>,
    pub local_method: LocalMethod,
    /// Runs advanced concurrently; further eligible points wait for a
    /// later screening.
    pub max_active_runs: usize,
    pub seed: u64,
    /// Points evaluated before any sampling. The best of them starts a run
    /// immediately; the rest are screened like any other history point.
    pub initial_points: Vec<Vec<T>>,
}

impl<T: Real> MultistartConfig<T> {
    /// Defaults: batch 8, sigma 2, model trust region with standard
    /// tolerances, no warm points.
    pub fn new(total_budget: usize, seed: u64) -> Self {
        Self {
            total_budget,
            sample_batch: DEFAULT_SAMPLE_BATCH,
            sigma: T::lit(DEFAULT_SIGMA),
            local_stop: StopRule::standard(total_budget.max(1)),
            local_method: LocalMethod::ModelTrustRegion,
            max_active_runs: DEFAULT_MAX_ACTIVE_RUNS,
            seed,
            initial_points: Vec::new(),
        }
    }

    pub fn with_local(mut self, method: LocalMethod, stop: StopRule<T>) -> Self {
        self.local_method = method;
        self.local_stop = stop;
        self
    }

    pub fn with_initial_points(mut self, points: Vec<Vec<T>>) -> Self {
        self.initial_points = points;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_batch == 0 {
            return Err(Error::InvalidArgument("sample batch must be >= 1".into()));
        }
        if self.total_budget < self.sample_batch {
            return Err(Error::BudgetTooSmall {
                budget: self.total_budget,
                required: self.sample_batch,
            });
        }
        if self.max_active_runs == 0 {
            return Err(Error::InvalidArgument("max active runs must be >= 1".into()));
        }
        if !(self.sigma > T::zero()) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Where a local run's start point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// A uniform sample.
    Sampled,
    /// A point generated by an earlier local run.
    HistoryPoint,
    /// A caller-supplied initial point.
    Warm,
}

/// State of the coordinator when a run was launched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Launch<T> {
    /// Critical radius in force; `None` for the forced warm launch.
    pub radius: Option<T>,
    pub history_len: usize,
    /// Known optima and active-run bests the start was screened against.
    pub active_minima: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRun<T> {
    pub id: usize,
    pub provenance: Provenance,
    /// History index of the start point (evaluated before the launch).
    pub start_index: usize,
    pub launch: Launch<T>,
    /// History indices of the evaluations this run requested.
    pub eval_indices: Vec<usize>,
    pub status: Status,
    pub best_point: Vec<T>,
    pub best_value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartResult<T> {
    pub history: EvalHistory<T>,
    /// Run that requested each history entry; `None` for samples and warm points.
    pub owner: Vec<Option<usize>>,
    pub runs: Vec<LocalRun<T>>,
    /// Minimizers of runs that stopped on a tolerance, in completion order.
    pub local_optima: Vec<(Vec<T>, T)>,
    pub sample_evals: usize,
}

impl<T: Real> MultistartResult<T> {
    pub fn best(&self) -> Option<(&[T], T)> {
        self.history.best()
    }

    /// Trace with header `eval_index,run_id,x0,...,f`; `run_id` is empty for
    /// samples and warm points.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.history.points().first().map_or(0, Vec::len);
        let mut header = vec!["eval_index".to_string(), "run_id".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.push("f".into());
        w.write_record(&header)?;
        for (i, (p, v)) in self.history.points().iter().zip(self.history.values()).enumerate() {
            let mut row = vec![(i + 1).to_string(), self.owner[i].map_or(String::new(), |r| r.to_string())];
            row.extend(p.iter().map(|x| x.to_string()));
            row.push(v.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// MLSL critical radius after `k` batches of `n` points in dimension `d`.
pub fn critical_radius<T: Real>(k: usize, n: usize, d: usize, volume: T, sigma: T) -> Result<T> {
    let kn = k * n;
    if kn < 2 {
        return Err(Error::InvalidArgument(format!(
            "critical radius needs at least two sample points, got {kn}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let kn = T::count(kn);
    let inner = gamma_one_plus_half::<T>(d) * volume * sigma * kn.ln() / kn;
    Ok(inner.powf(T::one() / T::count(d)) / T::PI().sqrt())
}

/// Gamma(1 + d/2), exact for integer and half-integer arguments.
fn gamma_one_plus_half<T: Real>(d: usize) -> T {
    let half = T::lit(0.5);
    let (mut value, mut x) = if d.is_multiple_of(2) {
        (T::one(), T::one())
    } else {
        // Gamma(3/2)
        (half * T::PI().sqrt(), T::lit(1.5))
    };
    let target = T::one() + T::count(d) * half;
    while x < target - half {
        value *= x;
        x += T::one();
    }
    value
}

/// Start rule: no strictly better point within `radius`, and not within
/// `radius` of any point in `minima`.
pub fn should_start_run<T: Real>(
    history: &EvalHistory<T>,
    candidate: usize,
    radius: T,
    minima: &[Vec<T>],
) -> bool {
    let x = history.point(candidate);
    let v = history.value(candidate);
    let better_nearby = history
        .points()
        .iter()
        .zip(history.values())
        .enumerate()
        .any(|(j, (p, &w))| j != candidate && w < v && distance(x, p) <= radius);
    !better_nearby && minima.iter().all(|m| distance(x, m) > radius)
}

/// Merges points within `dedup_radius` of a better one and sorts ascending
/// by value.
pub fn harvest_local_optima<T: Real>(optima: &[(Vec<T>, T)], dedup_radius: T) -> Vec<(Vec<T>, T)> {
    let mut order: Vec<usize> = (0..optima.len()).collect();
    order.sort_by(|&a, &b| optima[a].1.total_order(&optima[b].1).then(a.cmp(&b)));
    let mut kept: Vec<(Vec<T>, T)> = Vec::new();
    for i in order {
        let (p, v) = &optima[i];
        if kept.iter().all(|(q, _)| distance(p, q) > dedup_radius) {
            kept.push((p.clone(), *v));
        }
    }
    kept
}

struct Active<T> {
    run: LocalRun<T>,
    solver: Box<dyn LocalSolver<T>>,
    /// Known value for the start point, handed to the solver for free.
    start_value: Option<T>,
}

struct Coordinator<'a, T: Real, F> {
    f: F,
    bounds: &'a Bounds<T>,
    config: &'a MultistartConfig<T>,
    history: EvalHistory<T>,
    owner: Vec<Option<usize>>,
    origin: Vec<Provenance>,
    started: Vec<bool>,
    runs: Vec<LocalRun<T>>,
    active: Vec<Active<T>>,
    local_optima: Vec<(Vec<T>, T)>,
    sample_evals: usize,
}

impl<'a, T, F> Coordinator<'a, T, F>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    fn remaining(&self) -> usize {
        self.config.total_budget - self.history.len()
    }

    fn evaluate(&mut self, x: Vec<T>, owner: Option<usize>, origin: Provenance) -> Result<T> {
        let v = (self.f)(&x)?;
        self.history.push(x, v);
        self.owner.push(owner);
        self.origin.push(origin);
        self.started.push(false);
        Ok(v)
    }

    fn minima(&self) -> Vec<Vec<T>> {
        self.local_optima
            .iter()
            .map(|(p, _)| p.clone())
            .chain(self.active.iter().map(|a| a.run.best_point.clone()))
            .collect()
    }

    fn launch(&mut self, index: usize, radius: Option<T>) -> Result<()> {
        let x0 = self.history.point(index).to_vec();
        let v0 = self.history.value(index);
        let solver = self.config.local_method.start(&x0, self.bounds, &self.config.local_stop)?;
        let launch = Launch {
            radius,
            history_len: self.history.len(),
            active_minima: self.minima(),
        };
        log::debug!("run {} starts at history index {index}", self.runs.len() + self.active.len());
        self.started[index] = true;
        let provenance = match radius {
            None => Provenance::Warm,
            Some(_) => self.origin[index],
        };
        self.active.push(Active {
            run: LocalRun {
                id: self.runs.len() + self.active.len(),
                provenance,
                start_index: index,
                launch,
                eval_indices: Vec::new(),
                status: Status::BudgetExhausted,
                best_point: x0,
                best_value: v0,
            },
            solver,
            start_value: Some(v0),
        });
        Ok(())
    }

    fn finish(&mut self, slot: usize, status: Status) {
        let mut done = self.active.remove(slot);
        done.run.status = status;
        if status.is_converged() {
            self.local_optima
                .push((done.run.best_point.clone(), done.run.best_value));
        }
        self.runs.push(done.run);
    }

    /// Steps active runs one evaluation each, in launch order, until they
    /// have all stopped or the budget is gone.
    fn advance(&mut self) -> Result<()> {
        let cap = self.config.local_stop.max_evals;
        while !self.active.is_empty() && self.remaining() > 0 {
            let mut slot = 0;
            while slot < self.active.len() && self.remaining() > 0 {
                if self.active[slot].run.eval_indices.len() >= cap {
                    self.finish(slot, Status::BudgetExhausted);
                    continue;
                }
                let ask = {
                    let a = &mut self.active[slot];
                    loop {
                        match (a.solver.ask(), a.start_value) {
                            (Ask::Evaluate(_), Some(v0)) => {
                                a.start_value = None;
                                a.solver.tell(v0);
                            }
                            (other, _) => break other,
                        }
                    }
                };
                match ask {
                    Ask::Converged(status) => self.finish(slot, status),
                    Ask::Evaluate(x) => {
                        let id = self.active[slot].run.id;
                        let v = self.evaluate(x.clone(), Some(id), Provenance::HistoryPoint)?;
                        let a = &mut self.active[slot];
                        a.solver.tell(v);
                        a.run.eval_indices.push(self.history.len() - 1);
                        if v < a.run.best_value {
                            a.run.best_value = v;
                            a.run.best_point = x;
                        }
                        slot += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn screen(&mut self, radius: T) -> Result<()> {
        let mut order: Vec<usize> = (0..self.history.len()).filter(|&i| !self.started[i]).collect();
        order.sort_by(|&a, &b| {
            self.history
                .value(a)
                .total_order(&self.history.value(b))
                .then(a.cmp(&b))
        });
        for i in order {
            if self.active.len() >= self.config.max_active_runs {
                break;
            }
            if should_start_run(&self.history, i, radius, &self.minima()) {
                self.launch(i, Some(radius))?;
            }
        }
        Ok(())
    }

    fn close(mut self) -> MultistartResult<T> {
        for a in self.active.drain(..) {
            self.runs.push(a.run);
        }
        self.runs.sort_by_key(|r| r.id);
        MultistartResult {
            history: self.history,
            owner: self.owner,
            runs: self.runs,
            local_optima: self.local_optima,
            sample_evals: self.sample_evals,
        }
    }
}

/// Minimizes `f` over `bounds` with the multistart loop. Deterministic for
/// a fixed configuration.
pub fn multistart_minimize<T, F>(f: F, bounds: &Bounds<T>, config: &MultistartConfig<T>) -> Result<MultistartResult<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    config.validate()?;
    for p in &config.initial_points {
        if p.len() != bounds.dim() {
            return Err(Error::Dimension {
                expected: bounds.dim(),
                got: p.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut c = Coordinator {
        f,
        bounds,
        config,
        history: EvalHistory::new(),
        owner: Vec::new(),
        origin: Vec::new(),
        started: Vec::new(),
        runs: Vec::new(),
        active: Vec::new(),
        local_optima: Vec::new(),
        sample_evals: 0,
    };

    for p in &config.initial_points {
        if c.remaining() == 0 {
            break;
        }
        let mut x = p.clone();
        bounds.project(&mut x);
        c.evaluate(x, None, Provenance::Warm)?;
    }
    if let Some(best) = c.history.best_index() {
        c.launch(best, None)?;
        c.advance()?;
    }

    let mut batches = 0;
    while c.remaining() > 0 {
        let n = config.sample_batch.min(c.remaining());
        for _ in 0..n {
            let x = bounds.sample(&mut rng);
            c.evaluate(x, None, Provenance::Sampled)?;
        }
        c.sample_evals += n;
        batches += 1;
        let radius = critical_radius(batches, config.sample_batch, bounds.dim(), bounds.volume(), config.sigma)
            .unwrap_or_else(|_| T::infinity());
        c.screen(radius)?;
        c.advance()?;
    }
    Ok(c.close())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Bounds<f64> {
        Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
    }

    fn gamma_by_recursion(x: f64) -> f64 {
        // Gamma(x) for x a positive multiple of 1/2
        if (x - 1.0).abs() < 1e-12 {
            1.0
        } else if (x - 0.5).abs() < 1e-12 {
            std::f64::consts::PI.sqrt()
        } else {
            (x - 1.0) * gamma_by_recursion(x - 1.0)
        }
    }

    #[test]
    fn gamma_matches_recursion() {
        for d in 1..12 {
            let g: f64 = gamma_one_plus_half(d);
            let expected = gamma_by_recursion(1.0 + d as f64 / 2.0);
            assert!((g - expected).abs() < 1e-9 * expected, "d={d}");
        }
    }

    #[test]
    fn radius_hand_value() {
        // d = 2: Gamma(2) = 1, so r = sqrt(vol * sigma * ln 8 / 8 / pi)
        let pi = std::f64::consts::PI;
        let vol = 2.0 * pi * pi;
        let r = critical_radius(1, 8, 2, vol, 2.0).unwrap();
        let hand = (vol * 2.0 * 8f64.ln() / 8.0).sqrt() / pi.sqrt();
        assert!((r - hand).abs() < 1e-12);
        assert!((r - 1.8073).abs() < 1e-4);
    }

    #[test]
    fn radius_laws() {
        let mut last = f64::INFINITY;
        for k in 1..50 {
            let r = critical_radius(k, 8, 3, 5.0, 2.0).unwrap();
            assert!(r < last);
            last = r;
        }
        for d in 1..6 {
            let a = critical_radius(3, 8, d, 1.7, 2.0).unwrap();
            let b = critical_radius(3, 8, d, 3.4, 2.0).unwrap();
            assert!((b / a - 2f64.powf(1.0 / d as f64)).abs() < 1e-12);
        }
        assert!(critical_radius::<f64>(1, 1, 2, 1.0, 2.0).is_err());
        assert!(critical_radius::<f64>(0, 8, 2, 1.0, 2.0).is_err());
    }

    fn history_of(points: &[(Vec<f64>, f64)]) -> EvalHistory<f64> {
        let mut h = EvalHistory::new();
        for (p, v) in points {
            h.push(p.clone(), *v);
        }
        h
    }

    #[test]
    fn start_rule_cases() {
        let h = history_of(&[(vec![0.0, 0.0], 1.0)]);
        assert!(should_start_run(&h, 0, 10.0, &[]));

        let h = history_of(&[(vec![0.0, 0.0], 1.0), (vec![0.1, 0.0], 0.5)]);
        assert!(!should_start_run(&h, 0, 0.2, &[]));
        assert!(should_start_run(&h, 0, 0.05, &[]));
        assert!(should_start_run(&h, 1, 0.2, &[]));

        // equal values: both pass the ball test, the second is excluded once
        // the first is an active minimum
        let h = history_of(&[(vec![0.0, 0.0], 0.5), (vec![0.1, 0.0], 0.5)]);
        assert!(should_start_run(&h, 0, 0.2, &[]));
        assert!(should_start_run(&h, 1, 0.2, &[]));
        assert!(!should_start_run(&h, 1, 0.2, &[vec![0.0, 0.0]]));
    }

    #[test]
    fn harvest_merges_and_sorts() {
        assert!(harvest_local_optima::<f64>(&[], 0.1).is_empty());
        let optima = vec![
            (vec![0.0, 0.0], -1.0),
            (vec![1.0, 1.0], -2.0),
            (vec![0.0, 0.001], -1.5),
            (vec![1.0, 1.0], -2.0),
        ];
        let h = harvest_local_optima(&optima, 0.01);
        assert_eq!(h, vec![(vec![1.0, 1.0], -2.0), (vec![0.0, 0.001], -1.5)]);
    }

    #[test]
    fn config_validation() {
        let c = MultistartConfig::<f64>::new(4, 0);
        assert!(matches!(c.validate(), Err(Error::BudgetTooSmall { .. })));
        let mut c = MultistartConfig::<f64>::new(100, 0);
        c.sample_batch = 0;
        assert!(c.validate().is_err());
        let mut c = MultistartConfig::<f64>::new(100, 0);
        c.sigma = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unimodal_has_one_optimum_cluster() {
        let stop = StopRule::standard(200);
        let config = MultistartConfig::new(200, 7).with_local(LocalMethod::ModelTrustRegion, stop);
        let r = multistart_minimize(|x: &[f64]| Ok(x[0] * x[0] + x[1] * x[1]), &square(), &config).unwrap();
        assert_eq!(r.history.len(), 200);
        assert!(!r.local_optima.is_empty());
        for (p, _) in &r.local_optima {
            assert!(p.iter().map(|x| x * x).sum::<f64>().sqrt() <= 2.0 * stop.xtol_abs, "{p:?}");
        }
        assert_eq!(harvest_local_optima(&r.local_optima, 2.0 * stop.xtol_abs).len(), 1);
    }

    #[test]
    fn finds_both_symmetric_basins() {
        let b = Bounds::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap();
        let f = |x: &[f64]| Ok((x[0] * x[0] - 1.0).powi(2) + x[1] * x[1]);
        let stop = StopRule::new(1e-8, 1e-4, 500).unwrap();
        let config = MultistartConfig::new(500, 3).with_local(LocalMethod::ModelTrustRegion, stop);
        let r = multistart_minimize(f, &b, &config).unwrap();
        for target in [-1.0, 1.0] {
            assert!(
                r.local_optima
                    .iter()
                    .any(|(p, _)| (p[0] - target).abs() < 1e-2 && p[1].abs() < 1e-2),
                "missing {target}: {:?}",
                r.local_optima
            );
        }
    }

    #[test]
    fn accounting_and_launch_rule() {
        let b = Bounds::new(vec![0.0, 0.0, 0.0], vec![3.0, 3.0, 3.0]).unwrap();
        let f = |x: &[f64]| Ok(x.iter().map(|v| (2.0 * v).sin() + 0.1 * v * v).sum());
        for method in LocalMethod::ALL {
            let config = MultistartConfig::new(600, 11).with_local(method, StopRule::standard(600));
            let r = multistart_minimize(f, &b, &config).unwrap();
            let run_evals: usize = r.runs.iter().map(|run| run.eval_indices.len()).sum();
            assert_eq!(run_evals + r.sample_evals, r.history.len());
            assert_eq!(r.history.len(), 600);
            assert_eq!(r.owner.len(), 600);
            assert!(r.runs.len() >= 2, "{method}");
            for run in &r.runs {
                let radius = run.launch.radius.unwrap();
                let prefix = history_of(
                    &r.history.points()[..run.launch.history_len]
                        .iter()
                        .cloned()
                        .zip(r.history.values()[..run.launch.history_len].iter().copied())
                        .collect::<Vec<_>>(),
                );
                assert!(should_start_run(&prefix, run.start_index, radius, &run.launch.active_minima));
                for &i in &run.eval_indices {
                    assert_eq!(r.owner[i], Some(run.id));
                }
                // best over the run matches what it evaluated
                let best = run
                    .eval_indices
                    .iter()
                    .map(|&i| r.history.value(i))
                    .fold(r.history.value(run.start_index), f64::min);
                assert_eq!(best, run.best_value);
            }
            let best_run = r.runs.iter().map(|run| run.best_value).fold(f64::INFINITY, f64::min);
            assert!(r.best().unwrap().1 <= best_run);
            assert!(r.history.points().iter().all(|p| b.contains(p)));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let f = |x: &[f64]| Ok((3.0 * x[0]).cos() * (2.0 * x[1]).sin() + 0.2 * x[0]);
        let config = MultistartConfig::new(300, 99);
        let a = multistart_minimize(f, &square(), &config).unwrap();
        let b = multistart_minimize(f, &square(), &config).unwrap();
        assert_eq!(a, b);
        let other = multistart_minimize(f, &square(), &MultistartConfig::new(300, 100)).unwrap();
        assert_ne!(a.history, other.history);
    }

    #[test]
    fn warm_point_runs_first() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2));
        let config = MultistartConfig::new(100, 1).with_initial_points(vec![vec![0.9, 0.9], vec![0.3, -0.2]]);
        let r = multistart_minimize(f, &square(), &config).unwrap();
        assert_eq!(r.history.point(0), &[0.9, 0.9]);
        assert_eq!(r.runs[0].provenance, Provenance::Warm);
        assert_eq!(r.runs[0].start_index, 1);
        assert_eq!(r.runs[0].launch.radius, None);
        assert_eq!(r.history.len(), 100);
    }

    #[test]
    fn objective_error_propagates() {
        let mut n = 0;
        let f = |_: &[f64]| {
            n += 1;
            if n > 20 {
                Err(Error::Objective("stop".into()))
            } else {
                Ok(1.0)
            }
        };
        let err = multistart_minimize(f, &square(), &MultistartConfig::new(100, 0)).unwrap_err();
        assert_eq!(err, Error::Objective("stop".into()));
    }

    #[test]
    fn samples_are_uniform() {
        // one-sample Kolmogorov-Smirnov per coordinate; 1.949/sqrt(n) is the
        // asymptotic critical value at significance 0.001
        let b = Bounds::new(vec![-1.0, 2.0], vec![1.0, 7.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| b.sample(&mut rng)).collect();
        for i in 0..2 {
            let mut u: Vec<f64> = pts.iter().map(|p| (p[i] - b.lower()[i]) / b.width(i)).collect();
            u.sort_by(f64::total_cmp);
            let d = u
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let lo = x - j as f64 / n as f64;
                    let hi = (j + 1) as f64 / n as f64 - x;
                    lo.max(hi)
                })
                .fold(0.0, f64::max);
            assert!(d < 1.949 / (n as f64).sqrt(), "coordinate {i}: D = {d}");
        }
    }

    #[test]
    fn trace_has_run_column() {
        let config = MultistartConfig::new(20, 5);
        let r = multistart_minimize(|x: &[f64]| Ok(x[0] + x[1]), &square(), &config).unwrap();
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("eval_index,run_id,x0,x1,f\n1,,"));
        assert_eq!(text.lines().count(), 21);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn budget_law(seed in 0u64..500, budget in 8usize..200, shift in -1.0f64..1.0) {
                let f = |x: &[f64]| Ok(((x[0] - shift) * 4.0).sin() + x[1] * x[1]);
                let config = MultistartConfig::new(budget, seed);
                let r = multistart_minimize(f, &square(), &config).unwrap();
                prop_assert_eq!(r.history.len(), budget);
                let run_evals: usize = r.runs.iter().map(|run| run.eval_indices.len()).sum();
                prop_assert_eq!(run_evals + r.sample_evals, budget);
                let mut ids: Vec<usize> = r.runs.iter().map(|run| run.id).collect();
                ids.dedup();
                prop_assert_eq!(ids.len(), r.runs.len());
            }
        }
    }
}
