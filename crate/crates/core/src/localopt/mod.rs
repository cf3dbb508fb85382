//! Bounded derivative-free local solvers sharing one budget and tolerance
//! contract, and the random-restart wrapper around them.
//!
//! Every solver is a resumable state machine behind [`LocalSolver`]: `ask`
//! yields the next point to evaluate (or reports convergence) and `tell`
//! feeds the value back. The drivers in this module own the objective and
//! the evaluation budget, so a solver never calls `f` itself. The multistart
//! coordinator relies on this to advance many runs one evaluation at a time.

mod nelder_mead;
mod pattern;
mod trust_region;

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use nelder_mead::NelderMead;
pub use pattern::PatternSearch;
pub use trust_region::ModelTrustRegion;

/// Step or radius below this fraction of the widest box side counts as a
/// numerical stall and ends a run as converged in `x`.
pub const STALL_FRACTION: f64 = 1e-10;

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> Bounds<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("bounds have dimension 0".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidArgument("need lower < upper componentwise".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The QAOA box `([0, pi] x [0, 2pi])^p` in `[beta.., gamma..]` layout.
    pub fn qaoa(p: usize) -> Result<Self> {
        let (lower, upper) = crate::simulator::QaoaParams::<T>::default_domain(p);
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    pub fn max_width(&self) -> T {
        (0..self.dim()).map(|i| self.width(i)).fold(T::zero(), T::max)
    }

    pub fn min_width(&self) -> T {
        (0..self.dim()).map(|i| self.width(i)).fold(T::infinity(), T::min)
    }

    pub fn volume(&self) -> T {
        (0..self.dim()).map(|i| self.width(i)).fold(T::one(), |a, w| a * w)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// Clamps `x` into the box.
    pub fn project(&self, x: &mut [T]) {
        for (v, (&l, &u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.max(l).min(u);
        }
    }

    /// One uniform point; consumes exactly `dim` draws from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        (0..self.dim())
            .map(|i| {
                let u = T::lit(rng.gen::<f64>());
                (self.lower[i] + u * self.width(i)).min(self.upper[i])
            })
            .collect()
    }

    pub(crate) fn stall_threshold(&self) -> T {
        T::lit(STALL_FRACTION) * self.max_width()
    }
}

/// Per-run stopping rule. Tolerances are absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule<T> {
    pub ftol_abs: T,
    pub xtol_abs: T,
    pub max_evals: usize,
}

impl<T: Real> StopRule<T> {
    pub fn new(ftol_abs: T, xtol_abs: T, max_evals: usize) -> Result<Self> {
        if !(ftol_abs >= T::zero()) || !(xtol_abs >= T::zero()) {
            return Err(Error::InvalidArgument("tolerances must be >= 0".into()));
        }
        if max_evals == 0 {
            return Err(Error::InvalidArgument("max_evals must be >= 1".into()));
        }
        Ok(Self {
            ftol_abs,
            xtol_abs,
            max_evals,
        })
    }

    /// `ftol = 1e-3`, `xtol = 1e-2`.
    pub fn standard(max_evals: usize) -> Self {
        Self {
            ftol_abs: T::lit(1e-3),
            xtol_abs: T::lit(1e-2),
            max_evals,
        }
    }

    pub fn zero_tolerance(max_evals: usize) -> Self {
        Self {
            ftol_abs: T::zero(),
            xtol_abs: T::zero(),
            max_evals,
        }
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn is_zero_tolerance(&self) -> bool {
        self.ftol_abs == T::zero() && self.xtol_abs == T::zero()
    }
}

/// Every evaluated point in order, with the index of the best one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalHistory<T> {
    points: Vec<Vec<T>>,
    values: Vec<T>,
    best_index: Option<usize>,
}

impl<T: Real> Default for EvalHistory<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> EvalHistory<T> {
    pub fn new() -> Self {
        Self {
            points: Vec::new(),
            values: Vec::new(),
            best_index: None,
        }
    }

    pub fn push(&mut self, point: Vec<T>, value: T) {
        let idx = self.values.len();
        if self.best_index.is_none_or(|b| value < self.values[b]) {
            self.best_index = Some(idx);
        }
        self.points.push(point);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    pub fn value(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn best_index(&self) -> Option<usize> {
        self.best_index
    }

    pub fn best(&self) -> Option<(&[T], T)> {
        self.best_index.map(|i| (self.points[i].as_slice(), self.values[i]))
    }

    pub fn best_value(&self) -> Option<T> {
        self.best_index.map(|i| self.values[i])
    }

    /// Best value seen after each evaluation.
    pub fn running_min(&self) -> Vec<T> {
        let mut best = T::infinity();
        self.values
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }

    pub(crate) fn extend_from(&mut self, other: &EvalHistory<T>) {
        for (p, &v) in other.points.iter().zip(&other.values) {
            self.push(p.clone(), v);
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    ConvergedFtol,
    ConvergedXtol,
    BudgetExhausted,
}

impl Status {
    pub fn is_converged(self) -> bool {
        !matches!(self, Status::BudgetExhausted)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::ConvergedFtol => "converged-ftol",
            Status::ConvergedXtol => "converged-xtol",
            Status::BudgetExhausted => "budget-exhausted",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One local run inside a [`RunResult`]; restarted runs have several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSegment<T> {
    /// Index of the segment's first evaluation in the combined history.
    pub first_eval: usize,
    pub evals: usize,
    pub status: Status,
    /// Whether the start came from a warm-start queue.
    pub warm: bool,
    pub best_point: Vec<T>,
    pub best_value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult<T> {
    pub history: EvalHistory<T>,
    pub status: Status,
    pub evals_used: usize,
    pub segments: Vec<RunSegment<T>>,
}

impl<T: Real> RunResult<T> {
    pub fn best(&self) -> Option<(&[T], T)> {
        self.history.best()
    }

    /// Minimizers of the segments that stopped on a tolerance.
    pub fn converged_minimizers(&self) -> Vec<(Vec<T>, T)> {
        self.segments
            .iter()
            .filter(|s| s.status.is_converged())
            .map(|s| (s.best_point.clone(), s.best_value))
            .collect()
    }

    /// Flat trace with header `eval_index,x0,...,f`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.history.points().first().map_or(0, Vec::len);
        let mut header = vec!["eval_index".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.push("f".into());
        w.write_record(&header)?;
        for (i, (p, v)) in self.history.points().iter().zip(self.history.values()).enumerate() {
            let mut row = vec![(i + 1).to_string()];
            row.extend(p.iter().map(|x| x.to_string()));
            row.push(v.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A failed objective call, with everything evaluated before it.
#[derive(Debug, Clone)]
pub struct RunError<T> {
    pub source: Error,
    pub partial: Box<RunResult<T>>,
}

impl<T> fmt::Display for RunError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "objective failed after {} evaluations: {}",
            self.partial.evals_used, self.source
        )
    }
}

impl<T: fmt::Debug> std::error::Error for RunError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Next request from a solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Ask<T> {
    Evaluate(Vec<T>),
    Converged(Status),
}

/// Step-wise interface shared by the local solvers.
pub trait LocalSolver<T: Real>: Send {
    /// Next point to evaluate, or the convergence status. Repeated calls
    /// without an intervening `tell` return the same request.
    fn ask(&mut self) -> Ask<T>;

    /// Value of the point returned by the last `ask`.
    fn tell(&mut self, value: T);

    /// Best point the solver has been told about.
    fn best(&self) -> Option<(&[T], T)>;
}

/// The three local methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalMethod {
    #[serde(rename = "nelder-mead")]
    NelderMead,
    #[serde(rename = "pattern")]
    Pattern,
    #[serde(rename = "model-tr")]
    ModelTrustRegion,
}

impl LocalMethod {
    pub const ALL: [LocalMethod; 3] = [
        LocalMethod::NelderMead,
        LocalMethod::Pattern,
        LocalMethod::ModelTrustRegion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LocalMethod::NelderMead => "nelder-mead",
            LocalMethod::Pattern => "pattern",
            LocalMethod::ModelTrustRegion => "model-tr",
        }
    }

    /// Builds a solver starting at `x0`, which must lie in `bounds`.
    pub fn start<T: Real>(
        self,
        x0: &[T],
        bounds: &Bounds<T>,
        stop: &StopRule<T>,
    ) -> Result<Box<dyn LocalSolver<T>>> {
        check_start(x0, bounds)?;
        Ok(match self {
            LocalMethod::NelderMead => Box::new(NelderMead::new(x0, bounds.clone(), *stop)),
            LocalMethod::Pattern => Box::new(PatternSearch::new(x0, bounds.clone(), *stop)),
            LocalMethod::ModelTrustRegion => {
                Box::new(ModelTrustRegion::new(x0, bounds.clone(), *stop))
            }
        })
    }

    /// Smallest budget the method accepts for a standalone run.
    pub fn min_budget(self, dim: usize) -> usize {
        match self {
            LocalMethod::ModelTrustRegion => 2 * dim + 1,
            _ => 1,
        }
    }
}

impl fmt::Display for LocalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LocalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LocalMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown local method {s:?}")))
    }
}

fn check_start<T: Real>(x0: &[T], bounds: &Bounds<T>) -> Result<()> {
    if x0.len() != bounds.dim() {
        return Err(Error::Dimension {
            expected: bounds.dim(),
            got: x0.len(),
        });
    }
    if !bounds.contains(x0) {
        return Err(Error::InvalidArgument("start point lies outside the bounds".into()));
    }
    Ok(())
}

/// Runs `solver` until it converges or `budget` evaluations have been made,
/// appending every evaluation to `history`.
pub(crate) fn drive<T, F>(
    solver: &mut dyn LocalSolver<T>,
    f: &mut F,
    budget: usize,
    history: &mut EvalHistory<T>,
) -> Result<Status>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    let mut used = 0;
    loop {
        if used >= budget {
            return Ok(Status::BudgetExhausted);
        }
        match solver.ask() {
            Ask::Converged(status) => return Ok(status),
            Ask::Evaluate(x) => {
                let v = f(&x)?;
                used += 1;
                solver.tell(v);
                history.push(x, v);
            }
        }
    }
}

/// One run of `method` from `x0` with `stop.max_evals` evaluations at most.
pub fn single_run<T, F>(
    method: LocalMethod,
    mut f: F,
    x0: &[T],
    bounds: &Bounds<T>,
    stop: &StopRule<T>,
) -> std::result::Result<RunResult<T>, RunError<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    let fail_early = |source| RunError {
        source,
        partial: Box::new(RunResult {
            history: EvalHistory::new(),
            status: Status::BudgetExhausted,
            evals_used: 0,
            segments: Vec::new(),
        }),
    };
    let required = method.min_budget(bounds.dim());
    if stop.max_evals < required {
        return Err(fail_early(Error::BudgetTooSmall {
            budget: stop.max_evals,
            required,
        }));
    }
    let mut solver = method.start(x0, bounds, stop).map_err(fail_early)?;
    let mut history = EvalHistory::new();
    let outcome = drive(solver.as_mut(), &mut f, stop.max_evals, &mut history);
    let status = outcome.as_ref().copied().unwrap_or(Status::BudgetExhausted);
    let segments = history
        .best()
        .map(|(p, v)| RunSegment {
            first_eval: 0,
            evals: history.len(),
            status,
            warm: false,
            best_point: p.to_vec(),
            best_value: v,
        })
        .into_iter()
        .collect();
    let result = RunResult {
        evals_used: history.len(),
        history,
        status,
        segments,
    };
    match outcome {
        Ok(_) => Ok(result),
        Err(source) => Err(RunError {
            source,
            partial: Box::new(result),
        }),
    }
}

/// Bounded Nelder-Mead from `x0`.
pub fn nelder_mead<T, F>(
    f: F,
    x0: &[T],
    bounds: &Bounds<T>,
    stop: &StopRule<T>,
) -> std::result::Result<RunResult<T>, RunError<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    single_run(LocalMethod::NelderMead, f, x0, bounds, stop)
}

/// Compass search from `x0`.
pub fn pattern_search<T, F>(
    f: F,
    x0: &[T],
    bounds: &Bounds<T>,
    stop: &StopRule<T>,
) -> std::result::Result<RunResult<T>, RunError<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    single_run(LocalMethod::Pattern, f, x0, bounds, stop)
}

/// Quadratic-model trust-region search from `x0`. Needs a budget of at least
/// `2d + 1` evaluations.
pub fn model_trust_region<T, F>(
    f: F,
    x0: &[T],
    bounds: &Bounds<T>,
    stop: &StopRule<T>,
) -> std::result::Result<RunResult<T>, RunError<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    single_run(LocalMethod::ModelTrustRegion, f, x0, bounds, stop)
}

/// Start points for successive runs: queued points first, then uniform
/// draws from the box.
#[derive(Debug, Clone)]
pub struct StartQueue<T> {
    queued: VecDeque<Vec<T>>,
    rng: ChaCha8Rng,
}

impl<T: Real> StartQueue<T> {
    pub fn random(seed: u64) -> Self {
        Self {
            queued: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn warm(points: impl IntoIterator<Item = Vec<T>>, seed: u64) -> Self {
        Self {
            queued: points.into_iter().collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Next start and whether it came from the queue. Queued points are
    /// clamped into the box.
    pub fn next_start(&mut self, bounds: &Bounds<T>) -> (Vec<T>, bool) {
        match self.queued.pop_front() {
            Some(mut p) => {
                bounds.project(&mut p);
                (p, true)
            }
            None => (bounds.sample(&mut self.rng), false),
        }
    }
}

/// Repeats local runs from fresh uniform starts until `total_budget`
/// evaluations are spent. Zero tolerances disable restarting: the single
/// run may then stop before the budget.
pub fn restarting<T, F>(
    method: LocalMethod,
    f: F,
    bounds: &Bounds<T>,
    stop_per_run: &StopRule<T>,
    total_budget: usize,
    seed: u64,
) -> std::result::Result<RunResult<T>, RunError<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    restarting_from(
        method,
        f,
        bounds,
        stop_per_run,
        total_budget,
        &mut StartQueue::random(seed),
    )
}

/// [`restarting`] with an explicit start queue (used for warm starts).
pub fn restarting_from<T, F>(
    method: LocalMethod,
    mut f: F,
    bounds: &Bounds<T>,
    stop_per_run: &StopRule<T>,
    total_budget: usize,
    starts: &mut StartQueue<T>,
) -> std::result::Result<RunResult<T>, RunError<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    let mut result = RunResult {
        history: EvalHistory::new(),
        status: Status::BudgetExhausted,
        evals_used: 0,
        segments: Vec::new(),
    };
    if total_budget == 0 {
        return Err(RunError {
            source: Error::InvalidArgument("total budget must be >= 1".into()),
            partial: Box::new(result),
        });
    }
    loop {
        let remaining = total_budget - result.history.len();
        if remaining == 0 {
            result.status = Status::BudgetExhausted;
            break;
        }
        let (x0, warm) = starts.next_start(bounds);
        let stop = stop_per_run.with_max_evals(stop_per_run.max_evals.min(remaining));
        let mut solver = match method.start(&x0, bounds, &stop) {
            Ok(s) => s,
            Err(source) => {
                return Err(RunError {
                    source,
                    partial: Box::new(result),
                })
            }
        };
        let mut segment = EvalHistory::new();
        let outcome = drive(solver.as_mut(), &mut f, stop.max_evals, &mut segment);
        let status = outcome.as_ref().copied().unwrap_or(Status::BudgetExhausted);
        if let Some((p, v)) = segment.best() {
            result.segments.push(RunSegment {
                first_eval: result.history.len(),
                evals: segment.len(),
                status,
                warm,
                best_point: p.to_vec(),
                best_value: v,
            });
        }
        result.history.extend_from(&segment);
        result.evals_used = result.history.len();
        result.status = status;
        if let Err(source) = outcome {
            return Err(RunError {
                source,
                partial: Box::new(result),
            });
        }
        if stop_per_run.is_zero_tolerance() || segment.is_empty() {
            break;
        }
    }
    if result.history.len() >= total_budget {
        result.status = Status::BudgetExhausted;
    }
    Ok(result)
}
