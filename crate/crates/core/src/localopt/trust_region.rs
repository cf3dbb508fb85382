//! Bound-constrained trust-region method on quadratic interpolation models.
//!
//! The model interpolates `2d + 1` points. Each refit keeps the Hessian as
//! close as possible (Frobenius norm) to the previous one, which is the
//! least-change update used by BOBYQA-type methods. The model is minimized
//! over the intersection of the trust ball and the box.

use super::{Ask, Bounds, LocalSolver, Status, StopRule};
use crate::linalg::{dot, mat_vec, norm, solve_dense};
use crate::scalar::{distance, Real};

const ETA_SHRINK: f64 = 0.1;
const ETA_EXPAND: f64 = 0.7;
const SHRINK: f64 = 0.5;
const EXPAND: f64 = 2.0;
const INITIAL_RADIUS: f64 = 0.1;
const PIVOT_TOL: f64 = 1e-13;
const SUBPROBLEM_ITERS: usize = 200;

#[derive(Debug, Clone)]
enum Phase<T> {
    /// Evaluating interpolation points `next..`.
    Init { next: usize },
    Ready,
    /// `last` marks a final step taken after the model predicted less than
    /// `ftol`; the run stops unless the step does better than predicted.
    Trial { predicted: T, step_norm: T, last: bool },
    Geometry { replace: usize },
    Done(Status),
}

#[derive(Debug, Clone)]
pub struct ModelTrustRegion<T> {
    bounds: Bounds<T>,
    stop: StopRule<T>,
    points: Vec<Vec<T>>,
    values: Vec<T>,
    best: usize,
    radius: T,
    hessian: Vec<T>,
    pending: Vec<T>,
    phase: Phase<T>,
    geometry_due: bool,
}

impl<T: Real> ModelTrustRegion<T> {
    pub fn new(x0: &[T], bounds: Bounds<T>, stop: StopRule<T>) -> Self {
        let d = x0.len();
        let radius = T::lit(INITIAL_RADIUS) * bounds.min_width();
        let points = stencil(x0, radius, &bounds);
        Self {
            bounds,
            stop,
            values: vec![T::zero(); points.len()],
            pending: x0.to_vec(),
            points,
            best: 0,
            radius,
            hessian: vec![T::zero(); d * d],
            phase: Phase::Init { next: 0 },
            geometry_due: false,
        }
    }

    fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// Re-seeds the interpolation set around the current best point.
    fn rebuild(&mut self) -> Ask<T> {
        let center = self.points[self.best].clone();
        let f_center = self.values[self.best];
        self.points = stencil(&center, self.radius, &self.bounds);
        self.values = vec![T::zero(); self.points.len()];
        self.values[0] = f_center;
        self.best = 0;
        self.hessian.iter_mut().for_each(|h| *h = T::zero());
        self.pending = self.points[1].clone();
        self.phase = Phase::Init { next: 1 };
        Ask::Evaluate(self.pending.clone())
    }

    fn max_spread(&self) -> (usize, T) {
        let xopt = &self.points[self.best];
        let mut far = (usize::MAX, T::zero());
        for (k, y) in self.points.iter().enumerate() {
            if k == self.best {
                continue;
            }
            let dist = distance(y, xopt);
            if far.0 == usize::MAX || dist > far.1 {
                far = (k, dist);
            }
        }
        far
    }

    /// Least-change quadratic model around the best point: returns the
    /// gradient and stores the new Hessian.
    fn fit_model(&mut self) -> Option<Vec<T>> {
        let d = self.dim();
        let m = self.points.len();
        let xopt = &self.points[self.best];
        let f_opt = self.values[self.best];
        let steps: Vec<Vec<T>> = self
            .points
            .iter()
            .map(|y| y.iter().zip(xopt).map(|(&a, &b)| a - b).collect())
            .collect();
        let scale = steps.iter().map(|s| norm(s)).fold(T::zero(), T::max);
        if scale == T::zero() {
            return None;
        }
        let scaled: Vec<Vec<T>> = steps
            .iter()
            .map(|s| s.iter().map(|&x| x / scale).collect())
            .collect();
        let h_old: Vec<T> = self.hessian.iter().map(|&h| h * scale * scale).collect();

        let half = T::lit(0.5);
        let size = m + 1 + d;
        let mut a = vec![T::zero(); size * size];
        let mut rhs = vec![T::zero(); size];
        for k in 0..m {
            for j in 0..m {
                let sk = dot(&scaled[k], &scaled[j]);
                a[k * size + j] = half * sk * sk;
            }
            a[k * size + m] = T::one();
            a[m * size + k] = T::one();
            for i in 0..d {
                a[k * size + m + 1 + i] = scaled[k][i];
                a[(m + 1 + i) * size + k] = scaled[k][i];
            }
            let curvature = half * dot(&scaled[k], &mat_vec(&h_old, &scaled[k]));
            rhs[k] = (self.values[k] - f_opt) - curvature;
        }
        let sol = solve_dense(a, rhs, T::lit(PIVOT_TOL))?;
        let lambda = &sol[..m];
        let grad: Vec<T> = sol[m + 1..].iter().map(|&g| g / scale).collect();
        let mut hess = h_old;
        for (lam, s) in lambda.iter().zip(&scaled) {
            for r in 0..d {
                for c in 0..d {
                    hess[r * d + c] += *lam * s[r] * s[c];
                }
            }
        }
        let inv = T::one() / (scale * scale);
        self.hessian = hess.into_iter().map(|h| h * inv).collect();
        if grad.iter().chain(&self.hessian).any(|v| !v.is_finite()) {
            return None;
        }
        Some(grad)
    }

    fn geometry_point(&self, replace: usize) -> Option<Vec<T>> {
        let xopt = &self.points[self.best];
        let mut best: Option<(Vec<T>, T)> = None;
        for i in 0..self.dim() {
            for sign in [T::one(), -T::one()] {
                let mut x = xopt.clone();
                x[i] += sign * self.radius;
                if !self.bounds.contains(&x) {
                    continue;
                }
                let sep = self
                    .points
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != replace)
                    .map(|(_, y)| distance(y, &x))
                    .fold(T::infinity(), T::min);
                if best.as_ref().is_none_or(|(_, s)| sep > *s) {
                    best = Some((x, sep));
                }
            }
        }
        best.map(|(x, _)| x)
    }

    fn iterate(&mut self) -> Ask<T> {
        let mut geometry_tried = false;
        loop {
            if self.radius < self.stop.xtol_abs || self.radius <= self.bounds.stall_threshold() {
                self.phase = Phase::Done(Status::ConvergedXtol);
                return Ask::Converged(Status::ConvergedXtol);
            }
            if self.geometry_due {
                self.geometry_due = false;
                geometry_tried = true;
                let (far, _) = self.max_spread();
                if let Some(x) = self.geometry_point(far) {
                    self.pending = x;
                    self.phase = Phase::Geometry { replace: far };
                    return Ask::Evaluate(self.pending.clone());
                }
            }
            let Some(grad) = self.fit_model() else {
                return self.rebuild();
            };
            let xopt = self.points[self.best].clone();
            let lo: Vec<T> = self.bounds.lower().iter().zip(&xopt).map(|(&l, &x)| l - x).collect();
            let hi: Vec<T> = self.bounds.upper().iter().zip(&xopt).map(|(&u, &x)| u - x).collect();
            let step = solve_subproblem(&grad, &self.hessian, self.radius, &lo, &hi);
            let predicted = -model_change(&grad, &self.hessian, &step);
            let mut last = false;
            if !(predicted > T::zero()) || predicted < self.stop.ftol_abs {
                let (_, spread) = self.max_spread();
                if spread > T::lit(2.0) * self.radius && !geometry_tried {
                    self.geometry_due = true;
                    continue;
                }
                if self.stop.ftol_abs > T::zero() {
                    if !(predicted > T::zero()) {
                        self.phase = Phase::Done(Status::ConvergedFtol);
                        return Ask::Converged(Status::ConvergedFtol);
                    }
                    last = true;
                } else {
                    self.radius *= T::lit(SHRINK);
                    continue;
                }
            }
            let mut trial: Vec<T> = xopt.iter().zip(&step).map(|(&x, &s)| x + s).collect();
            self.bounds.project(&mut trial);
            self.pending = trial;
            self.phase = Phase::Trial {
                predicted,
                step_norm: norm(&step),
                last,
            };
            return Ask::Evaluate(self.pending.clone());
        }
    }

    fn farthest_from(&self, x: &[T]) -> usize {
        let mut far = (usize::MAX, T::zero());
        for (k, y) in self.points.iter().enumerate() {
            if k == self.best {
                continue;
            }
            let dist = distance(y, x);
            if far.0 == usize::MAX || dist > far.1 {
                far = (k, dist);
            }
        }
        far.0
    }
}

/// `2d + 1` points: the centre and one pair per coordinate, `+-r` when both
/// fit in the box, otherwise `r` and `2r` towards the interior.
fn stencil<T: Real>(center: &[T], radius: T, bounds: &Bounds<T>) -> Vec<Vec<T>> {
    let mut points = vec![center.to_vec()];
    for i in 0..center.len() {
        let r = radius.min(T::lit(0.25) * bounds.width(i));
        let (up, down) = (center[i] + r, center[i] - r);
        let offsets = if up <= bounds.upper()[i] && down >= bounds.lower()[i] {
            [r, -r]
        } else if up > bounds.upper()[i] {
            [-r, -(r + r)]
        } else {
            [r, r + r]
        };
        for off in offsets {
            let mut x = center.to_vec();
            x[i] += off;
            bounds.project(&mut x);
            points.push(x);
        }
    }
    points
}

fn model_change<T: Real>(g: &[T], h: &[T], s: &[T]) -> T {
    dot(g, s) + T::lit(0.5) * dot(s, &mat_vec(h, s))
}

fn project_step<T: Real>(s: &mut [T], radius: T, lo: &[T], hi: &[T]) {
    for ((x, &l), &u) in s.iter_mut().zip(lo).zip(hi) {
        *x = x.max(l).min(u);
    }
    let n = norm(s);
    if n > radius {
        let c = radius / n;
        s.iter_mut().for_each(|x| *x *= c);
    }
}

/// Approximately minimizes the model over `|s| <= radius`, `lo <= s <= hi`
/// by projected gradient descent, also trying the projected Newton step.
fn solve_subproblem<T: Real>(g: &[T], h: &[T], radius: T, lo: &[T], hi: &[T]) -> Vec<T> {
    let d = g.len();
    let mut best = vec![T::zero(); d];
    let mut best_q = T::zero();

    if let Some(mut newton) = solve_dense(h.to_vec(), g.iter().map(|&x| -x).collect(), T::lit(1e-12)) {
        project_step(&mut newton, radius, lo, hi);
        let q = model_change(g, h, &newton);
        if q < best_q {
            best_q = q;
            best = newton;
        }
    }

    let lipschitz = h.iter().map(|&x| x * x).sum::<T>().sqrt();
    let gnorm = norm(g);
    let mut t = if lipschitz > T::epsilon() {
        T::one() / lipschitz
    } else if gnorm > T::zero() {
        radius / gnorm
    } else {
        return best;
    };
    let mut s = vec![T::zero(); d];
    let mut q = T::zero();
    for _ in 0..SUBPROBLEM_ITERS {
        let hs = mat_vec(h, &s);
        let mut next: Vec<T> = s
            .iter()
            .zip(g.iter().zip(&hs))
            .map(|(&x, (&gi, &hi))| x - t * (gi + hi))
            .collect();
        project_step(&mut next, radius, lo, hi);
        let q_next = model_change(g, h, &next);
        if q_next < q {
            s = next;
            q = q_next;
        } else {
            t *= T::lit(0.5);
            if t * gnorm.max(T::one()) < radius * T::epsilon() {
                break;
            }
        }
    }
    if q < best_q {
        best = s;
    }
    best
}

impl<T: Real> LocalSolver<T> for ModelTrustRegion<T> {
    fn ask(&mut self) -> Ask<T> {
        match &self.phase {
            Phase::Done(s) => Ask::Converged(*s),
            Phase::Ready => self.iterate(),
            _ => Ask::Evaluate(self.pending.clone()),
        }
    }

    fn tell(&mut self, value: T) {
        let phase = std::mem::replace(&mut self.phase, Phase::Ready);
        match phase {
            Phase::Init { next } => {
                self.values[next] = value;
                if value < self.values[self.best] {
                    self.best = next;
                }
                if next + 1 < self.points.len() {
                    self.pending = self.points[next + 1].clone();
                    self.phase = Phase::Init { next: next + 1 };
                }
            }
            Phase::Trial {
                predicted,
                step_norm,
                last,
            } => {
                let trial = std::mem::take(&mut self.pending);
                let f_opt = self.values[self.best];
                let ratio = (f_opt - value) / predicted;
                if value < f_opt {
                    let r = self.farthest_from(&trial);
                    self.points[r] = trial;
                    self.values[r] = value;
                    self.best = r;
                } else {
                    let xopt = self.points[self.best].clone();
                    let r = self.farthest_from(&xopt);
                    if distance(&self.points[r], &xopt) > distance(&trial, &xopt) {
                        self.points[r] = trial;
                        self.values[r] = value;
                    }
                }
                if ratio < T::lit(ETA_SHRINK) {
                    let (_, spread) = self.max_spread();
                    if spread > T::lit(2.0) * self.radius {
                        self.geometry_due = true;
                    } else {
                        self.radius *= T::lit(SHRINK);
                    }
                } else if ratio > T::lit(ETA_EXPAND) && step_norm >= T::lit(0.99) * self.radius {
                    self.radius = (self.radius * T::lit(EXPAND)).min(self.bounds.max_width());
                }
                if last && f_opt - value < self.stop.ftol_abs {
                    self.phase = Phase::Done(Status::ConvergedFtol);
                }
            }
            Phase::Geometry { replace } => {
                let x = std::mem::take(&mut self.pending);
                self.points[replace] = x;
                self.values[replace] = value;
                if value < self.values[self.best] {
                    self.best = replace;
                }
            }
            Phase::Ready | Phase::Done(_) => self.phase = phase,
        }
    }

    fn best(&self) -> Option<(&[T], T)> {
        match self.phase {
            Phase::Init { next: 0 } => None,
            _ => Some((self.points[self.best].as_slice(), self.values[self.best])),
        }
    }
}
