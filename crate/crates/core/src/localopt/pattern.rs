use super::{Ask, Bounds, LocalSolver, Status, StopRule};
use crate::scalar::Real;

/// Initial poll step as a fraction of each box side.
const INITIAL_FRACTION: f64 = 0.25;

/// Compass search: polls `+s_i e_i, -s_i e_i` for each coordinate in turn,
/// moves to the first improving point and halves the step after a full
/// unsuccessful poll. Poll points outside the box are skipped.
#[derive(Debug, Clone)]
pub struct PatternSearch<T> {
    bounds: Bounds<T>,
    stop: StopRule<T>,
    center: Vec<T>,
    f_center: Option<T>,
    fraction: T,
    direction: usize,
    pending: Option<Vec<T>>,
    done: Option<Status>,
}

impl<T: Real> PatternSearch<T> {
    pub fn new(x0: &[T], bounds: Bounds<T>, stop: StopRule<T>) -> Self {
        Self {
            bounds,
            stop,
            center: x0.to_vec(),
            f_center: None,
            fraction: T::lit(INITIAL_FRACTION),
            direction: 0,
            pending: None,
            done: None,
        }
    }

    /// Largest per-coordinate step.
    fn step(&self) -> T {
        self.fraction * self.bounds.max_width()
    }

    fn poll_point(&self, direction: usize) -> Option<Vec<T>> {
        let i = direction / 2;
        let delta = self.fraction * self.bounds.width(i);
        let mut x = self.center.clone();
        x[i] = if direction.is_multiple_of(2) { x[i] + delta } else { x[i] - delta };
        if x[i] < self.bounds.lower()[i] || x[i] > self.bounds.upper()[i] || x[i] == self.center[i] {
            None
        } else {
            Some(x)
        }
    }
}

impl<T: Real> LocalSolver<T> for PatternSearch<T> {
    fn ask(&mut self) -> Ask<T> {
        if let Some(s) = self.done {
            return Ask::Converged(s);
        }
        if let Some(p) = &self.pending {
            return Ask::Evaluate(p.clone());
        }
        if self.f_center.is_none() {
            self.pending = Some(self.center.clone());
            return Ask::Evaluate(self.center.clone());
        }
        let n_dirs = 2 * self.center.len();
        loop {
            let step = self.step();
            if step < self.stop.xtol_abs || step <= self.bounds.stall_threshold() {
                self.done = Some(Status::ConvergedXtol);
                return Ask::Converged(Status::ConvergedXtol);
            }
            while self.direction < n_dirs {
                if let Some(x) = self.poll_point(self.direction) {
                    self.pending = Some(x.clone());
                    return Ask::Evaluate(x);
                }
                self.direction += 1;
            }
            self.fraction *= T::lit(0.5);
            self.direction = 0;
        }
    }

    fn tell(&mut self, value: T) {
        let Some(x) = self.pending.take() else {
            return;
        };
        match self.f_center {
            None => self.f_center = Some(value),
            Some(fc) if value < fc => {
                self.center = x;
                self.f_center = Some(value);
                self.direction = 0;
            }
            Some(_) => self.direction += 1,
        }
    }

    fn best(&self) -> Option<(&[T], T)> {
        self.f_center.map(|v| (self.center.as_slice(), v))
    }
}
