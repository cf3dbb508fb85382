use super::{Ask, Bounds, LocalSolver, Status, StopRule};
use crate::scalar::{distance, Real};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Initial simplex edge as a fraction of each box side.
const INITIAL_STEP: f64 = 0.1;

#[derive(Debug, Clone)]
enum Phase<T> {
    Init { next: usize },
    Ready,
    Reflect { centroid: Vec<T> },
    Expand { reflected: Vec<T>, f_reflected: T },
    Contract { outside: bool, f_reflected: T },
    Shrink { next: usize },
    Done(Status),
}

/// Nelder-Mead simplex with candidates clamped into the box.
#[derive(Debug, Clone)]
pub struct NelderMead<T> {
    bounds: Bounds<T>,
    stop: StopRule<T>,
    simplex: Vec<Vec<T>>,
    values: Vec<T>,
    pending: Vec<T>,
    phase: Phase<T>,
}

impl<T: Real> NelderMead<T> {
    pub fn new(x0: &[T], bounds: Bounds<T>, stop: StopRule<T>) -> Self {
        let d = x0.len();
        let mut simplex = vec![x0.to_vec()];
        for i in 0..d {
            let step = T::lit(INITIAL_STEP) * bounds.width(i);
            let mut v = x0.to_vec();
            v[i] = if x0[i] + step <= bounds.upper()[i] {
                x0[i] + step
            } else {
                x0[i] - step
            };
            simplex.push(v);
        }
        Self {
            bounds,
            stop,
            values: vec![T::zero(); d + 1],
            pending: x0.to_vec(),
            simplex,
            phase: Phase::Init { next: 0 },
        }
    }

    fn dim(&self) -> usize {
        self.simplex.len() - 1
    }

    fn point_along(&self, from: &[T], to: &[T], coef: f64) -> Vec<T> {
        // from + coef * (to - from), clamped
        let c = T::lit(coef);
        let mut x: Vec<T> = from.iter().zip(to).map(|(&a, &b)| a + c * (b - a)).collect();
        self.bounds.project(&mut x);
        x
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.simplex.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_order(&self.values[b]).then(a.cmp(&b)));
        self.simplex = order.iter().map(|&i| self.simplex[i].clone()).collect();
        self.values = order.iter().map(|&i| self.values[i]).collect();
    }

    fn converged(&self) -> Option<Status> {
        let d = self.dim();
        let diameter = self.simplex[1..]
            .iter()
            .map(|v| distance(&self.simplex[0], v))
            .fold(T::zero(), T::max);
        if diameter < self.stop.xtol_abs || diameter <= self.bounds.stall_threshold() {
            return Some(Status::ConvergedXtol);
        }
        if self.values[d] - self.values[0] < self.stop.ftol_abs {
            return Some(Status::ConvergedFtol);
        }
        None
    }

    fn replace_worst(&mut self, x: Vec<T>, v: T) {
        let d = self.dim();
        self.simplex[d] = x;
        self.values[d] = v;
        self.phase = Phase::Ready;
    }
}

impl<T: Real> LocalSolver<T> for NelderMead<T> {
    fn ask(&mut self) -> Ask<T> {
        match &self.phase {
            Phase::Done(s) => return Ask::Converged(*s),
            Phase::Ready => {}
            _ => return Ask::Evaluate(self.pending.clone()),
        }
        self.sort();
        if let Some(status) = self.converged() {
            self.phase = Phase::Done(status);
            return Ask::Converged(status);
        }
        let d = self.dim();
        let mut centroid = vec![T::zero(); d];
        for v in &self.simplex[..d] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= T::count(d);
        }
        self.pending = self.point_along(&centroid, &self.simplex[d], -REFLECT);
        self.phase = Phase::Reflect { centroid };
        Ask::Evaluate(self.pending.clone())
    }

    fn tell(&mut self, value: T) {
        let d = self.dim();
        let phase = std::mem::replace(&mut self.phase, Phase::Ready);
        match phase {
            Phase::Init { next } => {
                self.values[next] = value;
                if next < d {
                    self.pending = self.simplex[next + 1].clone();
                    self.phase = Phase::Init { next: next + 1 };
                }
            }
            Phase::Reflect { centroid } => {
                let reflected = std::mem::take(&mut self.pending);
                if value < self.values[0] {
                    self.pending = self.point_along(&centroid, &reflected, EXPAND);
                    self.phase = Phase::Expand {
                        reflected,
                        f_reflected: value,
                    };
                } else if value < self.values[d - 1] {
                    self.replace_worst(reflected, value);
                } else if value < self.values[d] {
                    self.pending = self.point_along(&centroid, &reflected, CONTRACT);
                    self.phase = Phase::Contract {
                        outside: true,
                        f_reflected: value,
                    };
                } else {
                    self.pending = self.point_along(&centroid, &self.simplex[d], CONTRACT);
                    self.phase = Phase::Contract {
                        outside: false,
                        f_reflected: value,
                    };
                }
            }
            Phase::Expand {
                reflected,
                f_reflected,
            } => {
                if value < f_reflected {
                    let expanded = std::mem::take(&mut self.pending);
                    self.replace_worst(expanded, value);
                } else {
                    self.replace_worst(reflected, f_reflected);
                }
            }
            Phase::Contract {
                outside,
                f_reflected,
            } => {
                let accept = if outside {
                    value <= f_reflected
                } else {
                    value < self.values[d]
                };
                if accept {
                    let contracted = std::mem::take(&mut self.pending);
                    self.replace_worst(contracted, value);
                } else {
                    for i in 1..=d {
                        self.simplex[i] = self.point_along(&self.simplex[0], &self.simplex[i], SHRINK);
                    }
                    self.pending = self.simplex[1].clone();
                    self.phase = Phase::Shrink { next: 1 };
                }
            }
            Phase::Shrink { next } => {
                self.values[next] = value;
                if next < d {
                    self.pending = self.simplex[next + 1].clone();
                    self.phase = Phase::Shrink { next: next + 1 };
                }
            }
            Phase::Ready | Phase::Done(_) => {
                self.phase = phase;
            }
        }
    }

    fn best(&self) -> Option<(&[T], T)> {
        let known = match self.phase {
            Phase::Init { next } => next,
            _ => self.simplex.len(),
        };
        (0..known)
            .min_by(|&a, &b| self.values[a].total_order(&self.values[b]))
            .map(|i| (self.simplex[i].as_slice(), self.values[i]))
    }
}
