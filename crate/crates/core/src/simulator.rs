//! State-vector evaluation of the alternating-operator ansatz.
//!
//! The state starts uniform. Each level multiplies amplitude `z` by
//! `exp(-i gamma E_z)` and then applies `exp(-i beta X)` to every qubit,
//! which is the 2x2 transform `[[cos b, -i sin b], [-i sin b, cos b]]`.

use num_complex::Complex;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::CostDiagonal;
use crate::scalar::Real;

/// Variational angles for `p` levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams<T> {
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
}

impl<T: Real> QaoaParams<T> {
    pub fn new(beta: Vec<T>, gamma: Vec<T>) -> Result<Self> {
        if beta.len() != gamma.len() {
            return Err(Error::Dimension {
                expected: beta.len(),
                got: gamma.len(),
            });
        }
        if beta.is_empty() {
            return Err(Error::InvalidArgument("QAOA needs p >= 1".into()));
        }
        Ok(Self { beta, gamma })
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Splits an optimizer point laid out as `[beta_1..beta_p, gamma_1..gamma_p]`.
    pub fn from_point(x: &[T]) -> Result<Self> {
        if x.is_empty() || !x.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "point of length {} is not 2p for p >= 1",
                x.len()
            )));
        }
        let p = x.len() / 2;
        Self::new(x[..p].to_vec(), x[p..].to_vec())
    }

    pub fn to_point(&self) -> Vec<T> {
        self.beta.iter().chain(&self.gamma).copied().collect()
    }

    /// Default box: `beta_i in [0, pi]`, `gamma_i in [0, 2pi]`, in point layout.
    pub fn default_domain(p: usize) -> (Vec<T>, Vec<T>) {
        let lower = vec![T::zero(); 2 * p];
        let mut upper = vec![T::PI(); p];
        upper.extend(std::iter::repeat_n(T::PI() + T::PI(), p));
        (lower, upper)
    }
}

/// Normalized amplitudes over `2^n` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn uniform(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let a = T::one() / T::count(dim).sqrt();
        Self {
            amplitudes: vec![Complex::new(a, T::zero()); dim],
        }
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `sum_z |psi_z|^2 E_z`.
    pub fn expectation(&self, diag: &CostDiagonal<T>) -> T {
        self.amplitudes
            .iter()
            .zip(diag.energies())
            .map(|(a, &e)| a.norm_sqr() * e)
            .sum()
    }

    fn apply_phase(&mut self, diag: &CostDiagonal<T>, gamma: T) {
        let (levels, level_of) = diag.levels();
        let phases: Vec<Complex<T>> = levels
            .iter()
            .map(|&e| {
                let (s, c) = (gamma * e).sin_cos();
                Complex::new(c, -s)
            })
            .collect();
        for (a, &l) in self.amplitudes.iter_mut().zip(level_of) {
            *a *= phases[l as usize];
        }
    }

    fn apply_mixer(&mut self, n_qubits: usize, beta: T) {
        let (s, c) = beta.sin_cos();
        for q in 0..n_qubits {
            let stride = 1usize << q;
            for block in self.amplitudes.chunks_exact_mut(stride << 1) {
                let (lo, hi) = block.split_at_mut(stride);
                for (x0, x1) in lo.iter_mut().zip(hi) {
                    let (a0, a1) = (*x0, *x1);
                    // -i s a = (s a.im, -s a.re)
                    *x0 = Complex::new(c * a0.re + s * a1.im, c * a0.im - s * a1.re);
                    *x1 = Complex::new(c * a1.re + s * a0.im, c * a1.im - s * a0.re);
                }
            }
        }
    }
}

/// Evolves the uniform superposition through all `p` levels.
pub fn qaoa_state<T: Real>(diag: &CostDiagonal<T>, params: &QaoaParams<T>) -> Result<StateVector<T>> {
    if params.p() == 0 || params.beta.len() != params.gamma.len() {
        return Err(Error::InvalidArgument("QAOA needs p >= 1 and |beta| = |gamma|".into()));
    }
    let mut psi = StateVector::uniform(diag.n_qubits());
    for (&beta, &gamma) in params.beta.iter().zip(&params.gamma) {
        psi.apply_phase(diag, gamma);
        psi.apply_mixer(diag.n_qubits(), beta);
    }
    Ok(psi)
}

/// Value of the minimization objective `f = -<H_C>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue<T> {
    pub f: T,
    /// Zero for the exact expectation.
    pub shots: usize,
}

pub fn objective<T: Real>(diag: &CostDiagonal<T>, params: &QaoaParams<T>) -> Result<ObjectiveValue<T>> {
    let psi = qaoa_state(diag, params)?;
    Ok(ObjectiveValue {
        f: -psi.expectation(diag),
        shots: 0,
    })
}

/// Estimates the objective from `shots` basis-state samples drawn with a
/// ChaCha8 stream seeded by `seed`.
pub fn sampled_objective<T: Real>(
    diag: &CostDiagonal<T>,
    params: &QaoaParams<T>,
    shots: usize,
    seed: u64,
) -> Result<ObjectiveValue<T>> {
    if shots == 0 {
        return Err(Error::InvalidArgument(
            "shots must be at least 1; use the exact objective instead".into(),
        ));
    }
    let psi = qaoa_state(diag, params)?;
    let weights: Vec<f64> = psi.amplitudes().iter().map(|a| a.norm_sqr().as_f64()).collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::Objective(format!("invalid sampling distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let energies = diag.energies();
    let total: T = (0..shots).map(|_| energies[dist.sample(&mut rng)]).sum();
    Ok(ObjectiveValue {
        f: -total / T::count(shots),
        shots,
    })
}

/// Objective over a `beta_points x gamma_points` grid of cell centres on
/// `[0, pi] x [0, 2pi]` for a single level.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape<T> {
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
    /// Row-major: `values[i * gamma.len() + j]` is `f(beta[i], gamma[j])`.
    pub values: Vec<T>,
}

impl<T: Real> Landscape<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.gamma.len() + j]
    }

    /// Grid cells strictly below all of their (up to 8) neighbours.
    pub fn local_minima(&self) -> Vec<(usize, usize)> {
        let (nb, ng) = (self.beta.len() as isize, self.gamma.len() as isize);
        let mut out = Vec::new();
        for i in 0..nb {
            for j in 0..ng {
                let v = self.get(i as usize, j as usize);
                let mut is_min = true;
                'scan: for di in -1..=1 {
                    for dj in -1..=1 {
                        let (a, b) = (i + di, j + dj);
                        if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= nb || b >= ng {
                            continue;
                        }
                        if self.get(a as usize, b as usize) <= v {
                            is_min = false;
                            break 'scan;
                        }
                    }
                }
                if is_min {
                    out.push((i as usize, j as usize));
                }
            }
        }
        out
    }

    /// Grid point with the smallest value (first in row-major order on ties).
    pub fn argmin(&self) -> (usize, usize, T) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = k;
            }
        }
        let ng = self.gamma.len();
        (best / ng, best % ng, self.values[best])
    }
}

pub fn landscape_grid<T: Real>(
    diag: &CostDiagonal<T>,
    beta_points: usize,
    gamma_points: usize,
) -> Result<Landscape<T>> {
    if beta_points == 0 || gamma_points == 0 {
        return Err(Error::InvalidArgument("landscape grid must be non-empty".into()));
    }
    let half = T::lit(0.5);
    let beta: Vec<T> = (0..beta_points)
        .map(|i| (T::count(i) + half) * T::PI() / T::count(beta_points))
        .collect();
    let gamma: Vec<T> = (0..gamma_points)
        .map(|j| (T::count(j) + half) * (T::PI() + T::PI()) / T::count(gamma_points))
        .collect();
    // rows are independent; collect keeps row-major order
    let rows: Vec<Vec<T>> = beta
        .par_iter()
        .map(|&b| {
            gamma
                .iter()
                .map(|&g| Ok(objective(diag, &QaoaParams::new(vec![b], vec![g])?)?.f))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Landscape {
        beta,
        gamma,
        values: rows.concat(),
    })
}
