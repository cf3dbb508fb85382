//! Modularity matrix, the diagonal cost Hamiltonian and the exhaustive
//! classical optimum.
//!
//! Basis state `z` assigns qubit `i` to bit `i` of `z` (least significant
//! bit is qubit 0). A clear bit means spin `+1`, a set bit spin `-1`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graphs::{Graph, MAX_VERTICES};
use crate::scalar::Real;

/// `B_ij = A_ij - k_i k_j / (2|E|)`, diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularityMatrix<T> {
    n: usize,
    b: Vec<T>,
    num_edges: usize,
}

impl<T: Real> ModularityMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.b[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.b[i * self.n..(i + 1) * self.n]
    }

    /// `(1 / 4|E|) * sum_ij B_ij s_i s_j`, with `s_i = +1` where bit `i` of
    /// `z` is clear.
    pub fn modularity_of_bits(&self, z: u64) -> T {
        let spin = |i: usize| if (z >> i) & 1 == 0 { T::one() } else { -T::one() };
        let mut total = T::zero();
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = T::zero();
            for (j, &bij) in row.iter().enumerate() {
                acc += bij * spin(j);
            }
            total += spin(i) * acc;
        }
        total / (T::count(4) * T::count(self.num_edges))
    }
}

/// Community assignment with entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinAssignment(Vec<i8>);

impl SpinAssignment {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("spin {bad} is not +1 or -1")));
        }
        Ok(Self(spins))
    }

    /// Spins encoded by the bits of `z` over `n` qubits.
    pub fn from_bits(z: u64, n: usize) -> Self {
        Self((0..n).map(|i| if (z >> i) & 1 == 0 { 1 } else { -1 }).collect())
    }

    pub fn to_bits(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |z, (i, &s)| if s < 0 { z | (1 << i) } else { z })
    }

    pub fn all_plus(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn modularity_matrix<T: Real>(g: &Graph) -> Result<ModularityMatrix<T>> {
    let m = g.num_edges();
    if m == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = g.n_vertices();
    let deg = g.degrees();
    let two_m = T::count(2 * m);
    let mut b = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -(T::count(deg[i]) * T::count(deg[j])) / two_m;
        }
    }
    for (u, v) in g.edges() {
        b[u * n + v] += T::one();
        b[v * n + u] += T::one();
    }
    Ok(ModularityMatrix { n, b, num_edges: m })
}

/// Two-community modularity of `s` on `g`.
pub fn modularity<T: Real>(g: &Graph, s: &SpinAssignment) -> Result<T> {
    if s.len() != g.n_vertices() {
        return Err(Error::Dimension {
            expected: g.n_vertices(),
            got: s.len(),
        });
    }
    let b = modularity_matrix::<T>(g)?;
    Ok(b.modularity_of_bits(s.to_bits()))
}

/// The computational-basis diagonal of the cost Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDiagonal<T> {
    energies: Vec<T>,
    n_qubits: usize,
    /// Distinct energies (by bit pattern) and the level of each state, so
    /// phases need one `sin_cos` per level instead of one per state.
    levels: Vec<T>,
    level_of: Vec<u32>,
}

impl<T: Real> CostDiagonal<T> {
    /// Wraps an arbitrary diagonal; the length must be a power of two.
    pub fn from_energies(energies: Vec<T>) -> Result<Self> {
        let len = energies.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "diagonal length {len} is not a power of two"
            )));
        }
        Ok(Self::indexed(energies, len.trailing_zeros() as usize))
    }

    fn indexed(energies: Vec<T>, n_qubits: usize) -> Self {
        let mut seen: HashMap<u64, u32> = HashMap::new();
        let mut levels = Vec::new();
        let level_of = energies
            .iter()
            .map(|&e| {
                *seen.entry(e.as_f64().to_bits()).or_insert_with(|| {
                    levels.push(e);
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Self {
            energies,
            n_qubits,
            levels,
            level_of,
        }
    }

    pub(crate) fn levels(&self) -> (&[T], &[u32]) {
        (&self.levels, &self.level_of)
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn max(&self) -> T {
        self.energies.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.energies.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn mean(&self) -> T {
        self.energies.iter().copied().sum::<T>() / T::count(self.energies.len())
    }
}

/// Diagonal of the cost Hamiltonian for the graph's modularity.
pub fn cost_diagonal<T: Real>(g: &Graph) -> Result<CostDiagonal<T>> {
    let n = g.n_vertices();
    if n > MAX_VERTICES {
        return Err(Error::Capacity {
            n,
            limit: MAX_VERTICES,
        });
    }
    let b = modularity_matrix::<T>(g)?;
    let energies = (0..1u64 << n).map(|z| b.modularity_of_bits(z)).collect();
    Ok(CostDiagonal::indexed(energies, n))
}

/// Exact modularity maximum over all `2^n` assignments; the smallest `z`
/// wins ties.
pub fn best_partition_bruteforce<T: Real>(g: &Graph) -> Result<(SpinAssignment, T)> {
    let n = g.n_vertices();
    if n > MAX_VERTICES {
        return Err(Error::Capacity {
            n,
            limit: MAX_VERTICES,
        });
    }
    let b = modularity_matrix::<T>(g)?;
    let mut best_z = 0u64;
    let mut best = b.modularity_of_bits(0);
    for z in 1..1u64 << n {
        let c = b.modularity_of_bits(z);
        if c > best {
            best = c;
            best_z = z;
        }
    }
    Ok((SpinAssignment::from_bits(best_z, n), best))
}
