//! Exact QAOA simulation for two-way modularity clustering, bounded
//! derivative-free local solvers, an MLSL-style multistart coordinator and
//! the experiment engine that compares them under fixed evaluation budgets.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the double-precision types used by the experiments.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod graphs;
pub mod hamiltonian;
mod linalg;
pub mod localopt;
pub mod multistart;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModularityMatrix64 = hamiltonian::ModularityMatrix<f64>;
pub type CostDiagonal64 = hamiltonian::CostDiagonal<f64>;
pub type CostDiagonal32 = hamiltonian::CostDiagonal<f32>;
pub type QaoaParams64 = simulator::QaoaParams<f64>;
pub type QaoaParams32 = simulator::QaoaParams<f32>;
pub type StateVector64 = simulator::StateVector<f64>;
pub type Bounds64 = localopt::Bounds<f64>;
pub type StopRule64 = localopt::StopRule<f64>;
pub type EvalHistory64 = localopt::EvalHistory<f64>;
pub type RunResult64 = localopt::RunResult<f64>;
pub type MultistartConfig64 = multistart::MultistartConfig<f64>;
pub type MultistartResult64 = multistart::MultistartResult<f64>;
