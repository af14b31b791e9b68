//! Weighted sum-rate transceiver optimization for multicell MIMO downlinks.
//!
//! The library designs linear transmit covariance matrices for a set of
//! mutually interfering cells, each serving several multi-antenna users.
//! The nonconvex weighted sum-rate problem is attacked through an
//! equivalent reformulation with auxiliary receive-side variables whose
//! bilinear coupling admits an alternating primal/master scheme:
//!
//! * [`primal::solve_primal`] solves the inner problem in closed form and
//!   returns the auxiliary variables, the multipliers, and a lower bound
//!   on the optimum,
//! * [`master::solve_master_alg1`] maximizes the Lagrangian over the
//!   transmit covariances with the auxiliaries held fixed,
//! * [`master::solve_master_alg2`] maximizes a jointly concave penalized
//!   linearization over covariances and auxiliaries together,
//! * [`driver::run_algorithm1`] / [`driver::run_algorithm2`] alternate the
//!   two halves until the sum-rate increment falls below a tolerance.
//!
//! [`baselines`] provides independent references (water-filling, exhaustive
//! power grids, random covariance sampling) used for benchmarking and in
//! the test suites.

pub mod baselines;
pub mod bounds;
pub mod driver;
pub mod error;
pub mod hermitian;
pub mod master;
pub mod model;
pub mod primal;

pub use error::{Error, Result};

/// Conversion factor from natural logarithms to bits (1 / ln 2).
///
/// All internal calculus is carried out in natural log; public rate and
/// objective values are scaled once by this constant.
pub const NATS_TO_BITS: f64 = std::f64::consts::LOG2_E;
