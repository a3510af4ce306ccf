//! Optimal barrier consumption under an Ornstein-Uhlenbeck short rate.
//!
//! An income stream accrues at rate mu while a stochastic short rate
//! dr = a (b_tilde - r) dt + sigma_tilde dW discounts future consumption
//! through U_t = int_0^t r_s ds. The optimal strategy is a barrier rule:
//! hoard income while r is below a level r_star, consume everything above it.
//!
//! The crate computes r_star, the four hitting-time functionals the value
//! function is built from, and the value function itself, each by two
//! independent routes (closed forms in scaled parabolic cylinder functions,
//! and a collocation ODE solve), and cross-checks everything against a
//! Monte Carlo simulation oracle.

pub mod acceptance;
pub mod bvp;
pub mod functionals;
pub mod mc_oracle;
pub mod model;
pub mod num;
pub mod ou_engine;
pub mod policy;
pub mod special_fn;
pub mod value;

use thiserror::Error as ThisError;

/// Crate-wide error taxonomy. `Validation` means the caller's inputs are
/// rejected up front; `Domain` means a structurally valid call asked for a
/// point outside an operation's domain; the other two are numerical outcomes.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
