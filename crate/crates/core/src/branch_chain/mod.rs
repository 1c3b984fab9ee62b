//! The Markov chain of leftward-jump counts.
//!
//! Under `P_0`, `(U_n^n, U_{n-1}^n, …, U_0^n)` has the law of the first
//! `n+1` states of a time-homogeneous chain started at 0 with kernel
//!
//! ```text
//! p_{j0} = p^{j+1}
//! p_{jk} = (1-p) Σ_{l=0}^{j} p^l P(ζ_1 + … + ζ_{j+1-l} = k-1),   k ≥ 1
//! ```
//!
//! where the ζ are i.i.d. geometric with `P(ζ = m) = 2^-(m+1)`. For
//! `p > 2/3` the chain is positive recurrent; its stationary law μ gives the
//! escape probability `P_1(T_0 = ∞) = μ_0` and the speed
//! `1 / (1 + 2 Σ k μ_k)`.

mod closed_form;
mod kernel;
mod pmf;
mod stationary;

use thiserror::Error;

pub use closed_form::{
    chain_marginal, closed_form_gamma, closed_form_speed, gamma_bounds, gf_identity_residual, mean_closed_form,
    speed_from_mean, speed_from_mu, ClosedForm, Speed, Status,
};
pub use kernel::{build_kernel, Kernel, KernelOptions};
pub use pmf::{geom_pmf, kernel_entry, negbin_pmf};
pub use stationary::{
    solve_truncated, stationary, stationary_with, Doubling, Moment, StationaryEstimate, StationaryOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("p = {0} outside (1/2, 1)")]
    InvalidP(f64),
    #[error("p = {0} is in the recurrent regime (p <= 2/3); escape probability is 0")]
    RecurrentRegime(f64),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("kernel row {row} sends mass {tail:e} above the truncation")]
    RowTail { row: usize, tail: f64 },
    #[error("chain is not positive recurrent: stationary profile decays like j^-{exponent:.4} (K = {truncation})")]
    NotPositiveRecurrent { exponent: f64, truncation: usize },
    #[error("no convergence by K = {truncation}: mu0 = {mu0}, last change {last_change:e}")]
    NotConverged { truncation: usize, mu0: f64, last_change: f64 },
}
