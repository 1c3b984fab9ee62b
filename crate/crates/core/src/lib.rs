//! Random walks in cookie environments with one cookie per site that is
//! eaten only by a leftward jump.
//!
//! * [`environment`]: environment laws, consumption state, recurrence criterion.
//! * [`walk_sim`]: trajectory simulation with pathwise counters.
//! * [`branch_chain`]: the embedded chain of leftward-jump counts, its
//!   stationary law and closed forms.
//! * [`coupling`]: the monotone coupling of two walks in ordered environments.
//! * [`estimators`]: Monte Carlo estimates and phase scans.
//! * [`verify`]: invariant suites run from the command line.
//!
//! Numerics are generic over [`Scalar`] (floats and exact rationals) or
//! [`Real`] (floats); the aliases below fix the common choices.

pub mod branch_chain;
pub mod coupling;
pub mod environment;
pub mod estimators;
pub mod rng;
pub mod scalar;
pub mod verify;
pub mod walk_sim;

pub use num::BigRational;
pub use scalar::{Real, Scalar};

pub type Env = environment::EnvironmentSpec<f64>;
pub type Env32 = environment::EnvironmentSpec<f32>;
pub type ExactEnv = environment::EnvironmentSpec<BigRational>;
pub type Classification64 = environment::Classification<f64>;
pub type ExactClassification = environment::Classification<BigRational>;
pub type Kernel64 = branch_chain::Kernel<f64>;
pub type Kernel32 = branch_chain::Kernel<f32>;
pub type StationaryEstimate64 = branch_chain::StationaryEstimate<f64>;
pub type StationaryEstimate32 = branch_chain::StationaryEstimate<f32>;
pub type ClosedForm64 = branch_chain::ClosedForm<f64>;
pub type ExactClosedForm = branch_chain::ClosedForm<BigRational>;

/// Version string embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
