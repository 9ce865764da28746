//! Capacity bounds and achievable information rates for binary
//! synchronization-error channels: deletions, geometric replications and
//! both at once.
//!
//! The crate is organised bottom-up:
//!
//! - [`core_math`]: binary entropy, binomials, the exponential integral.
//! - [`sequences`]: bit strings and subsequence weights.
//! - [`channel_core`]: the deletion-replication channel as a channel with
//!   drift states, trace sampling and exact output laws.
//! - [`analytic_bounds`]: closed-form and series bounds.
//! - [`fsc_approx`]: clipped and stationary finite-state approximations.
//! - [`exact_oracle`]: exhaustive mutual information for small blocks.
//! - [`rate_estimation`]: Monte Carlo rates from normalized forward passes.
//! - [`input_optim`]: Markov input optimization by generalized Blahut-Arimoto.
//! - [`cli`]: the command-line front end.

pub mod analytic_bounds;
pub mod channel_core;
pub mod cli;
pub mod core_math;
pub mod error;
pub mod exact_oracle;
pub mod fsc_approx;
pub mod input_optim;
pub mod rate_estimation;
pub mod sequences;
pub mod verify;

pub use error::{Error, Result};
