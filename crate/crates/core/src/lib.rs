//! Opinion pooling on finite outcome spaces: log and linear pools, epistemic
//! welfare gaps, factorizations of a pooled belief into subagents,
//! pool-preserving transports, and first-order persona suppression.
//!
//! Every distribution is strictly positive. Products of probabilities are
//! evaluated in log space.

pub mod constructions;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod factorize;
pub mod io;
pub mod linalg;
pub mod persona;
pub mod pooling;
pub mod sampling;
pub mod stability;
pub mod verify;
pub mod welfare;

pub use dist::{
    center, coarse_grain_bound, covariance_p, entropy, inner_p, kl, log_sum_exp, norm_p, tv,
    variance_p, Dist, Event, OutcomeSpace, ScoreFn, Weights,
};
pub use error::{Error, Result};
pub use pooling::{linear_pool, log_pool, pool, Decomposition, PoolKind};

/// Crate version, stamped into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
