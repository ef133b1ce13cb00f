//! Sensitivity analysis of finite irreducible Markov chains under
//! transition-matrix perturbation.
//!
//! The library computes stationary distributions, exit laws, expected exit
//! times and visit statistics two independent ways — by enumerating
//! spanning-graph families and by dense linear algebra — and uses the
//! agreement of the two routes to validate closeness-based perturbation
//! bounds against competing mean-passage-time and deleted-inverse bounds.
//!
//! Everything is generic over the floating scalar via [`scalar::Scalar`];
//! the `*64` aliases at the crate root are what the CLI and most callers
//! use.

pub mod chain;
pub mod fixtures;
pub mod formulas;
pub mod graphs;
pub mod oracles;
pub mod perturb;
pub mod scalar;
pub mod subset;

pub use chain::{Chain, ChainError, Distribution, StateSpace};
pub use scalar::Scalar;
pub use subset::StateSet;

/// Default cap on the state-space size for graph enumeration and subset
/// minimization; the graph-family count grows super-exponentially past
/// desk scale.
pub const DEFAULT_ENUMERATION_CAP: usize = 8;

pub type Chain64 = chain::Chain<f64>;
pub type Chain32 = chain::Chain<f32>;
pub type Distribution64 = chain::Distribution<f64>;
pub type Distribution32 = chain::Distribution<f32>;
