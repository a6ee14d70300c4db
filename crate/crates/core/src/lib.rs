//! Cache performance analysis toolkit.
//!
//! The crate combines several independent views on the hit ratio of a cache:
//!
//! - [`catalog`]: object universes, Zipf/lognormal workloads, churn and loop
//!   traces, and the trace CSV format.
//! - [`sim`]: deterministic trace-driven simulation of replacement and
//!   admission policies (LRU, FIFO, clock-per-request, RANDOM, LFU, window
//!   LFU, score-gated clock, GreedyDual, multi-level and probabilistic
//!   admission), plus one-pass stack-distance hit-ratio curves.
//! - [`markov`]: exact steady-state IRM hit ratios (product form, exact LRU,
//!   variable-size LRU, multi-level product form) and an explicit Markov
//!   chain oracle.
//! - [`approx`]: Che, Fagin and FIFO approximations, convergence time of an
//!   LRU cache and the filling-phase hit ratio.
//! - [`bounds`]: static and churn knapsack bounds, Belady's algorithm and the
//!   lower/upper 2D-knapsack bounds for clairvoyant caching.
//! - [`ttl`]: TTL hit-ratio formulas, trace window statistics, TTL
//!   adaptation and occupancy.

pub mod approx;
pub mod bounds;
pub mod catalog;
mod error;
pub mod markov;
pub(crate) mod numeric;
pub mod sim;
pub mod ttl;

pub use error::{Error, Result};
