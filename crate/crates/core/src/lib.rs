//! Temporal causal discovery by aggregating multiple causal orderings.
//!
//! A denoising diffusion network is fitted to the lag-embedded series. Its
//! input Jacobian at several noise scales yields one causal ordering per
//! scale via iterative leaf removal. The orderings are combined by soft
//! voting, restricted to edges that respect time, and pruned with additive
//! regression tests into a window causal graph.

pub mod aggregate;
pub mod cli;
pub mod dgp;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod graph;
pub mod lagembed;
pub mod ordering;
pub(crate) mod rng;

pub use error::{Error, Result};
