//! Forward and backward passes for every layer type.
//!
//! Forward calls never mutate parameters; gradients are returned, not
//! accumulated in place, so one layer can serve many threads.

mod activation;
mod conv;
mod dense;
mod pool;

#[cfg(test)]
pub(crate) mod testutil;

pub use activation::{relu, sigmoid, Activation, ActivationCache};
pub use conv::{Conv2D, ConvCache, ConvGrads};
pub use dense::{Dense, DenseCache, DenseGrads};
pub use pool::{global_avg_pool, global_avg_pool_backward, PoolCache, PoolMode, PoolSpec};
