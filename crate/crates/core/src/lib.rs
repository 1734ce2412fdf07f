//! Offline signature verification with a convolutional baseline and a fully
//! convolutional variant whose dense head is replaced by global average pooling.

pub mod checkpoint;
pub mod config;
pub mod data;
mod error;
pub mod eval;
pub mod exec;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Real, Tensor};
