//! Power control for dense wireless subnetworks with message-passing graph
//! neural networks.
//!
//! [`channel`] simulates deployments and fading channels, [`graph`] turns
//! them into attributed interference graphs, [`pcgnn`] trains the network
//! without labels by maximising sum spectral efficiency, and [`baselines`]
//! and [`eval`] score it against full power and WMMSE.
//!
//! The network is generic over [`Scalar`]; training usually runs in `f32`
//! and gradient checks in `f64`. Channel and rate arithmetic is always `f64`.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod io;
pub mod nn;
pub mod pcgnn;
pub mod scalar;

pub use channel::{Dataset, PowerAllocation, SeedDomain, Snapshot, SystemConfig};
pub use error::{Error, Result};
pub use graph::{FeatureGraph, Normalizer, Variant};
pub use pcgnn::{Architecture, PcgnnModel, TrainConfig, Trainer};
pub use scalar::Scalar;

/// Single-precision model, the default for training and inference.
pub type Model = PcgnnModel<f32>;
/// Double-precision model, used for gradient checks.
pub type Model64 = PcgnnModel<f64>;
