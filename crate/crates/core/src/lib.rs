//! Deterministic simulator and library for vertical federated learning.
//!
//! Three guest organizations hold disjoint attribute slices of the same
//! sample rows; a host organization holds the labels. Training follows the
//! classic seven-step split protocol per batch: entity alignment, bottom
//! model forward, forward transmission, top model forward, top model
//! backward, backward transmission, bottom model backward. The forward
//! channel is pluggable (identity, Gaussian DP, bucket quantization, or
//! DP followed by quantization) and every transmitted message is serialized
//! so the per-participant cost ledger counts real byte sizes.
//!
//! Numeric kernels are generic over the scalar type via [`Scalar`]
//! (implemented for `f32` and `f64`); the simulator itself runs `f64`,
//! for which aliases are exported at the crate root.

pub mod align;
pub mod compress;
pub mod data;
pub mod error;
pub mod experiment;
pub mod privacy;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod split;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` matrix used by the simulator.
pub type Matrix64 = tensor::Matrix<f64>;
/// `f32` matrix.
pub type Matrix32 = tensor::Matrix<f32>;
/// `f64` multilayer perceptron.
pub type Mlp64 = tensor::Mlp<f64>;
/// `f64` dense layer.
pub type DenseLayer64 = tensor::DenseLayer<f64>;
/// `f64` encoded dataset.
pub type FeatureMatrix64 = data::FeatureMatrix<f64>;
/// `f64` split model set, as trained by the simulator.
pub type SplitModels64 = split::SplitModels<f64>;
