//! Dense linear algebra, layers, loss, and the Adam optimizer.

mod adam;
mod layer;
mod loss;
mod matrix;
mod mlp;

pub use adam::{adam_step, AdamParams, AdamState};
pub use layer::{Activation, DenseLayer, LayerCache, LayerGrads};
pub use loss::{bce_loss, bce_per_sample};
pub use matrix::Matrix;
pub use mlp::{Mlp, MlpCache, MlpGrads, MlpOptimizer};
