//! Multi-layer perceptron assembled from dense layers.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::adam::{adam_step, AdamParams, AdamState};
use crate::tensor::layer::{Activation, DenseLayer, LayerCache, LayerGrads};
use crate::tensor::Matrix;

/// Feed-forward stack. Layer `i` maps `dims[i]` to `dims[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<DenseLayer<T>>,
}

/// Per-layer forward caches, outermost input first.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub layers: Vec<LayerCache<T>>,
}

/// Gradients for every layer plus the gradient flowing to the input.
#[derive(Debug, Clone)]
pub struct MlpGrads<T> {
    pub layers: Vec<LayerGrads<T>>,
    pub input: Matrix<T>,
}

impl<T: Scalar> Mlp<T> {
    /// Builds from explicit layers; adjacent widths must agree.
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyInput("mlp with no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::Dimension(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].output_width(),
                    pair[1].input_width()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Seeded init over a width list: `dims = [in, h1, ..., out]` with one
    /// activation per layer.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Dimension(format!(
                "mlp needs at least one layer, got dims {dims:?}"
            )));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::Dimension(format!(
                "{} activations for {} layers",
                activations.len(),
                dims.len() - 1
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::init(w[0], w[1], act, rng))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().output_width()
    }

    /// Widths as `[in, h1, ..., out]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_width()];
        dims.extend(self.layers.iter().map(|l| l.output_width()));
        dims
    }

    /// Forward pass retaining the caches needed by [`Mlp::backward`].
    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, MlpCache<T>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&current)?;
            caches.push(cache);
            current = y;
        }
        Ok((current, MlpCache { layers: caches }))
    }

    /// Forward pass without caching, for evaluation.
    pub fn forward_inference(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut current = x.clone();
        for layer in &self.layers {
            let (y, _) = layer.forward(&current)?;
            current = y;
        }
        Ok(current)
    }

    /// Backpropagates `grad_out` (gradient of the loss with respect to the
    /// network output) through every layer.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: &Matrix<T>) -> Result<MlpGrads<T>> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Dimension(format!(
                "cache of {} layers against {}",
                cache.layers.len(),
                self.layers.len()
            )));
        }
        let mut per_layer: Vec<Option<LayerGrads<T>>> =
            (0..self.layers.len()).map(|_| None).collect();
        let mut grad = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let grads = layer.backward(&cache.layers[i], &grad)?;
            grad = grads.input.clone();
            per_layer[i] = Some(grads);
        }
        Ok(MlpGrads {
            layers: per_layer.into_iter().map(|g| g.unwrap()).collect(),
            input: grad,
        })
    }

    /// Multiply-accumulate cost of one forward pass over `batch` rows:
    /// `2 * in * out + out` per layer per row (the matmul plus the bias add;
    /// activations are not counted).
    pub fn forward_flops(&self, batch: usize) -> u64 {
        self.layers
            .iter()
            .map(|l| {
                let i = l.input_width() as u64;
                let o = l.output_width() as u64;
                (2 * i * o + o) * batch as u64
            })
            .sum()
    }

    /// Backward cost is modelled as twice the forward cost.
    pub fn backward_flops(&self, batch: usize) -> u64 {
        2 * self.forward_flops(batch)
    }
}

/// Adam state for every tensor of an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpOptimizer<T> {
    pub params: AdamParams<T>,
    weight_states: Vec<AdamState<T>>,
    bias_states: Vec<AdamState<T>>,
}

impl<T: Scalar> MlpOptimizer<T> {
    pub fn new(model: &Mlp<T>, params: AdamParams<T>) -> Self {
        Self {
            params,
            weight_states: model
                .layers
                .iter()
                .map(|l| AdamState::new(l.weights.data().len()))
                .collect(),
            bias_states: model
                .layers
                .iter()
                .map(|l| AdamState::new(l.bias.len()))
                .collect(),
        }
    }

    /// Applies one Adam update to every layer from a matching gradient set.
    pub fn step(&mut self, model: &mut Mlp<T>, grads: &MlpGrads<T>) -> Result<()> {
        if grads.layers.len() != model.layers.len() {
            return Err(Error::Dimension(format!(
                "gradients for {} layers against {}",
                grads.layers.len(),
                model.layers.len()
            )));
        }
        for (i, layer) in model.layers.iter_mut().enumerate() {
            adam_step(
                layer.weights.data_mut(),
                grads.layers[i].weights.data(),
                &mut self.weight_states[i],
                &self.params,
            )?;
            adam_step(
                &mut layer.bias,
                &grads.layers[i].bias,
                &mut self.bias_states[i],
                &self.params,
            )?;
        }
        Ok(())
    }
}
