//! Fully connected layer with manual backpropagation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Elementwise nonlinearity applied after the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    /// No nonlinearity.
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation and the activation output.
    fn derivative<T: Scalar>(self, pre: T, out: T) -> T {
        match self {
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => out * (T::one() - out),
            Activation::Identity => T::one(),
        }
    }
}

/// Dense layer: `y = activation(x W + b)` with `W: in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

/// Values retained by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub input: Matrix<T>,
    pub pre: Matrix<T>,
    pub output: Matrix<T>,
}

/// Gradients produced by the backward pass.
#[derive(Debug, Clone)]
pub struct LayerGrads<T> {
    pub input: Matrix<T>,
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::Dimension(format!(
                "bias of {} against {} output units",
                bias.len(),
                weights.cols()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Seeded init: weights uniform in +-sqrt(6/(in+out)), biases zero.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = T::from(6.0 / (input + output) as f64)
            .expect("finite literal")
            .sqrt();
        let data = (0..input * output)
            .map(|_| T::sample_uniform(rng, -limit, limit))
            .collect();
        Self {
            weights: Matrix::new(input, output, data).expect("sized above"),
            bias: vec![T::zero(); output],
            activation,
        }
    }

    pub fn input_width(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_width(&self) -> usize {
        self.weights.cols()
    }

    /// Forward pass over a batch; the cache feeds [`DenseLayer::backward`].
    pub fn forward(&self, x: &Matrix<T>) -> Result<(Matrix<T>, LayerCache<T>)> {
        if x.cols() != self.input_width() {
            return Err(Error::Dimension(format!(
                "input of {} columns into layer expecting {}",
                x.cols(),
                self.input_width()
            )));
        }
        let pre = x.matmul(&self.weights)?.add_row_vector(&self.bias)?;
        let out = pre.map(|z| self.activation.apply(z));
        Ok((
            out.clone(),
            LayerCache {
                input: x.clone(),
                pre,
                output: out,
            },
        ))
    }

    /// Exact reverse-mode gradients of the forward map.
    pub fn backward(&self, cache: &LayerCache<T>, grad_out: &Matrix<T>) -> Result<LayerGrads<T>> {
        if grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols() {
            return Err(Error::Dimension(format!(
                "gradient {}x{} against output {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                cache.output.rows(),
                cache.output.cols()
            )));
        }
        // dL/dz = dL/dy * act'(z)
        let mut grad_pre = grad_out.clone();
        for r in 0..grad_pre.rows() {
            for c in 0..grad_pre.cols() {
                let d = self
                    .activation
                    .derivative(cache.pre.get(r, c), cache.output.get(r, c));
                grad_pre.set(r, c, grad_pre.get(r, c) * d);
            }
        }
        let grad_input = grad_pre.matmul(&self.weights.transpose())?;
        let grad_weights = cache.input.transpose().matmul(&grad_pre)?;
        let grad_bias = grad_pre.column_sums();
        Ok(LayerGrads {
            input: grad_input,
            weights: grad_weights,
            bias: grad_bias,
        })
    }
}
