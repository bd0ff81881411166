//! Gaussian differential-privacy channel for forward outputs.
//!
//! Each sample's forward output is clipped to an L2 bound (fixing the
//! mechanism's sensitivity) and perturbed with spherical Gaussian noise
//! calibrated to (epsilon, delta). Noise is drawn fresh for every sample on
//! every transmission; there is no accounting of the budget across epochs,
//! so the configured epsilon is a per-transmission figure.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Privacy parameters for one guest's forward channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// L2 bound applied to each sample's forward output before noise.
    pub clip_norm: f64,
}

pub const DEFAULT_DELTA: f64 = 1e-5;
pub const DEFAULT_CLIP_NORM: f64 = 1.0;

impl DpConfig {
    pub fn new(epsilon: f64, delta: f64, clip_norm: f64) -> Result<Self> {
        gaussian_sigma(epsilon, delta, clip_norm)?;
        Ok(Self {
            epsilon,
            delta,
            clip_norm,
        })
    }

    /// Noise scale implied by the configuration.
    pub fn sigma(&self) -> f64 {
        gaussian_sigma(self.epsilon, self.delta, self.clip_norm).expect("validated at build")
    }
}

/// Classic Gaussian-mechanism calibration:
/// `sigma = sensitivity * sqrt(2 ln(1.25 / delta)) / epsilon`.
pub fn gaussian_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(Error::Config(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    let sigma = sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon;
    if !sigma.is_finite() {
        return Err(Error::Config(format!(
            "sigma overflows for epsilon={epsilon}, delta={delta}"
        )));
    }
    Ok(sigma)
}

/// Scales `o` down to L2 norm `clip_norm` when it exceeds it.
pub fn clip_to_norm<T: Scalar>(o: &[T], clip_norm: T) -> Vec<T> {
    let norm = o.iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm <= clip_norm || norm == T::zero() {
        return o.to_vec();
    }
    let scale = clip_norm / norm;
    o.iter().map(|&v| v * scale).collect()
}

/// Clips one sample's output and adds `N(0, sigma^2)` per coordinate.
/// `sigma = 0` degrades to pure clipping, which tests rely on.
pub fn clip_and_perturb<T: Scalar, R: Rng + ?Sized>(
    o: &[T],
    clip_norm: T,
    sigma: T,
    rng: &mut R,
) -> Result<Vec<T>> {
    if o.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "forward output entering dp channel".into(),
        ));
    }
    let mut clipped = clip_to_norm(o, clip_norm);
    if sigma > T::zero() {
        for v in &mut clipped {
            *v += sigma * T::sample_standard_normal(rng);
        }
    }
    Ok(clipped)
}

/// Row-wise [`clip_and_perturb`] over a batch of forward outputs. Noise is
/// drawn row by row in row order, so a fixed RNG state fixes the result.
pub fn clip_and_perturb_rows<T: Scalar, R: Rng + ?Sized>(
    batch: &Matrix<T>,
    clip_norm: T,
    sigma: T,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let mut out = Vec::with_capacity(batch.rows() * batch.cols());
    for r in 0..batch.rows() {
        out.extend(clip_and_perturb(batch.row(r), clip_norm, sigma, rng)?);
    }
    Matrix::new(batch.rows(), batch.cols(), out)
}
