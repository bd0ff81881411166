//! Adam optimizer over flat parameter slices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hyperparameters. `Default` matches the usual published values except the
/// learning rate, which follows the experiment setup used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamParams<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::from(2e-4).unwrap(),
            beta1: T::from(0.9).unwrap(),
            beta2: T::from(0.999).unwrap(),
            epsilon: T::from(1e-8).unwrap(),
        }
    }
}

/// First/second moment estimates plus the step counter for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }
}

/// One Adam update in place. Bias-corrected; `state.t` advances by one.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    hp: &AdamParams<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Dimension(format!(
            "adam step over {} params, {} grads, {} state entries",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient passed to adam".into()));
    }
    state.t += 1;
    let t = T::from(state.t).unwrap();
    let one = T::one();
    let bc1 = one - hp.beta1.powf(t);
    let bc2 = one - hp.beta2.powf(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hp.beta1 * state.m[i] + (one - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (one - hp.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
    Ok(())
}
