//! Bias-corrected Adam.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::math::{powi, sqrt};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment buffers and step counter for one optimized parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One update of `params` from `grads`. A non-finite gradient aborts
    /// before anything is modified; `block` names the parameter block in
    /// the error.
    pub fn step(&mut self, block: &str, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        check_len("adam parameters", self.m.len(), params.len())?;
        check_len("adam gradients", self.m.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient of {block} at index {i}"
            )));
        }
        self.step += 1;
        let t = self.step.min(i32::MAX as u64) as i32;
        let bc1 = 1.0 - powi(self.beta1, t);
        let bc2 = 1.0 - powi(self.beta2, t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (sqrt(v_hat) + eps);
        }
        Ok(())
    }
}
