//! Batched fully connected layers over flat parameter vectors, shared by the
//! hypernetwork and the downstream classifier.

use crate::linalg::{gemm, MatView};

/// One affine layer stored at `offset` in a flat parameter vector:
/// `fan_out × fan_in` weights (row-major) followed by `fan_out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl Dense {
    pub fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }

    pub fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.fan_in * self.fan_out]
    }

    pub fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.fan_in * self.fan_out;
        &params[start..start + self.fan_out]
    }

    /// `out = x · Wᵀ + b` for a batch `x` (rows × fan_in); `out` rows are
    /// `ldo` apart.
    pub fn forward(&self, params: &[f64], x: MatView<'_>, out: &mut [f64], ldo: usize) {
        let b = self.bias(params);
        for i in 0..x.rows() {
            out[i * ldo..i * ldo + self.fan_out].copy_from_slice(b);
        }
        let w = MatView::new(self.weights(params), self.fan_out, self.fan_in);
        gemm(1.0, x, w.t(), 1.0, out, ldo);
    }

    /// Tangent map without bias: `out = x · Wᵀ`.
    pub fn forward_linear(&self, params: &[f64], x: MatView<'_>, out: &mut [f64], ldo: usize) {
        let w = MatView::new(self.weights(params), self.fan_out, self.fan_in);
        gemm(1.0, x, w.t(), 0.0, out, ldo);
    }

    /// Writes this layer's parameter gradient into `grad[offset..]`.
    pub fn weight_grad(&self, x: MatView<'_>, dout: MatView<'_>, grad: &mut [f64]) {
        let (gw, gb) =
            grad[self.offset..self.offset + self.len()].split_at_mut(self.fan_in * self.fan_out);
        gemm(1.0, dout.t(), x, 0.0, gw, self.fan_in);
        gb.fill(0.0);
        for i in 0..dout.rows() {
            for (j, g) in gb.iter_mut().enumerate() {
                *g += dout.get(i, j);
            }
        }
    }

    /// `dx = beta · dx + dout · W`.
    pub fn input_grad(
        &self,
        params: &[f64],
        dout: MatView<'_>,
        beta: f64,
        dx: &mut [f64],
        ldx: usize,
    ) {
        let w = MatView::new(self.weights(params), self.fan_out, self.fan_in);
        gemm(1.0, dout, w, beta, dx, ldx);
    }
}

pub(crate) fn relu_inplace(x: &mut [f64]) {
    for v in x {
        // NaN passes through so the caller's finiteness checks still fire.
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks `grad` by the derivative of ReLU evaluated through its output
/// `post` (derivative 0 at the kink).
pub(crate) fn relu_backward(grad: &mut [f64], post: &[f64]) {
    for (g, &p) in grad.iter_mut().zip(post) {
        if p.is_nan() || p <= 0.0 {
            *g = 0.0;
        }
    }
}
