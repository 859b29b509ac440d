//! The hypernetwork `φ(v, z)`: a ReLU MLP trunk mapping a latent vector to
//! the flat weight vector of a [`MainNetArch`].
//!
//! With `heads == 0` a single linear layer maps trunk features to all `d`
//! main-network parameters. With `heads > 0` every main-network layer gets
//! its own head: a ReLU layer of width `heads` followed by a linear layer
//! emitting exactly that layer's parameter slice. Head outputs concatenate
//! into the canonical main-network layout.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{check_len, Error, Result};
use crate::layers::{relu_backward, relu_inplace, Dense};
use crate::linalg::{MatView, Matrix};
use crate::siren::{MainNetArch, MainNetWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperNetArch {
    pub latent_dim: usize,
    pub trunk: Vec<usize>,
    /// Per-main-layer head width; 0 selects a single shared output layer.
    pub heads: usize,
    pub main: MainNetArch,
}

/// One output block: optional ReLU hidden layer, then a linear layer
/// writing `range` of the generated weight vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Head {
    pub hidden: Option<Dense>,
    pub out: Dense,
    pub range: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub trunk: Vec<Dense>,
    pub heads: Vec<Head>,
    pub param_count: usize,
    pub feature_dim: usize,
}

impl HyperNetArch {
    pub fn new(
        latent_dim: usize,
        trunk: Vec<usize>,
        heads: usize,
        main: MainNetArch,
    ) -> Result<Self> {
        let arch = Self {
            latent_dim,
            trunk,
            heads,
            main,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent dimension must be at least 1".into()));
        }
        if self.trunk.contains(&0) {
            return Err(Error::Config(
                "hypernetwork trunk widths must be positive".into(),
            ));
        }
        self.main.validate()
    }

    /// Generated weight count `d`.
    pub fn output_dim(&self) -> usize {
        self.main.param_count()
    }

    /// Hypernetwork parameter count `k`.
    pub fn param_count(&self) -> usize {
        self.plan().param_count
    }

    pub(crate) fn plan(&self) -> Plan {
        let mut offset = 0;
        let mut dense = |fan_in: usize, fan_out: usize| {
            let d = Dense {
                fan_in,
                fan_out,
                offset,
            };
            offset += d.len();
            d
        };
        let mut width = self.latent_dim;
        let mut trunk = Vec::with_capacity(self.trunk.len());
        for &h in &self.trunk {
            trunk.push(dense(width, h));
            width = h;
        }
        let heads = if self.heads == 0 {
            let d = self.output_dim();
            vec![Head {
                hidden: None,
                out: dense(width, d),
                range: 0..d,
            }]
        } else {
            self.main
                .layers()
                .iter()
                .map(|slot| {
                    let hidden = dense(width, self.heads);
                    let out = dense(self.heads, slot.len());
                    Head {
                        hidden: Some(hidden),
                        out,
                        range: slot.range(),
                    }
                })
                .collect()
        };
        Plan {
            trunk,
            heads,
            param_count: offset,
            feature_dim: width,
        }
    }
}

/// Hypernetwork parameters `v` with their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperNetParams {
    arch: HyperNetArch,
    v: Vec<f64>,
}

impl HyperNetParams {
    pub fn new(arch: HyperNetArch, v: Vec<f64>) -> Result<Self> {
        check_len("hypernetwork parameters", arch.param_count(), v.len())?;
        Ok(Self { arch, v })
    }

    pub fn zeros(arch: HyperNetArch) -> Self {
        let k = arch.param_count();
        Self {
            arch,
            v: vec![0.0; k],
        }
    }

    pub fn arch(&self) -> &HyperNetArch {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.v
    }

    /// `w = φ(v, z)`.
    pub fn forward(&self, z: &[f64]) -> Result<MainNetWeights> {
        let mut tape = HyperTape::default();
        let w = tape.forward(self, z)?.to_vec();
        MainNetWeights::new(self.arch.main.clone(), w)
    }

    /// Pulls a length-`d` cotangent back to `(∂/∂v, ∂/∂z)`.
    pub fn backward(&self, z: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut tape = HyperTape::default();
        tape.forward(self, z)?;
        let mut gv = vec![0.0; self.v.len()];
        let mut gz = vec![0.0; z.len()];
        tape.backward(self, upstream, Some(&mut gv), &mut gz)?;
        Ok((gv, gz))
    }

    /// Exact Jacobian `∂φ/∂z` (`d × l`), by forward-mode propagation of the
    /// `l` latent basis directions.
    pub fn jacobian_z(&self, z: &[f64]) -> Result<Matrix> {
        let mut tape = HyperTape::default();
        tape.forward(self, z)?;
        tape.jacobian_z(self, 0)
    }
}

/// Batched hypernetwork evaluation over `B` latents with cached activations.
#[derive(Debug, Clone, Default)]
pub struct HyperTape {
    batch: usize,
    latents: Vec<f64>,
    trunk_post: Vec<Vec<f64>>,
    head_post: Vec<Vec<f64>>,
    output: Vec<f64>,
    feature_grad: Vec<f64>,
    head_grad: Vec<f64>,
    trunk_grad: Vec<f64>,
    recorded: Option<HyperNetArch>,
}

impl HyperTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Generated weights of the last forward, `B × d` row-major.
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Forward for the `B × l` row-major latent batch; returns `B × d` weights.
    pub fn forward(&mut self, params: &HyperNetParams, latents: &[f64]) -> Result<&[f64]> {
        let arch = &params.arch;
        let l = arch.latent_dim;
        if latents.is_empty() || !latents.len().is_multiple_of(l) {
            return Err(Error::Shape {
                what: "latent batch",
                expected: l,
                got: latents.len(),
            });
        }
        let batch = latents.len() / l;
        let plan = arch.plan();
        let v = &params.v;
        self.batch = batch;
        self.latents.clear();
        self.latents.extend_from_slice(latents);
        self.trunk_post.resize_with(plan.trunk.len(), Vec::new);
        self.head_post.resize_with(plan.heads.len(), Vec::new);

        for (t, layer) in plan.trunk.iter().enumerate() {
            let (done, rest) = self.trunk_post.split_at_mut(t);
            let x = if t == 0 {
                MatView::new(&self.latents, batch, l)
            } else {
                MatView::new(&done[t - 1], batch, layer.fan_in)
            };
            let out = &mut rest[0];
            out.resize(batch * layer.fan_out, 0.0);
            layer.forward(v, x, out, layer.fan_out);
            relu_inplace(out);
        }

        let d = arch.output_dim();
        self.output.resize(batch * d, 0.0);
        let feature = match self.trunk_post.last() {
            Some(h) => MatView::new(h, batch, plan.feature_dim),
            None => MatView::new(&self.latents, batch, l),
        };
        for (h, head) in plan.heads.iter().enumerate() {
            let input = match &head.hidden {
                Some(hidden) => {
                    let post = &mut self.head_post[h];
                    post.resize(batch * hidden.fan_out, 0.0);
                    hidden.forward(v, feature, post, hidden.fan_out);
                    relu_inplace(post);
                    MatView::new(post, batch, hidden.fan_out)
                }
                None => feature,
            };
            head.out
                .forward(v, input, &mut self.output[head.range.start..], d);
        }
        self.recorded = Some(arch.clone());
        Ok(&self.output)
    }

    /// Reverse sweep for the last forward. `upstream` is `B × d`; writes
    /// the summed parameter gradient into `grad_v` (when given) and the
    /// per-sample latent gradients into `grad_z` (`B × l`). Both are
    /// overwritten.
    pub fn backward(
        &mut self,
        params: &HyperNetParams,
        upstream: &[f64],
        mut grad_v: Option<&mut [f64]>,
        grad_z: &mut [f64],
    ) -> Result<()> {
        let arch = &params.arch;
        if self.recorded.as_ref() != Some(arch) {
            return Err(Error::MissingCache);
        }
        let (batch, l, d) = (self.batch, arch.latent_dim, arch.output_dim());
        check_len("hypernetwork cotangent", batch * d, upstream.len())?;
        check_len("latent gradient buffer", batch * l, grad_z.len())?;
        if let Some(g) = grad_v.as_deref() {
            check_len("hypernetwork gradient buffer", params.v.len(), g.len())?;
        }
        let plan = arch.plan();
        let v = &params.v;
        let fdim = plan.feature_dim;
        let feature = match self.trunk_post.last() {
            Some(h) => MatView::new(h, batch, fdim),
            None => MatView::new(&self.latents, batch, l),
        };

        self.feature_grad.resize(batch * fdim, 0.0);
        for (h, head) in plan.heads.iter().enumerate() {
            let dout = MatView::strided(&upstream[head.range.start..], batch, head.range.len(), d);
            let beta = if h == 0 { 0.0 } else { 1.0 };
            match &head.hidden {
                Some(hidden) => {
                    let post = &self.head_post[h];
                    let input = MatView::new(post, batch, hidden.fan_out);
                    if let Some(g) = grad_v.as_deref_mut() {
                        head.out.weight_grad(input, dout, g);
                    }
                    self.head_grad.resize(batch * hidden.fan_out, 0.0);
                    head.out
                        .input_grad(v, dout, 0.0, &mut self.head_grad, hidden.fan_out);
                    relu_backward(&mut self.head_grad, post);
                    let dhid = MatView::new(&self.head_grad, batch, hidden.fan_out);
                    if let Some(g) = grad_v.as_deref_mut() {
                        hidden.weight_grad(feature, dhid, g);
                    }
                    hidden.input_grad(v, dhid, beta, &mut self.feature_grad, fdim);
                }
                None => {
                    if let Some(g) = grad_v.as_deref_mut() {
                        head.out.weight_grad(feature, dout, g);
                    }
                    head.out
                        .input_grad(v, dout, beta, &mut self.feature_grad, fdim);
                }
            }
        }

        if plan.trunk.is_empty() {
            grad_z.copy_from_slice(&self.feature_grad);
            return Ok(());
        }
        let mut current = core::mem::take(&mut self.feature_grad);
        for (t, layer) in plan.trunk.iter().enumerate().rev() {
            relu_backward(&mut current, &self.trunk_post[t]);
            let dcur = MatView::new(&current, batch, layer.fan_out);
            let x_prev = if t == 0 {
                MatView::new(&self.latents, batch, l)
            } else {
                MatView::new(&self.trunk_post[t - 1], batch, layer.fan_in)
            };
            if let Some(g) = grad_v.as_deref_mut() {
                layer.weight_grad(x_prev, dcur, g);
            }
            if t == 0 {
                layer.input_grad(v, dcur, 0.0, grad_z, l);
            } else {
                self.trunk_grad.resize(batch * layer.fan_in, 0.0);
                layer.input_grad(v, dcur, 0.0, &mut self.trunk_grad, layer.fan_in);
                core::mem::swap(&mut current, &mut self.trunk_grad);
            }
        }
        self.feature_grad = current;
        Ok(())
    }

    /// Exact `∂φ/∂z` (`d × l`) for batch row `row` of the last forward.
    pub fn jacobian_z(&self, params: &HyperNetParams, row: usize) -> Result<Matrix> {
        let arch = &params.arch;
        if self.recorded.as_ref() != Some(arch) || row >= self.batch {
            return Err(Error::MissingCache);
        }
        let plan = arch.plan();
        let v = &params.v;
        let (l, d) = (arch.latent_dim, arch.output_dim());

        // Rows of `tangent` are the images of the l latent basis vectors.
        let mut tangent = Matrix::identity(l).into_vec();
        let mut width = l;
        for (t, layer) in plan.trunk.iter().enumerate() {
            let mut next = vec![0.0; l * layer.fan_out];
            layer.forward_linear(
                v,
                MatView::new(&tangent, l, width),
                &mut next,
                layer.fan_out,
            );
            let post = &self.trunk_post[t][row * layer.fan_out..(row + 1) * layer.fan_out];
            mask_columns(&mut next, post);
            tangent = next;
            width = layer.fan_out;
        }

        let mut rows = vec![0.0; l * d];
        for (h, head) in plan.heads.iter().enumerate() {
            match &head.hidden {
                Some(hidden) => {
                    let mut th = vec![0.0; l * hidden.fan_out];
                    hidden.forward_linear(
                        v,
                        MatView::new(&tangent, l, width),
                        &mut th,
                        hidden.fan_out,
                    );
                    let post = &self.head_post[h][row * hidden.fan_out..(row + 1) * hidden.fan_out];
                    mask_columns(&mut th, post);
                    head.out.forward_linear(
                        v,
                        MatView::new(&th, l, hidden.fan_out),
                        &mut rows[head.range.start..],
                        d,
                    );
                }
                None => {
                    head.out.forward_linear(
                        v,
                        MatView::new(&tangent, l, width),
                        &mut rows[head.range.start..],
                        d,
                    );
                }
            }
        }
        Ok(Matrix::from_vec(l, d, rows)?.transpose())
    }
}

fn mask_columns(m: &mut [f64], post: &[f64]) {
    for row in m.chunks_exact_mut(post.len()) {
        relu_backward(row, post);
    }
}
