//! The SIREN main network `f(w, p)`: affine layers with `sin(ω0 · ·)`
//! activations on every hidden layer and a linear output layer.
//!
//! Weights live in one flat vector. Canonical layout: for each layer in
//! order, the weight matrix row-major (`fan_out × fan_in`) followed by its
//! bias vector.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{gemm, MatView, Matrix};
use crate::math;

/// Default frequency scale of the sine activations.
pub const DEFAULT_OMEGA0: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MainNetArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub omega0: f64,
}

/// Offsets of one layer inside the flat weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerSlot {
    pub fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.fan_out == 0
    }

    /// Range of this layer's parameters (weights then bias).
    pub fn range(&self) -> core::ops::Range<usize> {
        self.weight_offset..self.weight_offset + self.len()
    }
}

impl MainNetArch {
    pub fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        output_dim: usize,
        omega0: f64,
    ) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden,
            output_dim,
            omega0,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Config(
                "main network needs at least one hidden layer".into(),
            ));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(
                "main network layer widths must be positive".into(),
            ));
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::Config("omega0 must be positive".into()));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn layers(&self) -> Vec<LayerSlot> {
        let mut slots = Vec::with_capacity(self.num_layers());
        let mut fan_in = self.input_dim;
        let mut offset = 0;
        for &fan_out in self.hidden.iter().chain(core::iter::once(&self.output_dim)) {
            slots.push(LayerSlot {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
            });
            offset += (fan_in + 1) * fan_out;
            fan_in = fan_out;
        }
        slots
    }

    /// Total parameter count `d`.
    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerSlot::len).sum()
    }

    pub fn max_width(&self) -> usize {
        self.hidden
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(self.input_dim)
    }
}

/// Flat main-network parameter vector with its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct MainNetWeights {
    arch: MainNetArch,
    w: Vec<f64>,
}

impl MainNetWeights {
    pub fn new(arch: MainNetArch, w: Vec<f64>) -> Result<Self> {
        check_len("main network weights", arch.param_count(), w.len())?;
        Ok(Self { arch, w })
    }

    pub fn zeros(arch: MainNetArch) -> Self {
        let d = arch.param_count();
        Self {
            arch,
            w: vec![0.0; d],
        }
    }

    pub fn arch(&self) -> &MainNetArch {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    /// Splits into per-layer `(weight matrix, bias)` pairs.
    pub fn unflatten(&self) -> Vec<(Matrix, Vec<f64>)> {
        self.arch
            .layers()
            .iter()
            .map(|s| {
                let wm = self.w[s.weight_offset..s.bias_offset].to_vec();
                let b = self.w[s.bias_offset..s.bias_offset + s.fan_out].to_vec();
                (
                    Matrix::from_vec(s.fan_out, s.fan_in, wm).expect("slot shape"),
                    b,
                )
            })
            .collect()
    }

    /// Inverse of [`unflatten`](Self::unflatten).
    pub fn flatten(arch: MainNetArch, layers: &[(Matrix, Vec<f64>)]) -> Result<Self> {
        let slots = arch.layers();
        check_len("layer count", slots.len(), layers.len())?;
        let mut w = Vec::with_capacity(arch.param_count());
        for (slot, (m, b)) in slots.iter().zip(layers) {
            check_len("layer weight rows", slot.fan_out, m.rows())?;
            check_len("layer weight cols", slot.fan_in, m.cols())?;
            check_len("layer bias", slot.fan_out, b.len())?;
            w.extend_from_slice(m.as_slice());
            w.extend_from_slice(b);
        }
        Self::new(arch, w)
    }

    /// `f(w, p)` for a single coordinate.
    pub fn forward(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut tape = PointTape::default();
        Ok(tape.forward(self, p)?.to_vec())
    }
}

fn dense_into(w: &[f64], slot: &LayerSlot, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let (wm, b) = (
        &w[slot.weight_offset..slot.bias_offset],
        &w[slot.bias_offset..],
    );
    for o in 0..slot.fan_out {
        let row = &wm[o * slot.fan_in..(o + 1) * slot.fan_in];
        out.push(math::dot(row, x) + b[o]);
    }
}

/// Activation record of one forward pass at a single coordinate.
#[derive(Debug, Clone, Default)]
pub struct PointTape {
    input: Vec<f64>,
    // Per hidden layer: sin(ω0 u) and ω0 cos(ω0 u).
    acts: Vec<Vec<f64>>,
    dacts: Vec<Vec<f64>>,
    output: Vec<f64>,
    recorded: Option<MainNetArch>,
}

/// Gradients from [`PointTape::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrad {
    /// Upstream cotangent pulled back to the flat weight vector.
    pub weights: Vec<f64>,
    /// Cotangent of each hidden layer's pre-activation `u` (before `ω0`).
    pub preactivations: Vec<Vec<f64>>,
}

impl PointTape {
    pub fn forward(&mut self, w: &MainNetWeights, p: &[f64]) -> Result<&[f64]> {
        let arch = w.arch();
        check_len("main network input", arch.input_dim, p.len())?;
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric(
                "non-finite main network input coordinate".into(),
            ));
        }
        let slots = arch.layers();
        let n_hidden = arch.hidden.len();
        self.input.clear();
        self.input.extend_from_slice(p);
        self.acts.resize_with(n_hidden, Vec::new);
        self.dacts.resize_with(n_hidden, Vec::new);

        let mut u = Vec::new();
        for (l, slot) in slots[..n_hidden].iter().enumerate() {
            let x = if l == 0 {
                &self.input
            } else {
                &self.acts[l - 1]
            };
            dense_into(&w.w, slot, x, &mut u);
            let (act, dact) = (&mut self.acts[l], &mut self.dacts[l]);
            act.clear();
            dact.clear();
            for &ui in &u {
                let z = arch.omega0 * ui;
                act.push(math::sin(z));
                dact.push(arch.omega0 * math::cos(z));
            }
        }
        let last = &slots[n_hidden];
        let x = &self.acts[n_hidden - 1];
        dense_into(&w.w, last, x, &mut self.output);
        self.recorded = Some(arch.clone());
        Ok(&self.output)
    }

    /// Reverse sweep for the recorded forward pass.
    pub fn backward(&self, w: &MainNetWeights, upstream: &[f64]) -> Result<PointGrad> {
        match &self.recorded {
            Some(a) if a == w.arch() => {}
            _ => return Err(Error::MissingCache),
        }
        let arch = w.arch();
        check_len("main network cotangent", arch.output_dim, upstream.len())?;
        let slots = arch.layers();
        let n_hidden = arch.hidden.len();
        let mut grad = vec![0.0; w.w.len()];
        let mut pre = vec![Vec::new(); n_hidden];

        // Cotangent flowing into the current layer's output.
        let mut delta = upstream.to_vec();
        for l in (0..=n_hidden).rev() {
            let slot = &slots[l];
            let x = if l == 0 {
                &self.input
            } else {
                &self.acts[l - 1]
            };
            for o in 0..slot.fan_out {
                let d = delta[o];
                grad[slot.bias_offset + o] = d;
                let row = &mut grad[slot.weight_offset + o * slot.fan_in..][..slot.fan_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g = d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let wm = &w.w[slot.weight_offset..slot.bias_offset];
            let mut back = vec![0.0; slot.fan_in];
            for o in 0..slot.fan_out {
                let d = delta[o];
                for (b, wi) in back
                    .iter_mut()
                    .zip(&wm[o * slot.fan_in..(o + 1) * slot.fan_in])
                {
                    *b += d * wi;
                }
            }
            for (b, da) in back.iter_mut().zip(&self.dacts[l - 1]) {
                *b *= da;
            }
            pre[l - 1] = back.clone();
            delta = back;
        }
        Ok(PointGrad {
            weights: grad,
            preactivations: pre,
        })
    }
}

/// Batched forward/backward of the main network over `n` coordinates.
///
/// Buffers are reused across calls, which matters in the training loop.
#[derive(Debug, Clone, Default)]
pub struct GridTape {
    n: usize,
    coords: Vec<f64>,
    // Per hidden layer, n × width each.
    pre: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
    cos: Vec<Vec<f64>>,
    dpre: Vec<Vec<f64>>,
    output: Vec<f64>,
    back: Vec<f64>,
    scratch: Vec<f64>,
    recorded: Option<MainNetArch>,
}

impl GridTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Evaluates `f(w, p_i)` for the `n × input_dim` row-major `coords`;
    /// returns the `n × output_dim` outputs.
    pub fn forward(&mut self, arch: &MainNetArch, w: &[f64], coords: &[f64]) -> Result<&[f64]> {
        check_len("main network weights", arch.param_count(), w.len())?;
        let p = arch.input_dim;
        if !coords.len().is_multiple_of(p) {
            return Err(Error::Shape {
                what: "coordinate matrix",
                expected: coords.len() / p * p,
                got: coords.len(),
            });
        }
        let n = coords.len() / p;
        self.n = n;
        self.coords.clear();
        self.coords.extend_from_slice(coords);
        let slots = arch.layers();
        let n_hidden = arch.hidden.len();
        for buf in [&mut self.pre, &mut self.sin, &mut self.cos, &mut self.dpre] {
            buf.resize_with(n_hidden, Vec::new);
        }

        for (l, slot) in slots[..n_hidden].iter().enumerate() {
            let u = &mut self.pre[l];
            u.resize(n * slot.fan_out, 0.0);
            let bias = &w[slot.bias_offset..slot.bias_offset + slot.fan_out];
            for row in u.chunks_exact_mut(slot.fan_out) {
                row.copy_from_slice(bias);
            }
            let x = if l == 0 {
                &self.coords[..]
            } else {
                &self.sin[l - 1][..]
            };
            affine_accumulate(
                x,
                &w[slot.weight_offset..slot.bias_offset],
                slot,
                u,
                &mut self.scratch,
            );
            self.sin[l].resize(u.len(), 0.0);
            self.cos[l].resize(u.len(), 0.0);
            math::sin_cos_scaled(u, arch.omega0, &mut self.sin[l], &mut self.cos[l]);
            // Keep the activation slope ω0·cos rather than cos itself.
            for c in self.cos[l].iter_mut() {
                *c *= arch.omega0;
            }
        }

        let last = &slots[n_hidden];
        self.output.resize(n * last.fan_out, 0.0);
        let bias = &w[last.bias_offset..last.bias_offset + last.fan_out];
        for row in self.output.chunks_exact_mut(last.fan_out) {
            row.copy_from_slice(bias);
        }
        affine_accumulate(
            &self.sin[n_hidden - 1],
            &w[last.weight_offset..last.bias_offset],
            last,
            &mut self.output,
            &mut self.scratch,
        );
        if self.recorded.as_ref() != Some(arch) {
            self.recorded = Some(arch.clone());
        }
        Ok(&self.output)
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Pulls the `n × output_dim` cotangent `upstream` back to the weights,
    /// summed over all coordinates. Overwrites `grad_w`.
    pub fn backward(
        &mut self,
        arch: &MainNetArch,
        w: &[f64],
        upstream: &[f64],
        grad_w: &mut [f64],
    ) -> Result<()> {
        match &self.recorded {
            Some(a) if a == arch => {}
            _ => return Err(Error::MissingCache),
        }
        let n = self.n;
        check_len("main network weights", arch.param_count(), w.len())?;
        check_len(
            "main network cotangent",
            n * arch.output_dim,
            upstream.len(),
        )?;
        check_len("main network gradient buffer", w.len(), grad_w.len())?;
        let slots = arch.layers();
        let n_hidden = arch.hidden.len();

        let last = &slots[n_hidden];
        outer_sum(
            upstream,
            &self.sin[n_hidden - 1],
            last,
            &mut grad_w[last.weight_offset..last.bias_offset],
            &mut self.scratch,
        );
        column_sums(
            upstream,
            last.fan_out,
            &mut grad_w[last.bias_offset..last.bias_offset + last.fan_out],
        );
        self.back.resize(n * last.fan_in, 0.0);
        pull_back(
            upstream,
            &w[last.weight_offset..last.bias_offset],
            last,
            &mut self.back,
        );

        for l in (0..n_hidden).rev() {
            let slot = &slots[l];
            let dpre = &mut self.dpre[l];
            dpre.resize(n * slot.fan_out, 0.0);
            for ((d, b), c) in dpre.iter_mut().zip(&self.back).zip(&self.cos[l]) {
                *d = b * c;
            }
            let x = if l == 0 {
                &self.coords[..]
            } else {
                &self.sin[l - 1][..]
            };
            outer_sum(
                dpre,
                x,
                slot,
                &mut grad_w[slot.weight_offset..slot.bias_offset],
                &mut self.scratch,
            );
            column_sums(
                dpre,
                slot.fan_out,
                &mut grad_w[slot.bias_offset..slot.bias_offset + slot.fan_out],
            );
            if l > 0 {
                self.back.resize(n * slot.fan_in, 0.0);
                pull_back(
                    dpre,
                    &w[slot.weight_offset..slot.bias_offset],
                    slot,
                    &mut self.back,
                );
            }
        }
        Ok(())
    }

    /// Forward-mode derivative of the last forward's outputs along `m` weight
    /// tangents (`dw`, `m × d` row-major). Writes `m` blocks of `n × c` to
    /// `out`.
    pub fn jvp(&self, arch: &MainNetArch, w: &[f64], dw: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.recorded {
            Some(a) if a == arch => {}
            _ => return Err(Error::MissingCache),
        }
        let d = arch.param_count();
        check_len("main network weights", d, w.len())?;
        let m = dw.len() / d;
        check_len("weight tangents", m * d, dw.len())?;
        let (n, c) = (self.n, arch.output_dim);
        check_len("tangent output", m * n * c, out.len())?;
        let slots = arch.layers();
        let n_hidden = arch.hidden.len();
        let width = arch.max_width();
        let mut prev = vec![0.0; n * width];
        let mut cur = vec![0.0; n * width];

        for (k, t) in dw.chunks_exact(d).enumerate() {
            for (l, slot) in slots.iter().enumerate() {
                let fo = slot.fan_out;
                let dst: &mut [f64] = if l == n_hidden {
                    &mut out[k * n * c..(k + 1) * n * c]
                } else {
                    &mut cur[..n * fo]
                };
                let db = &t[slot.bias_offset..slot.bias_offset + fo];
                for row in dst.chunks_exact_mut(fo) {
                    row.copy_from_slice(db);
                }
                let dwm = MatView::new(&t[slot.weight_offset..slot.bias_offset], fo, slot.fan_in);
                let x = if l == 0 {
                    MatView::new(&self.coords, n, slot.fan_in)
                } else {
                    MatView::new(&self.sin[l - 1], n, slot.fan_in)
                };
                gemm(1.0, x, dwm.t(), 1.0, dst, fo);
                if l > 0 {
                    let wm =
                        MatView::new(&w[slot.weight_offset..slot.bias_offset], fo, slot.fan_in);
                    gemm(
                        1.0,
                        MatView::new(&prev[..n * slot.fan_in], n, slot.fan_in),
                        wm.t(),
                        1.0,
                        dst,
                        fo,
                    );
                }
                if l < n_hidden {
                    for (du, cs) in dst.iter_mut().zip(&self.cos[l]) {
                        *du *= cs;
                    }
                    core::mem::swap(&mut prev, &mut cur);
                }
            }
        }
        Ok(())
    }

    /// Cotangent of hidden layer `l`'s pre-activations from the last backward.
    pub fn preactivation_grad(&self, l: usize) -> &[f64] {
        &self.dpre[l]
    }
}

// Layers with at most this many inputs or outputs bypass gemm: packing costs
// more than the arithmetic there.
const THIN: usize = 4;

/// `out += x · Wᵀ` for `x` with `fan_in` columns and `W` row-major
/// `fan_out × fan_in`.
fn affine_accumulate(
    x: &[f64],
    wm: &[f64],
    slot: &LayerSlot,
    out: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let (fi, fo) = (slot.fan_in, slot.fan_out);
    let n = x.len() / fi;
    if fi <= THIN {
        scratch.clear();
        for p in 0..fi {
            scratch.extend((0..fo).map(|j| wm[j * fi + p]));
        }
        for (xr, or) in x.chunks_exact(fi).zip(out.chunks_exact_mut(fo)) {
            for (p, &xp) in xr.iter().enumerate() {
                for (o, &wv) in or.iter_mut().zip(&scratch[p * fo..(p + 1) * fo]) {
                    *o += xp * wv;
                }
            }
        }
    } else if fo <= THIN {
        for (xr, or) in x.chunks_exact(fi).zip(out.chunks_exact_mut(fo)) {
            for (o, wr) in or.iter_mut().zip(wm.chunks_exact(fi)) {
                *o += math::dot(xr, wr);
            }
        }
    } else {
        gemm(
            1.0,
            MatView::new(x, n, fi),
            MatView::new(wm, fo, fi).t(),
            1.0,
            out,
            fo,
        );
    }
}

/// `grad = dvᵀ · x`, the weight gradient summed over rows.
fn outer_sum(dv: &[f64], x: &[f64], slot: &LayerSlot, grad: &mut [f64], scratch: &mut Vec<f64>) {
    let (fi, fo) = (slot.fan_in, slot.fan_out);
    let n = x.len() / fi;
    if fi <= THIN {
        scratch.clear();
        scratch.resize(fi * fo, 0.0);
        for (xr, dr) in x.chunks_exact(fi).zip(dv.chunks_exact(fo)) {
            for (p, &xp) in xr.iter().enumerate() {
                for (a, &d) in scratch[p * fo..(p + 1) * fo].iter_mut().zip(dr) {
                    *a += xp * d;
                }
            }
        }
        for j in 0..fo {
            for p in 0..fi {
                grad[j * fi + p] = scratch[p * fo + j];
            }
        }
    } else if fo <= THIN {
        grad.fill(0.0);
        for (xr, dr) in x.chunks_exact(fi).zip(dv.chunks_exact(fo)) {
            for (gr, &d) in grad.chunks_exact_mut(fi).zip(dr) {
                for (g, &xp) in gr.iter_mut().zip(xr) {
                    *g += d * xp;
                }
            }
        }
    } else {
        gemm(
            1.0,
            MatView::new(dv, n, fo).t(),
            MatView::new(x, n, fi),
            0.0,
            grad,
            fi,
        );
    }
}

/// `back = dv · W`, the cotangent of the layer input.
fn pull_back(dv: &[f64], wm: &[f64], slot: &LayerSlot, back: &mut [f64]) {
    let (fi, fo) = (slot.fan_in, slot.fan_out);
    let n = dv.len() / fo;
    if fo <= THIN {
        for (br, dr) in back.chunks_exact_mut(fi).zip(dv.chunks_exact(fo)) {
            br.fill(0.0);
            for (wr, &d) in wm.chunks_exact(fi).zip(dr) {
                for (b, &wv) in br.iter_mut().zip(wr) {
                    *b += d * wv;
                }
            }
        }
    } else {
        gemm(
            1.0,
            MatView::new(dv, n, fo),
            MatView::new(wm, fo, fi),
            0.0,
            back,
            fi,
        );
    }
}

fn column_sums(m: &[f64], cols: usize, out: &mut [f64]) {
    out.fill(0.0);
    for row in m.chunks_exact(cols) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_unit() -> MainNetWeights {
        let arch = MainNetArch::new(1, vec![1], 1, 30.0).unwrap();
        // a, b | c, d
        MainNetWeights::new(arch, vec![0.1, 0.0, 2.0, 0.5]).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let arch = MainNetArch::new(2, vec![8, 8], 1, 30.0).unwrap();
        let w = MainNetWeights::zeros(arch);
        assert_eq!(w.forward(&[0.3, -0.7]).unwrap(), [0.0]);
    }

    #[test]
    fn hand_evaluated_single_unit() {
        let y = one_unit().forward(&[0.2]).unwrap()[0];
        assert!((y - (2.0 * libm::sin(0.6) + 0.5)).abs() < 1e-15);
        assert!((y - 1.62928).abs() < 1e-5);
    }

    #[test]
    fn single_unit_gradient_wrt_output_weight() {
        let w = one_unit();
        let mut tape = PointTape::default();
        tape.forward(&w, &[0.2]).unwrap();
        let g = tape.backward(&w, &[1.0]).unwrap();
        assert!((g.weights[2] - libm::sin(0.6)).abs() < 1e-15);
        assert_eq!(g.weights[3], 1.0);
        // d/da = c · ω0 cos(ω0 a p) · p
        assert!((g.weights[0] - 2.0 * 30.0 * libm::cos(0.6) * 0.2).abs() < 1e-12);
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let w = one_unit();
        assert_eq!(
            PointTape::default().backward(&w, &[1.0]),
            Err(Error::MissingCache)
        );
        let mut grid = GridTape::new();
        let mut g = vec![0.0; 4];
        assert_eq!(
            grid.backward(w.arch(), w.as_slice(), &[1.0], &mut g),
            Err(Error::MissingCache)
        );
    }

    #[test]
    fn shape_errors() {
        let w = one_unit();
        assert!(matches!(w.forward(&[0.1, 0.2]), Err(Error::Shape { .. })));
        assert!(MainNetArch::new(2, vec![], 1, 30.0).is_err());
        assert!(MainNetArch::new(2, vec![4], 1, 0.0).is_err());
    }

    #[test]
    fn table_six_arch_param_count() {
        let arch = MainNetArch::new(2, vec![64, 64, 64], 1, 30.0).unwrap();
        assert_eq!(arch.param_count(), 3 * 64 + 65 * 64 * 2 + 65);
        let shapenet = MainNetArch::new(3, vec![128, 128, 128], 1, 30.0).unwrap();
        assert_eq!(shapenet.param_count(), 4 * 128 + 129 * 128 * 2 + 129);
    }
}
