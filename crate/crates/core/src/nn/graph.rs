//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards
//! visits every node after all of its consumers.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use super::spectral::SPECTRAL_EPS;
use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::par;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub const LEAKY: Activation = Activation::LeakyRelu(0.2);

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv { x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize },
    Upsample { x: Var, factor: usize },
    Act { x: Var, kind: Activation },
    Concat { a: Var, b: Var },
    L1 { pred: Var, target: Var },
    Bce { logits: Var, real: bool },
    Mse { x: Var, target: f64 },
    Add { a: Var, b: Var },
    Scale { x: Var, s: f64 },
    WeightedSum { x: Var, weights: Vec<f64> },
    SpectralScale { w: Var, u: Vec<f64>, v: Vec<f64>, sigma: f64 },
}

struct Node {
    value: Tensor4,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }

    /// Unfolds one image into a `(c*k*k) x (ho*wo)` patch matrix.
    fn im2col(&self, img: &[f64]) -> Vec<f64> {
        let (k, s, p) = (self.k, self.stride, self.pad as isize);
        let mut cols = vec![0.0; self.rows() * self.cols()];
        for c in 0..self.c {
            let plane = &img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((c * k + ky) * k + kx) * self.cols()..][..self.cols()];
                    for oy in 0..self.ho {
                        let y = (oy * s + ky) as isize - p;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        let src = &plane[y as usize * self.w..(y as usize + 1) * self.w];
                        for ox in 0..self.wo {
                            let x = (ox * s + kx) as isize - p;
                            if x >= 0 && x < self.w as isize {
                                row[oy * self.wo + ox] = src[x as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], img: &mut [f64]) {
        let (k, s, p) = (self.k, self.stride, self.pad as isize);
        for c in 0..self.c {
            let plane = &mut img[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols[((c * k + ky) * k + kx) * self.cols()..][..self.cols()];
                    for oy in 0..self.ho {
                        let y = (oy * s + ky) as isize - p;
                        if y < 0 || y >= self.h as isize {
                            continue;
                        }
                        for ox in 0..self.wo {
                            let x = (ox * s + kx) as isize - p;
                            if x >= 0 && x < self.w as isize {
                                plane[y as usize * self.w + x as usize] += row[oy * self.wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `c = a * b` (with optional transposes) for row-major slices.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64], beta: f64) {
    let av = if ta { ArrayView2::from_shape((k, m), a).expect("a").reversed_axes() } else { ArrayView2::from_shape((m, k), a).expect("a") };
    let bv = if tb { ArrayView2::from_shape((n, k), b).expect("b").reversed_axes() } else { ArrayView2::from_shape((k, n), b).expect("b") };
    let mut cv = ArrayViewMut2::from_shape((m, n), c).expect("c");
    general_mat_mul(1.0, &av, &bv, beta, &mut cv);
}

fn same_shape(a: &Tensor4, b: &Tensor4, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?} (N, C, H, W)", a.shape(), b.shape())));
    }
    Ok(())
}

fn finite_loss(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::numerical(what, format!("loss evaluated to {v}")))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor4, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor4) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor4) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor4 {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Cross-correlation with zero padding. `w` is `(out, in, k, k)`, `b` is `(1, out, 1, 1)`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let xs = self.value(x).shape();
        let ws = self.value(w).shape();
        if ws[2] != ws[3] || stride == 0 {
            return Err(Error::Shape(format!("conv kernel {ws:?} must be square with stride >= 1")));
        }
        if xs[1] != ws[1] {
            return Err(Error::Shape(format!("conv input has {} channels (C axis) but kernel expects {}", xs[1], ws[1])));
        }
        if let Some(b) = b {
            if self.value(b).len() != ws[0] {
                return Err(Error::Shape(format!("conv bias has {} values for {} output channels", self.value(b).len(), ws[0])));
            }
        }
        let (k, co) = (ws[2], ws[0]);
        if xs[2] + 2 * pad < k || xs[3] + 2 * pad < k {
            return Err(Error::Shape(format!("conv input H x W = {} x {} smaller than kernel {k} after padding {pad}", xs[2], xs[3])));
        }
        let g = ConvGeom { c: xs[1], h: xs[2], w: xs[3], k, stride, pad, ho: (xs[2] + 2 * pad - k) / stride + 1, wo: (xs[3] + 2 * pad - k) / stride + 1 };
        let xv = self.value(x);
        let wv = self.value(w).data();
        let bias = b.map(|b| self.value(b).data().to_vec());
        let items = par::map_range(xs[0], |i| {
            let cols = g.im2col(xv.item(i));
            let mut out = vec![0.0; co * g.cols()];
            gemm(co, g.rows(), g.cols(), wv, false, &cols, false, &mut out, 0.0);
            if let Some(bias) = &bias {
                for (row, bv) in out.chunks_mut(g.cols()).zip(bias) {
                    row.iter_mut().for_each(|v| *v += bv);
                }
            }
            out
        });
        let value = Tensor4::new([xs[0], co, g.ho, g.wo], items.concat())?;
        let rg = self.any_grad(&[x, w]) || b.is_some_and(|b| self.nodes[b.0].requires_grad);
        Ok(self.push(value, Op::Conv { x, w, b, stride, pad }, rg))
    }

    pub fn upsample_nearest(&mut self, x: Var, factor: usize) -> Result<Var> {
        if factor < 1 {
            return Err(Error::Config("upsample factor must be at least 1".into()));
        }
        let t = self.value(x);
        let [n, c, h, w] = t.shape();
        let (ho, wo) = (h * factor, w * factor);
        let mut out = Vec::with_capacity(n * c * ho * wo);
        for plane in t.data().chunks(h * w) {
            for y in 0..ho {
                let row = &plane[(y / factor) * w..][..w];
                out.extend((0..wo).map(|x| row[x / factor]));
            }
        }
        let rg = self.any_grad(&[x]);
        Ok(self.push(Tensor4::new([n, c, ho, wo], out)?, Op::Upsample { x, factor }, rg))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        let t = self.value(x);
        let value = Tensor4::new(t.shape(), t.data().iter().map(|&v| kind.apply(v)).collect()).expect("same shape");
        let rg = self.any_grad(&[x]);
        self.push(value, Op::Act { x, kind }, rg)
    }

    /// Channel-axis concatenation.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3] {
            return Err(Error::Shape(format!("concat needs equal N, H, W: {sa:?} vs {sb:?}")));
        }
        let mut out = Vec::with_capacity(ta.len() + tb.len());
        for i in 0..sa[0] {
            out.extend_from_slice(ta.item(i));
            out.extend_from_slice(tb.item(i));
        }
        let value = Tensor4::new([sa[0], sa[1] + sb[1], sa[2], sa[3]], out)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Concat { a, b }, rg))
    }

    /// Mean absolute difference.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        same_shape(self.value(pred), self.value(target), "l1 loss")?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let diffs: Vec<f64> = p.iter().zip(t).map(|(a, b)| (a - b).abs()).collect();
        let v = par::pairwise_sum(&diffs) / p.len() as f64;
        finite_loss(v, "l1 loss")?;
        let rg = self.any_grad(&[pred, target]);
        Ok(self.push(Tensor4::scalar(v), Op::L1 { pred, target }, rg))
    }

    /// Mean binary cross-entropy of logits against all-ones (`real`) or all-zeros labels.
    pub fn bce_with_logits(&mut self, logits: Var, real: bool) -> Result<Var> {
        let y = if real { 1.0 } else { 0.0 };
        let x = self.value(logits).data();
        let terms: Vec<f64> = x.iter().map(|&x| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()).collect();
        let v = par::pairwise_sum(&terms) / x.len() as f64;
        finite_loss(v, "gan loss")?;
        let rg = self.any_grad(&[logits]);
        Ok(self.push(Tensor4::scalar(v), Op::Bce { logits, real }, rg))
    }

    /// Mean squared difference from a constant label.
    pub fn mse_to(&mut self, x: Var, target: f64) -> Result<Var> {
        let d = self.value(x).data();
        let terms: Vec<f64> = d.iter().map(|v| (v - target) * (v - target)).collect();
        let v = par::pairwise_sum(&terms) / d.len() as f64;
        finite_loss(v, "least-squares gan loss")?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(Tensor4::scalar(v), Op::Mse { x, target }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b), "add")?;
        let v: Vec<f64> = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let value = Tensor4::new(self.value(a).shape(), v)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let t = self.value(x);
        let value = Tensor4::new(t.shape(), t.data().iter().map(|v| v * s).collect()).expect("same shape");
        let rg = self.any_grad(&[x]);
        self.push(value, Op::Scale { x, s }, rg)
    }

    /// `sum_i weights[i] * x[i]`, a scalar.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<f64>) -> Result<Var> {
        let d = self.value(x).data();
        if d.len() != weights.len() {
            return Err(Error::Shape(format!("{} weights for {} values", weights.len(), d.len())));
        }
        let v = d.iter().zip(&weights).map(|(a, b)| a * b).sum();
        let rg = self.any_grad(&[x]);
        Ok(self.push(Tensor4::scalar(v), Op::WeightedSum { x, weights }, rg))
    }

    /// `w / (u^T W v)` with `W` the `(out, rest)` matrix view of `w` and
    /// fixed singular-vector estimates `u`, `v`. A spectral-norm estimate at
    /// or below the guard makes the output `w / eps`, i.e. zero for a zero weight.
    pub fn spectral_scale(&mut self, w: Var, u: Vec<f64>, v: Vec<f64>) -> Result<Var> {
        let t = self.value(w);
        let rows = t.n();
        let cols = t.len() / rows.max(1);
        if u.len() != rows || v.len() != cols {
            return Err(Error::Shape(format!("spectral vectors {}x{} for a {rows}x{cols} weight", u.len(), v.len())));
        }
        let sigma = matrix_sigma(t.data(), rows, cols, &u, &v);
        let denom = sigma.max(SPECTRAL_EPS);
        let value = Tensor4::new(t.shape(), t.data().iter().map(|x| x / denom).collect())?;
        let rg = self.any_grad(&[w]);
        Ok(self.push(value, Op::SpectralScale { w, u, v, sigma }, rg))
    }

    fn accumulate(&mut self, v: Var, g: Vec<f64>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(g),
        }
    }

    /// Backpropagates from the scalar `loss`, accumulating into existing grads.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!("backward needs a scalar, got {:?}", self.value(loss).shape())));
        }
        self.accumulate(loss, vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad || matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = self.grads[i].take() else { continue };
            self.backward_node(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn backward_node(&mut self, i: usize, g: &[f64]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            &Op::Conv { x, w, b, stride, pad } => {
                let xt = &self.nodes[x.0].value;
                let wt = &self.nodes[w.0].value;
                let ws = wt.shape();
                let (co, k) = (ws[0], ws[2]);
                let geom = ConvGeom { c: xt.c(), h: xt.h(), w: xt.w(), k, stride, pad, ho: node.value.h(), wo: node.value.w() };
                let need_x = self.nodes[x.0].requires_grad;
                let need_w = self.nodes[w.0].requires_grad;
                let per_out = co * geom.cols();
                let parts = par::map_range(xt.n(), |n| {
                    let go = &g[n * per_out..(n + 1) * per_out];
                    let cols = geom.im2col(xt.item(n));
                    let mut gw = Vec::new();
                    if need_w {
                        gw = vec![0.0; co * geom.rows()];
                        gemm(co, geom.cols(), geom.rows(), go, false, &cols, true, &mut gw, 0.0);
                    }
                    let gb: Vec<f64> = go.chunks(geom.cols()).map(|r| r.iter().sum()).collect();
                    let mut gx = Vec::new();
                    if need_x {
                        let mut gcols = vec![0.0; geom.rows() * geom.cols()];
                        gemm(geom.rows(), co, geom.cols(), wt.data(), true, go, false, &mut gcols, 0.0);
                        gx = vec![0.0; geom.c * geom.h * geom.w];
                        geom.col2im(&gcols, &mut gx);
                    }
                    (gw, gb, gx)
                });
                let mut gw_total = vec![0.0; wt.len()];
                let mut gb_total = vec![0.0; co];
                let mut gx_total = Vec::with_capacity(xt.len());
                for (gw, gb, gx) in parts {
                    if need_w {
                        gw_total.iter_mut().zip(&gw).for_each(|(a, b)| *a += b);
                    }
                    gb_total.iter_mut().zip(&gb).for_each(|(a, b)| *a += b);
                    gx_total.extend(gx);
                }
                if need_w {
                    self.accumulate(w, gw_total);
                }
                if let Some(b) = b {
                    self.accumulate(b, gb_total);
                }
                if need_x {
                    self.accumulate(x, gx_total);
                }
            }
            &Op::Upsample { x, factor } => {
                let [_, _, h, w] = self.nodes[x.0].value.shape();
                let (ho, wo) = (h * factor, w * factor);
                let mut gx = vec![0.0; self.nodes[x.0].value.len()];
                for (p, plane) in g.chunks(ho * wo).enumerate() {
                    let out = &mut gx[p * h * w..(p + 1) * h * w];
                    for y in 0..ho {
                        for xx in 0..wo {
                            out[(y / factor) * w + xx / factor] += plane[y * wo + xx];
                        }
                    }
                }
                self.accumulate(x, gx);
            }
            &Op::Act { x, kind } => {
                let xin = self.nodes[x.0].value.data();
                let y = node.value.data();
                let gx = g.iter().zip(xin.iter().zip(y)).map(|(g, (&a, &b))| g * kind.derivative(a, b)).collect();
                self.accumulate(x, gx);
            }
            &Op::Concat { a, b } => {
                let (la, lb) = (self.nodes[a.0].value.item(0).len(), self.nodes[b.0].value.item(0).len());
                let n = node.value.n();
                let mut ga = Vec::with_capacity(n * la);
                let mut gb = Vec::with_capacity(n * lb);
                for item in g.chunks(la + lb) {
                    ga.extend_from_slice(&item[..la]);
                    gb.extend_from_slice(&item[la..]);
                }
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            &Op::L1 { pred, target } => {
                let (p, t) = (self.nodes[pred.0].value.data(), self.nodes[target.0].value.data());
                let scale = g[0] / p.len() as f64;
                let gp: Vec<f64> = p.iter().zip(t).map(|(a, b)| scale * sign(a - b)).collect();
                let gt = gp.iter().map(|v| -v).collect();
                self.accumulate(pred, gp);
                self.accumulate(target, gt);
            }
            &Op::Bce { logits, real } => {
                let y = if real { 1.0 } else { 0.0 };
                let x = self.nodes[logits.0].value.data();
                let scale = g[0] / x.len() as f64;
                let gx = x.iter().map(|&v| scale * (sigmoid(v) - y)).collect();
                self.accumulate(logits, gx);
            }
            &Op::Mse { x, target } => {
                let d = self.nodes[x.0].value.data();
                let scale = 2.0 * g[0] / d.len() as f64;
                let gx = d.iter().map(|v| scale * (v - target)).collect();
                self.accumulate(x, gx);
            }
            &Op::Add { a, b } => {
                self.accumulate(a, g.to_vec());
                self.accumulate(b, g.to_vec());
            }
            &Op::Scale { x, s } => {
                let gx = g.iter().map(|v| v * s).collect();
                self.accumulate(x, gx);
            }
            Op::WeightedSum { x, weights } => {
                let gx = weights.iter().map(|w| w * g[0]).collect();
                let x = *x;
                self.accumulate(x, gx);
            }
            Op::SpectralScale { w, u, v, sigma } => {
                let wt = self.nodes[w.0].value.data();
                let gw = if *sigma > SPECTRAL_EPS {
                    let inner: f64 = g.iter().zip(wt).map(|(a, b)| a * b).sum();
                    let c = inner / (sigma * sigma);
                    let cols = v.len();
                    g.iter().enumerate().map(|(j, gv)| gv / sigma - c * u[j / cols] * v[j % cols]).collect()
                } else {
                    g.iter().map(|gv| gv / SPECTRAL_EPS).collect()
                };
                let w = *w;
                self.accumulate(w, gw);
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `u^T W v` for a row-major `rows x cols` matrix.
pub(crate) fn matrix_sigma(w: &[f64], rows: usize, cols: usize, u: &[f64], v: &[f64]) -> f64 {
    (0..rows).map(|r| u[r] * w[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum::<f64>()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_box_kernels() {
        let mut g = Graph::new();
        let x = g.constant(Tensor4::from_fn([2, 3, 4, 5], |i| i as f64 * 0.1 - 1.0));
        let eye = Tensor4::from_fn([3, 3, 1, 1], |i| if i / 3 == i % 3 { 1.0 } else { 0.0 });
        let w = g.constant(eye);
        let y = g.conv2d(x, w, None, 1, 0).unwrap();
        assert_eq!(g.value(y), g.value(x));

        let ones = g.constant(Tensor4::filled([1, 1, 3, 3], 1.0));
        let k = g.constant(Tensor4::filled([1, 1, 3, 3], 1.0));
        let y = g.conv2d(ones, k, None, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), &[9.0]);
    }

    #[test]
    fn conv_shape_formula_and_errors() {
        let mut g = Graph::new();
        let x = g.constant(Tensor4::zeros([1, 6, 64, 64]));
        let w = g.constant(Tensor4::zeros([16, 6, 4, 4]));
        let y = g.conv2d(x, w, None, 2, 1).unwrap();
        assert_eq!(g.value(y).shape(), [1, 16, 32, 32]);
        let bad = g.constant(Tensor4::zeros([16, 5, 4, 4]));
        let err = g.conv2d(x, bad, None, 2, 1).unwrap_err().to_string();
        assert!(err.contains("channels"), "{err}");
        let tiny = g.constant(Tensor4::zeros([1, 6, 2, 2]));
        assert!(g.conv2d(tiny, w, None, 1, 0).is_err());
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::LEAKY.apply(-1.0), -0.2);
        assert_eq!(Activation::Relu.apply(-3.0), 0.0);
        assert!(sigmoid(-800.0).is_finite() && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn upsample_values() {
        let mut g = Graph::new();
        let x = g.constant(Tensor4::scalar(2.5));
        let y = g.upsample_nearest(x, 2).unwrap();
        assert_eq!(g.value(y).data(), &[2.5; 4]);
        let y1 = g.upsample_nearest(x, 1).unwrap();
        assert_eq!(g.value(y1), g.value(x));
        assert!(g.upsample_nearest(x, 0).is_err());
    }

    #[test]
    fn loss_values() {
        let mut g = Graph::new();
        let a = g.constant(Tensor4::from_fn([1, 2, 3, 3], |i| i as f64));
        let b = g.constant(Tensor4::from_fn([1, 2, 3, 3], |i| i as f64 + 1.0));
        let same = g.l1_loss(a, a).unwrap();
        let one = g.l1_loss(b, a).unwrap();
        assert_eq!((g.value(same).item_value(), g.value(one).item_value()), (0.0, 1.0));

        let z = g.constant(Tensor4::zeros([1, 1, 2, 2]));
        for real in [true, false] {
            let l = g.bce_with_logits(z, real).unwrap();
            assert!((g.value(l).item_value() - std::f64::consts::LN_2).abs() < 1e-15);
        }
        let big = g.constant(Tensor4::filled([1, 1, 2, 2], 40.0));
        let l = g.bce_with_logits(big, true).unwrap();
        assert!(g.value(l).item_value() < 1e-15);
        let l = g.bce_with_logits(big, false).unwrap();
        assert!((g.value(l).item_value() - 40.0).abs() < 1e-12);
        let c = g.constant(Tensor4::zeros([1, 1, 2, 3]));
        assert!(g.l1_loss(a, c).is_err());
    }

    #[test]
    fn nan_loss_is_a_numerical_fault() {
        let mut g = Graph::new();
        let a = g.constant(Tensor4::filled([1, 1, 1, 2], f64::NAN));
        let b = g.constant(Tensor4::zeros([1, 1, 1, 2]));
        assert!(g.l1_loss(a, b).unwrap_err().is_numerical());
    }

    #[test]
    fn conv_is_schedule_independent() {
        let x = Tensor4::from_fn([3, 4, 9, 7], |i| ((i * 37) % 11) as f64 - 5.0);
        let w = Tensor4::from_fn([5, 4, 3, 3], |i| ((i * 13) % 7) as f64 * 0.1);
        let run = || {
            let mut g = Graph::new();
            let (xv, wv) = (g.param(x.clone()), g.param(w.clone()));
            let y = g.conv2d(xv, wv, None, 2, 1).unwrap();
            let n = g.value(y).len();
            let l = g.weighted_sum(y, (0..n).map(|i| (i % 5) as f64).collect()).unwrap();
            g.backward(l).unwrap();
            (g.value(y).clone(), g.grad(xv).unwrap().to_vec(), g.grad(wv).unwrap().to_vec())
        };
        assert_eq!(run(), par::sequential(run));
    }
}
