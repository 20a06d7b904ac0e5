use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::conv::{self, ConvGeom};
use super::{conv_out_len, Scalar, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeom,
    },
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LogClamped(Var, f64),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine(Var, f64),
    Abs(Var),
    Sqrt(Var),
    Sum(Var),
    Mean(Var),
    Dot(Var, Var),
    Concat(Vec<Var>),
    Upsample {
        x: Var,
        factor: usize,
    },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

/// Recording of a differentiable computation.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// valid reverse topological order for [`backward`](Graph::backward).
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf. Gradients are accumulated for it only when
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Gradient of a leaf, or zeros when none was accumulated.
    pub fn grad_or_zeros(&self, v: Var) -> Vec<T> {
        match self.grad(v) {
            Some(g) => g.to_vec(),
            None => vec![T::zero(); self.value(v).numel()],
        }
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(T) -> T) -> Var {
        let src = &self.nodes[x.0].value;
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::from_vec(src.shape(), data).expect("same shape");
        self.push(value, op, &[x])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            let axis = sa
                .iter()
                .zip(sb)
                .position(|(x, y)| x != y)
                .unwrap_or(sa.len().min(sb.len()));
            return Err(Error::Dimension {
                op,
                axis: AXIS_NAMES.get(axis).copied().unwrap_or("rank"),
                expected: sa.get(axis).copied().unwrap_or(sa.len()),
                got: sb.get(axis).copied().unwrap_or(sb.len()),
            });
        }
        Ok(())
    }

    fn binary(&mut self, op_name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(T, T) -> T) -> Result<Var> {
        self.same_shape(op_name, a, b)?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_vec(va.shape(), data)?;
        Ok(self.push(value, op, &[a, b]))
    }

    /// 2-D cross-correlation of an `N×C×H×W` input with an `O×C×k×k` kernel
    /// and a length-`O` bias, zero padded by `pad` on every side.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let is = self.shape(input);
        let ks = self.shape(kernel);
        let bs = self.shape(bias);
        if is.len() != 4 {
            return Err(Error::Dimension { op: "conv2d", axis: "rank", expected: 4, got: is.len() });
        }
        if ks.len() != 4 {
            return Err(Error::Dimension { op: "conv2d", axis: "kernel rank", expected: 4, got: ks.len() });
        }
        if ks[1] != is[1] {
            return Err(Error::Dimension { op: "conv2d", axis: "channel", expected: ks[1], got: is[1] });
        }
        if ks[2] != ks[3] {
            return Err(Error::Dimension { op: "conv2d", axis: "kernel width", expected: ks[2], got: ks[3] });
        }
        if bs.len() != 1 || bs[0] != ks[0] {
            return Err(Error::Dimension { op: "conv2d", axis: "bias", expected: ks[0], got: bs[0] });
        }
        if stride == 0 {
            return Err(Error::Config("conv2d stride must be >= 1".into()));
        }
        let (n, c_in, h, w) = (is[0], is[1], is[2], is[3]);
        let (c_out, k) = (ks[0], ks[2]);
        let oh = conv_out_len(h, k, stride, pad);
        let ow = conv_out_len(w, k, stride, pad);
        let (oh, ow) = match (oh, ow) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Config(format!(
                    "conv2d output empty for {h}x{w} input, kernel {k}, stride {stride}, pad {pad}"
                )))
            }
        };
        let geom = ConvGeom { n, c_in, h, w, c_out, k, stride, pad, oh, ow };
        let mut out = vec![T::zero(); n * c_out * oh * ow];
        conv::forward(
            &geom,
            self.value(input).data(),
            self.value(kernel).data(),
            self.value(bias).data(),
            &mut out,
        );
        let value = Tensor::from_vec(&[n, c_out, oh, ow], out)?;
        Ok(self.push(value, Op::Conv2d { input, kernel, bias, geom }, &[input, kernel, bias]))
    }

    /// `x` for `x >= 0`, `slope * x` otherwise.
    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::lit(slope);
        self.unary(x, Op::LeakyRelu(x, slope), |v| if v >= T::zero() { v } else { s * v })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), |v| {
            // split by sign so exp never overflows
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        })
    }

    /// Softmax along `axis`, computed with max subtraction.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Dimension { op: "softmax", axis: "axis", expected: shape.len(), got: axis });
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut mx = T::neg_infinity();
                for c in 0..len {
                    mx = mx.max(src[base + c * inner]);
                }
                let mut sum = T::zero();
                for c in 0..len {
                    let e = (src[base + c * inner] - mx).exp();
                    out[base + c * inner] = e;
                    sum += e;
                }
                for c in 0..len {
                    out[base + c * inner] /= sum;
                }
            }
        }
        let value = Tensor::from_vec(&shape, out)?;
        Ok(self.push(value, Op::Softmax { x, outer, len, inner }, &[x]))
    }

    /// `log(max(x, eps))`.
    pub fn log_clamped(&mut self, x: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 || eps.is_nan() {
            return Err(Error::Config(format!("log clamp eps must be > 0, got {eps}")));
        }
        let e = T::lit(eps);
        Ok(self.unary(x, Op::LogClamped(x, eps), |v| v.max(e).ln()))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, Op::Div(a, b), |x, y| x / y)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let (s, t) = (T::lit(scale), T::lit(shift));
        self.unary(x, Op::Affine(x, scale), |v| s * v + t)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.affine(x, factor, 0.0)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Op::Abs(x), |v| v.abs())
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sqrt(x), |v| v.sqrt())
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |a, &b| a + b);
        self.push(Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().fold(T::zero(), |a, &b| a + b) / T::lit(v.numel() as f64);
        self.push(Tensor::scalar(s), Op::Mean(x), &[x])
    }

    /// Inner product of two tensors with equal element counts.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.numel() != vb.numel() {
            return Err(Error::Dimension { op: "dot", axis: "numel", expected: va.numel(), got: vb.numel() });
        }
        let s = va.data().iter().zip(vb.data()).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b), &[a, b]))
    }

    /// Flattens and concatenates the inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Usage("concat of zero tensors".into()));
        }
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.value(*p).data());
        }
        let value = Tensor::from_vec(&[data.len()], data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec()), parts))
    }

    /// Nearest-neighbour upsampling of the two trailing axes of an
    /// `N×C×H×W` tensor by an integer factor.
    pub fn upsample_nearest(&mut self, x: Var, factor: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 {
            return Err(Error::Dimension { op: "upsample", axis: "rank", expected: 4, got: s.len() });
        }
        if factor == 0 {
            return Err(Error::Config("upsample factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(x);
        }
        let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
        let (oh, ow) = (h * factor, w * factor);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); planes * oh * ow];
        for p in 0..planes {
            for y in 0..oh {
                let srow = &src[p * h * w + (y / factor) * w..][..w];
                let drow = &mut out[p * oh * ow + y * ow..][..ow];
                for (xo, d) in drow.iter_mut().enumerate() {
                    *d = srow[xo / factor];
                }
            }
        }
        let value = Tensor::from_vec(&[s[0], s[1], oh, ow], out)?;
        Ok(self.push(value, Op::Upsample { x, factor }, &[x]))
    }

    /// Reverse pass from a one-element `loss`. Leaf gradients accumulate
    /// across calls until [`zero_grad`](Graph::zero_grad).
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        for (i, g) in grads.into_iter().enumerate() {
            let node = &mut self.nodes[i];
            if let (Op::Leaf, true, Some(g)) = (&node.op, node.requires_grad, g) {
                match node.grad.as_mut() {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                    None => node.grad = Some(g),
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| nodes[v.0].value.data();
        let wants = |v: Var| nodes[v.0].requires_grad;
        fn slot<'a, T: Scalar>(grads: &'a mut [Option<Vec<T>>], v: Var, len: usize) -> &'a mut [T] {
            grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
        }
        let out = nodes[i].value.data();
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, bias, geom } => {
                let (input, kernel, bias) = (*input, *kernel, *bias);
                let mut gin = wants(input).then(|| grads[input.0].take().unwrap_or_else(|| vec![T::zero(); val(input).len()]));
                let mut gk = wants(kernel).then(|| grads[kernel.0].take().unwrap_or_else(|| vec![T::zero(); val(kernel).len()]));
                let mut gb = wants(bias).then(|| grads[bias.0].take().unwrap_or_else(|| vec![T::zero(); val(bias).len()]));
                conv::backward(
                    geom,
                    val(input),
                    val(kernel),
                    g,
                    gin.as_deref_mut(),
                    gk.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                if let Some(v) = gin {
                    grads[input.0] = Some(v);
                }
                if let Some(v) = gk {
                    grads[kernel.0] = Some(v);
                }
                if let Some(v) = gb {
                    grads[bias.0] = Some(v);
                }
            }
            Op::LeakyRelu(x, slope) => {
                let s = T::lit(*slope);
                let xv = val(*x);
                let dst = slot(grads, *x, xv.len());
                for ((d, &gi), &xi) in dst.iter_mut().zip(g).zip(xv) {
                    *d += if xi >= T::zero() { gi } else { s * gi };
                }
            }
            Op::Sigmoid(x) => {
                let dst = slot(grads, *x, out.len());
                for ((d, &gi), &y) in dst.iter_mut().zip(g).zip(out) {
                    *d += gi * y * (T::one() - y);
                }
            }
            Op::Softmax { x, outer, len, inner } => {
                let dst = slot(grads, *x, out.len());
                for o in 0..*outer {
                    for j in 0..*inner {
                        let base = o * len * inner + j;
                        let mut dotp = T::zero();
                        for c in 0..*len {
                            let k = base + c * inner;
                            dotp += g[k] * out[k];
                        }
                        for c in 0..*len {
                            let k = base + c * inner;
                            dst[k] += out[k] * (g[k] - dotp);
                        }
                    }
                }
            }
            Op::LogClamped(x, eps) => {
                let e = T::lit(*eps);
                let xv = val(*x);
                let dst = slot(grads, *x, xv.len());
                for ((d, &gi), &xi) in dst.iter_mut().zip(g).zip(xv) {
                    if xi > e {
                        *d += gi / xi;
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(nodes[i].op, Op::Sub(..)) { -T::one() } else { T::one() };
                if wants(*a) {
                    let dst = slot(grads, *a, g.len());
                    dst.iter_mut().zip(g).for_each(|(d, &gi)| *d += gi);
                }
                if wants(*b) {
                    let dst = slot(grads, *b, g.len());
                    dst.iter_mut().zip(g).for_each(|(d, &gi)| *d += sign * gi);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if wants(*a) {
                    let dst = slot(grads, *a, g.len());
                    for ((d, &gi), &y) in dst.iter_mut().zip(g).zip(bv) {
                        *d += gi * y;
                    }
                }
                if wants(*b) {
                    let dst = slot(grads, *b, g.len());
                    for ((d, &gi), &x) in dst.iter_mut().zip(g).zip(av) {
                        *d += gi * x;
                    }
                }
            }
            Op::Div(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if wants(*a) {
                    let dst = slot(grads, *a, g.len());
                    for ((d, &gi), &y) in dst.iter_mut().zip(g).zip(bv) {
                        *d += gi / y;
                    }
                }
                if wants(*b) {
                    let dst = slot(grads, *b, g.len());
                    for (((d, &gi), &x), &y) in dst.iter_mut().zip(g).zip(av).zip(bv) {
                        *d -= gi * x / (y * y);
                    }
                }
            }
            Op::Affine(x, scale) => {
                let s = T::lit(*scale);
                let dst = slot(grads, *x, g.len());
                dst.iter_mut().zip(g).for_each(|(d, &gi)| *d += s * gi);
            }
            Op::Abs(x) => {
                let xv = val(*x);
                let dst = slot(grads, *x, g.len());
                for ((d, &gi), &xi) in dst.iter_mut().zip(g).zip(xv) {
                    if xi > T::zero() {
                        *d += gi;
                    } else if xi < T::zero() {
                        *d -= gi;
                    }
                }
            }
            Op::Sqrt(x) => {
                let dst = slot(grads, *x, g.len());
                for ((d, &gi), &y) in dst.iter_mut().zip(g).zip(out) {
                    if y > T::zero() {
                        *d += gi / (T::lit(2.0) * y);
                    }
                }
            }
            Op::Sum(x) => {
                let n = val(*x).len();
                let dst = slot(grads, *x, n);
                dst.iter_mut().for_each(|d| *d += g[0]);
            }
            Op::Mean(x) => {
                let n = val(*x).len();
                let gi = g[0] / T::lit(n as f64);
                let dst = slot(grads, *x, n);
                dst.iter_mut().for_each(|d| *d += gi);
            }
            Op::Dot(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if wants(*a) {
                    let dst = slot(grads, *a, av.len());
                    dst.iter_mut().zip(bv).for_each(|(d, &y)| *d += g[0] * y);
                }
                if wants(*b) {
                    let dst = slot(grads, *b, bv.len());
                    dst.iter_mut().zip(av).for_each(|(d, &x)| *d += g[0] * x);
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = val(*p).len();
                    if wants(*p) {
                        let dst = slot(grads, *p, n);
                        dst.iter_mut().zip(&g[off..off + n]).for_each(|(d, &gi)| *d += gi);
                    }
                    off += n;
                }
            }
            Op::Upsample { x, factor } => {
                let s = nodes[x.0].value.shape();
                let (planes, h, w) = (s[0] * s[1], s[2], s[3]);
                let (oh, ow) = (h * factor, w * factor);
                let dst = slot(grads, *x, planes * h * w);
                for p in 0..planes {
                    for y in 0..oh {
                        let grow = &g[p * oh * ow + y * ow..][..ow];
                        let drow = &mut dst[p * h * w + (y / factor) * w..][..w];
                        for (xo, &gi) in grow.iter().enumerate() {
                            drow[xo / factor] += gi;
                        }
                    }
                }
            }
        }
    }
}

const AXIS_NAMES: [&str; 4] = ["batch", "channel", "height", "width"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::{prop_assert, proptest};
    use rand::Rng as _;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    /// Six nested loops, no index-range tricks.
    fn conv_reference(x: &Tensor<f64>, k: &Tensor<f64>, b: &[f64], stride: usize, pad: usize) -> Vec<f64> {
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (o, ks) = (k.shape()[0], k.shape()[2]);
        let oh = (h + 2 * pad - ks) / stride + 1;
        let ow = (w + 2 * pad - ks) / stride + 1;
        let mut out = vec![0.0; n * o * oh * ow];
        for bi in 0..n {
            for oc in 0..o {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b[oc];
                        for ic in 0..c {
                            for ky in 0..ks {
                                for kx in 0..ks {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    let xv = x.data()[((bi * c + ic) * h + iy as usize) * w + ix as usize];
                                    acc += xv * k.data()[((oc * c + ic) * ks + ky) * ks + kx];
                                }
                            }
                        }
                        out[((bi * o + oc) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    fn random(r: &mut rng::Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut r = rng::stream(3, 0);
        for (xs, ks, stride, pad) in [
            ([2, 3, 5, 5], [4, 3, 3, 3], 1, 0),
            ([2, 3, 5, 5], [4, 3, 3, 3], 1, 1),
            ([1, 2, 7, 6], [3, 2, 4, 4], 2, 2),
            ([1, 1, 4, 4], [2, 1, 1, 1], 3, 0),
        ] {
            let x = random(&mut r, &xs);
            let k = random(&mut r, &ks);
            let b = random(&mut r, &[ks[0]]);
            let mut g = Graph::new();
            let (xv, kv, bv) = (g.constant(x.clone()), g.constant(k.clone()), g.constant(b.clone()));
            let y = g.conv2d(xv, kv, bv, stride, pad).unwrap();
            let want = conv_reference(&x, &k, b.data(), stride, pad);
            assert_eq!(g.value(y).numel(), want.len());
            for (a, e) in g.value(y).data().iter().zip(&want) {
                assert!((a - e).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn conv_identity_and_box() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1, 2, 3], &[1.0, -2.0, 3.0, 4.0, 5.0, -6.0]));
        let k = g.constant(t(&[1, 1, 1, 1], &[1.0]));
        let b = g.constant(t(&[1], &[0.0]));
        let y = g.conv2d(x, k, b, 1, 0).unwrap();
        assert_eq!(g.value(y), g.value(x));
        let c = g.constant(Tensor::full(&[1, 1, 4, 4], 0.5));
        let k = g.constant(Tensor::full(&[1, 1, 3, 3], 1.0));
        let y = g.conv2d(c, k, b, 1, 0).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 4.5));
    }

    #[test]
    fn conv_errors() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::<f64>::zeros(&[1, 2, 3, 3]));
        let k = g.constant(Tensor::zeros(&[1, 3, 3, 3]));
        let b = g.constant(Tensor::zeros(&[1]));
        assert!(matches!(g.conv2d(x, k, b, 1, 0), Err(Error::Dimension { axis: "channel", .. })));
        let k = g.constant(Tensor::zeros(&[1, 2, 5, 5]));
        assert!(matches!(g.conv2d(x, k, b, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn activation_examples() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[-1.0, 3.0]));
        let y = g.leaky_relu(x, 0.2);
        assert_eq!(g.value(y).data(), &[-0.2, 3.0]);
        let z = g.constant(Tensor::full(&[1, 4, 1, 1], 0.7));
        let s = g.softmax(z, 1).unwrap();
        assert!(g.value(s).data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let z = g.constant(t(&[3], &[1.7, 0.3, -2.1]));
        let s = g.softmax(z, 0).unwrap();
        let want = [0.7880421005119741, 0.1943287894444191, 0.01762911004360689];
        for (a, e) in g.value(s).data().iter().zip(want) {
            assert!((a - e).abs() < 1e-6);
        }
        assert!(matches!(g.softmax(z, 1), Err(Error::Dimension { .. })));
        let big = g.constant(t(&[3], &[-800.0, 0.0, 800.0]));
        let sg = g.sigmoid(big);
        let v = g.value(sg).data();
        assert!(v[0] >= 0.0 && v[0] < 1e-300 && v[1] == 0.5 && v[2] == 1.0);
        assert!(g.log_clamped(x, 0.0).is_err());
        let l = g.log_clamped(x, 1e-7).unwrap();
        assert!((g.value(l).data()[0] - (1e-7f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn backward_examples() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1], &[3.0]), true);
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[12.0]);
        g.zero_grad();
        assert!(g.grad(x).is_none() || g.grad(x).unwrap() == [0.0]);

        let mut g = Graph::new();
        let x = g.leaf(Tensor::full(&[5], 2.0f64), true);
        let m = g.mean(x);
        g.backward(m).unwrap();
        assert!(g.grad(x).unwrap().iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert!(matches!(g.backward(x), Err(Error::Usage(_))));
    }

    #[test]
    fn frozen_leaves_get_no_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2], &[1.0, 2.0]), true);
        let b = g.leaf(t(&[2], &[3.0, 4.0]), false);
        let d = g.dot(a, b).unwrap();
        g.backward(d).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[3.0, 4.0]);
        assert!(g.grad(b).is_none());
    }

    #[test]
    fn forward_is_bitwise_deterministic_in_f32() {
        let run = || {
            let mut r = rng::stream(11, 0);
            let x: Tensor<f32> = random(&mut r, &[1, 3, 8, 8]).cast();
            let k: Tensor<f32> = random(&mut r, &[4, 3, 3, 3]).cast();
            let mut g = Graph::new();
            let (xv, kv, bv) = (g.constant(x), g.constant(k), g.constant(Tensor::zeros(&[4])));
            let y = g.conv2d(xv, kv, bv, 2, 1).unwrap();
            let s = g.softmax(y, 1).unwrap();
            g.value(s).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn softmax_and_sigmoid_ranges(seed in 0u64..1000) {
            let mut r = rng::stream(seed, 0);
            let x: Tensor<f64> = Tensor::from_vec(&[2, 5, 3, 3], (0..90).map(|_| r.gen_range(-30.0..30.0)).collect()).unwrap();
            let mut g = Graph::new();
            let xv = g.constant(x);
            let s = g.softmax(xv, 1).unwrap();
            let v = g.value(s).data();
            for b in 0..2 {
                for px in 0..9 {
                    let sum: f64 = (0..5).map(|c| v[(b * 5 + c) * 9 + px]).sum();
                    prop_assert!((sum - 1.0).abs() < 1e-6);
                }
            }
            let small = g.scale(xv, 0.1);
            let sg = g.sigmoid(small);
            prop_assert!(g.value(sg).data().iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }
}
