//! Differentiable primitives. Every backward rule is expressed with these
//! same primitives, which is what makes higher-order gradients work.

use std::sync::Arc;

use crate::kernels::{self, Conv2dGeometry};
use crate::var::Backward;
use crate::{Scalar, Tensor, Var};

fn need<T: Scalar>(flag: bool, f: impl FnOnce() -> Var<T>) -> Option<Var<T>> {
    flag.then(f)
}

// ---------------------------------------------------------------------------
// elementwise binary (equal shapes; broadcasting happens in the public API)

struct Add;
impl<T: Scalar> Backward<T> for Add {
    fn name(&self) -> &'static str {
        "add"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, needs: &[bool]) -> Vec<Option<Var<T>>> {
        vec![need(needs[0], || g.clone()), need(needs[1], || g.clone())]
    }
}

struct Sub;
impl<T: Scalar> Backward<T> for Sub {
    fn name(&self) -> &'static str {
        "sub"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, needs: &[bool]) -> Vec<Option<Var<T>>> {
        vec![need(needs[0], || g.clone()), need(needs[1], || g.neg())]
    }
}

struct Mul;
impl<T: Scalar> Backward<T> for Mul {
    fn name(&self) -> &'static str {
        "mul"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, needs: &[bool]) -> Vec<Option<Var<T>>> {
        vec![need(needs[0], || g.mul(&x[1])), need(needs[1], || g.mul(&x[0]))]
    }
}

struct Div;
impl<T: Scalar> Backward<T> for Div {
    fn name(&self) -> &'static str {
        "div"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, needs: &[bool]) -> Vec<Option<Var<T>>> {
        vec![
            need(needs[0], || g.div(&x[1])),
            need(needs[1], || g.mul(&x[0]).div(&x[1].square()).neg()),
        ]
    }
}

// ---------------------------------------------------------------------------
// elementwise unary

struct AddScalar;
impl<T: Scalar> Backward<T> for AddScalar {
    fn name(&self) -> &'static str {
        "add_scalar"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.clone())]
    }
}

struct MulScalar<T>(T);
impl<T: Scalar> Backward<T> for MulScalar<T> {
    fn name(&self) -> &'static str {
        "mul_scalar"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.mul_scalar(self.0))]
    }
}

struct PowScalar<T>(T);
impl<T: Scalar> Backward<T> for PowScalar<T> {
    fn name(&self) -> &'static str {
        "powf"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        let p = self.0;
        let local = if p == T::of(2.0) { x[0].mul_scalar(p) } else { x[0].powf(p - T::one()).mul_scalar(p) };
        vec![Some(g.mul(&local))]
    }
}

struct Exp;
impl<T: Scalar> Backward<T> for Exp {
    fn name(&self) -> &'static str {
        "exp"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.mul(&x[0].exp()))]
    }
}

struct Log;
impl<T: Scalar> Backward<T> for Log {
    fn name(&self) -> &'static str {
        "log"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.div(&x[0]))]
    }
}

struct Tanh;
impl<T: Scalar> Backward<T> for Tanh {
    fn name(&self) -> &'static str {
        "tanh"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        let t = x[0].tanh();
        vec![Some(g.mul(&t.square().neg().add_scalar(T::one())))]
    }
}

struct Sigmoid;
impl<T: Scalar> Backward<T> for Sigmoid {
    fn name(&self) -> &'static str {
        "sigmoid"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        let s = x[0].sigmoid();
        let ds = s.mul(&s.neg().add_scalar(T::one()));
        vec![Some(g.mul(&ds))]
    }
}

struct Softplus;
impl<T: Scalar> Backward<T> for Softplus {
    fn name(&self) -> &'static str {
        "softplus"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.mul(&x[0].sigmoid()))]
    }
}

/// Piecewise-linear ops: the local slope is a constant mask.
struct SlopeMask<T: Scalar> {
    name: &'static str,
    mask: Tensor<T>,
}
impl<T: Scalar> Backward<T> for SlopeMask<T> {
    fn name(&self) -> &'static str {
        self.name
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.mul(&Var::constant(self.mask.clone())))]
    }
}

// ---------------------------------------------------------------------------
// shape ops

struct Reshape(Vec<usize>);
impl<T: Scalar> Backward<T> for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.reshape(self.0.clone()))]
    }
}

struct Expand(Vec<usize>);
impl<T: Scalar> Backward<T> for Expand {
    fn name(&self) -> &'static str {
        "expand"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.sum_to(&self.0))]
    }
}

struct SumTo(Vec<usize>);
impl<T: Scalar> Backward<T> for SumTo {
    fn name(&self) -> &'static str {
        "sum_to"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.expand(&self.0))]
    }
}

struct Swap01;
impl<T: Scalar> Backward<T> for Swap01 {
    fn name(&self) -> &'static str {
        "swap01"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.swap01())]
    }
}

struct Narrow {
    axis: usize,
    start: usize,
    full: usize,
}
impl<T: Scalar> Backward<T> for Narrow {
    fn name(&self) -> &'static str {
        "narrow"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        let len = g.shape()[self.axis];
        vec![Some(g.pad(self.axis, self.start, self.full - self.start - len))]
    }
}

struct Pad {
    axis: usize,
    before: usize,
    len: usize,
}
impl<T: Scalar> Backward<T> for Pad {
    fn name(&self) -> &'static str {
        "pad"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.narrow(self.axis, self.before, self.len))]
    }
}

struct Concat {
    axis: usize,
    sizes: Vec<usize>,
}
impl<T: Scalar> Backward<T> for Concat {
    fn name(&self) -> &'static str {
        "concat"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, needs: &[bool]) -> Vec<Option<Var<T>>> {
        let mut start = 0;
        self.sizes
            .iter()
            .zip(needs)
            .map(|(&len, &n)| {
                let out = need(n, || g.narrow(self.axis, start, len));
                start += len;
                out
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// linear algebra and image ops

struct Matmul {
    ta: bool,
    tb: bool,
}
impl<T: Scalar> Backward<T> for Matmul {
    fn name(&self) -> &'static str {
        "matmul"
    }
    fn backward(&self, x: &[Var<T>], g: &Var<T>, needs: &[bool]) -> Vec<Option<Var<T>>> {
        let (a, b) = (&x[0], &x[1]);
        let (ta, tb) = (self.ta, self.tb);
        // C = op(A) op(B)
        let da = need(needs[0], || if ta { b.matmul_t(g, tb, true) } else { g.matmul_t(b, false, !tb) });
        let db = need(needs[1], || if tb { g.matmul_t(a, true, ta) } else { a.matmul_t(g, !ta, false) });
        vec![da, db]
    }
}

struct Im2Col(Conv2dGeometry);
impl<T: Scalar> Backward<T> for Im2Col {
    fn name(&self) -> &'static str {
        "im2col"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.col2im(self.0))]
    }
}

struct Col2Im(Conv2dGeometry);
impl<T: Scalar> Backward<T> for Col2Im {
    fn name(&self) -> &'static str {
        "col2im"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.im2col(self.0))]
    }
}

struct Gather {
    index: Arc<Vec<usize>>,
    src_shape: Vec<usize>,
}
impl<T: Scalar> Backward<T> for Gather {
    fn name(&self) -> &'static str {
        "gather"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.scatter_add(Arc::clone(&self.index), self.src_shape.clone()))]
    }
}

struct ScatterAdd {
    index: Arc<Vec<usize>>,
    src_shape: Vec<usize>,
}
impl<T: Scalar> Backward<T> for ScatterAdd {
    fn name(&self) -> &'static str {
        "scatter_add"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.gather(Arc::clone(&self.index), self.src_shape.clone()))]
    }
}

struct AvgPool {
    geom: Conv2dGeometry,
    include_pad: bool,
}
impl<T: Scalar> Backward<T> for AvgPool {
    fn name(&self) -> &'static str {
        "avg_pool2d"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        vec![Some(g.avg_pool2d_adjoint(self.geom, self.include_pad))]
    }
}

struct AvgPoolAdjoint {
    geom: Conv2dGeometry,
    include_pad: bool,
}
impl<T: Scalar> Backward<T> for AvgPoolAdjoint {
    fn name(&self) -> &'static str {
        "avg_pool2d_adjoint"
    }
    fn backward(&self, _: &[Var<T>], g: &Var<T>, _: &[bool]) -> Vec<Option<Var<T>>> {
        let geom = self.geom;
        vec![Some(g.avg_pool2d_raw(geom, self.include_pad))]
    }
}

// ---------------------------------------------------------------------------
// public API

fn unary<T: Scalar>(x: &Var<T>, op: impl Backward<T> + 'static, f: impl Fn(T) -> T) -> Var<T> {
    Var::from_op(x.value().map(f), op, vec![x.clone()])
}

impl<T: Scalar> Var<T> {
    fn binary(&self, other: &Var<T>, op: impl Backward<T> + 'static, f: impl Fn(T, T) -> T) -> Var<T> {
        if self.shape() == other.shape() {
            let v = self.value().zip_map(other.value(), f);
            return Var::from_op(v, op, vec![self.clone(), other.clone()]);
        }
        let shape = kernels::broadcast_shape(self.shape(), other.shape())
            .unwrap_or_else(|| panic!("cannot broadcast {:?} with {:?}", self.shape(), other.shape()));
        let a = self.expand(&shape);
        let b = other.expand(&shape);
        let v = a.value().zip_map(b.value(), f);
        Var::from_op(v, op, vec![a, b])
    }

    /// Elementwise sum with numpy broadcasting.
    pub fn add(&self, other: &Var<T>) -> Var<T> {
        self.binary(other, Add, |a, b| a + b)
    }

    pub fn sub(&self, other: &Var<T>) -> Var<T> {
        self.binary(other, Sub, |a, b| a - b)
    }

    pub fn mul(&self, other: &Var<T>) -> Var<T> {
        self.binary(other, Mul, |a, b| a * b)
    }

    pub fn div(&self, other: &Var<T>) -> Var<T> {
        self.binary(other, Div, |a, b| a / b)
    }

    pub fn add_scalar(&self, c: T) -> Var<T> {
        unary(self, AddScalar, move |x| x + c)
    }

    pub fn mul_scalar(&self, c: T) -> Var<T> {
        unary(self, MulScalar(c), move |x| x * c)
    }

    pub fn neg(&self) -> Var<T> {
        self.mul_scalar(-T::one())
    }

    pub fn powf(&self, p: T) -> Var<T> {
        if p == T::of(2.0) {
            return unary(self, PowScalar(p), |x| x * x);
        }
        unary(self, PowScalar(p), move |x| x.powf(p))
    }

    pub fn square(&self) -> Var<T> {
        self.powf(T::of(2.0))
    }

    pub fn sqrt(&self) -> Var<T> {
        unary(self, PowScalar(T::of(0.5)), |x| x.sqrt())
    }

    pub fn exp(&self) -> Var<T> {
        unary(self, Exp, |x| x.exp())
    }

    pub fn log(&self) -> Var<T> {
        unary(self, Log, |x| x.ln())
    }

    pub fn tanh(&self) -> Var<T> {
        unary(self, Tanh, |x| x.tanh())
    }

    pub fn sigmoid(&self) -> Var<T> {
        unary(self, Sigmoid, sigmoid)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&self) -> Var<T> {
        unary(self, Softplus, |x| if x > T::zero() { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() })
    }

    pub fn leaky_relu(&self, slope: T) -> Var<T> {
        let mask = self.value().map(|x| if x > T::zero() { T::one() } else { slope });
        let value = self.value().map(|x| if x > T::zero() { x } else { x * slope });
        Var::from_op(value, SlopeMask { name: "leaky_relu", mask }, vec![self.clone()])
    }

    pub fn relu(&self) -> Var<T> {
        self.leaky_relu(T::zero())
    }

    pub fn abs(&self) -> Var<T> {
        let mask = self.value().map(|x| if x < T::zero() { -T::one() } else { T::one() });
        let value = self.value().map(|x| x.abs());
        Var::from_op(value, SlopeMask { name: "abs", mask }, vec![self.clone()])
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Var<T> {
        let shape = shape.into();
        if shape.as_slice() == self.shape() {
            return self.clone();
        }
        Var::from_op(self.value().reshape(shape), Reshape(self.shape().to_vec()), vec![self.clone()])
    }

    /// Broadcast to a larger shape (materialized).
    pub fn expand(&self, shape: &[usize]) -> Var<T> {
        if shape == self.shape() {
            return self.clone();
        }
        let data = kernels::expand(self.value().data(), self.shape(), shape);
        Var::from_op(Tensor::new(shape.to_vec(), data), Expand(self.shape().to_vec()), vec![self.clone()])
    }

    /// Sum over broadcast axes down to `shape`; the adjoint of [`Var::expand`].
    pub fn sum_to(&self, shape: &[usize]) -> Var<T> {
        if shape == self.shape() {
            return self.clone();
        }
        let data = kernels::sum_to(self.value().data(), self.shape(), shape);
        Var::from_op(Tensor::new(shape.to_vec(), data), SumTo(self.shape().to_vec()), vec![self.clone()])
    }

    /// Sum of all entries, as a rank-0 tensor.
    pub fn sum(&self) -> Var<T> {
        self.sum_to(&[])
    }

    pub fn mean(&self) -> Var<T> {
        let n = self.numel().max(1);
        self.sum().mul_scalar(T::one() / T::of(n as f64))
    }

    /// `[a, b, c] -> [b, a, c]`
    pub fn swap01(&self) -> Var<T> {
        let s = self.shape();
        assert_eq!(s.len(), 3, "swap01 expects rank 3, got {s:?}");
        let (a, b, c) = (s[0], s[1], s[2]);
        let data = kernels::swap01(self.value().data(), a, b, c);
        Var::from_op(Tensor::new([b, a, c], data), Swap01, vec![self.clone()])
    }

    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Var<T> {
        let full = self.shape()[axis];
        if start == 0 && len == full {
            return self.clone();
        }
        let data = kernels::narrow(self.value().data(), self.shape(), axis, start, len);
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        Var::from_op(Tensor::new(shape, data), Narrow { axis, start, full }, vec![self.clone()])
    }

    /// Zero-pad along `axis`.
    pub fn pad(&self, axis: usize, before: usize, after: usize) -> Var<T> {
        if before == 0 && after == 0 {
            return self.clone();
        }
        let len = self.shape()[axis];
        let data = kernels::pad(self.value().data(), self.shape(), axis, before, after);
        let mut shape = self.shape().to_vec();
        shape[axis] = before + len + after;
        Var::from_op(Tensor::new(shape, data), Pad { axis, before, len }, vec![self.clone()])
    }

    pub fn concat(parts: &[Var<T>], axis: usize) -> Var<T> {
        assert!(!parts.is_empty(), "concat of nothing");
        if parts.len() == 1 {
            return parts[0].clone();
        }
        let first = parts[0].shape();
        let mut shape = first.to_vec();
        for p in &parts[1..] {
            let s = p.shape();
            assert!(
                s.len() == first.len() && s.iter().zip(first).enumerate().all(|(i, (a, b))| i == axis || a == b),
                "concat shape mismatch {first:?} vs {s:?} on axis {axis}"
            );
        }
        let sizes: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        shape[axis] = sizes.iter().sum();
        let (outer, _, inner) = kernels::split_at_axis(first, axis);
        let mut data = Vec::with_capacity(crate::tensor::numel(&shape));
        for o in 0..outer {
            for (p, &len) in parts.iter().zip(&sizes) {
                let s = o * len * inner;
                data.extend_from_slice(&p.value().data()[s..s + len * inner]);
            }
        }
        Var::from_op(Tensor::new(shape, data), Concat { axis, sizes }, parts.to_vec())
    }

    pub fn matmul(&self, other: &Var<T>) -> Var<T> {
        self.matmul_t(other, false, false)
    }

    /// `op(self) · op(other)` for rank-2 operands, with optional transposes.
    pub fn matmul_t(&self, other: &Var<T>, ta: bool, tb: bool) -> Var<T> {
        let (sa, sb) = (self.shape(), other.shape());
        assert!(sa.len() == 2 && sb.len() == 2, "matmul needs rank-2 operands, got {sa:?} and {sb:?}");
        let (m, k) = if ta { (sa[1], sa[0]) } else { (sa[0], sa[1]) };
        let (k2, n) = if tb { (sb[1], sb[0]) } else { (sb[0], sb[1]) };
        assert_eq!(k, k2, "matmul inner dims: {sa:?}{} x {sb:?}{}", if ta { "^T" } else { "" }, if tb { "^T" } else { "" });
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, self.value().data(), ta, other.value().data(), tb, T::zero(), &mut out);
        Var::from_op(Tensor::new([m, n], out), Matmul { ta, tb }, vec![self.clone(), other.clone()])
    }

    /// Unfold NCHW patches into `[C*kh*kw, B*OH*OW]` columns.
    pub fn im2col(&self, geom: Conv2dGeometry) -> Var<T> {
        assert_eq!(self.shape(), geom.image_shape(), "im2col geometry mismatch");
        let data = kernels::im2col(self.value().data(), &geom);
        Var::from_op(Tensor::new(geom.cols_shape(), data), Im2Col(geom), vec![self.clone()])
    }

    /// Fold columns back onto an NCHW image, summing overlaps.
    pub fn col2im(&self, geom: Conv2dGeometry) -> Var<T> {
        assert_eq!(self.shape(), geom.cols_shape(), "col2im geometry mismatch");
        let data = kernels::col2im(self.value().data(), &geom);
        Var::from_op(Tensor::new(geom.image_shape(), data), Col2Im(geom), vec![self.clone()])
    }

    /// `out[j] = self.flat[index[j]]`, reshaped to `out_shape`.
    pub fn gather(&self, index: Arc<Vec<usize>>, out_shape: Vec<usize>) -> Var<T> {
        assert_eq!(index.len(), crate::tensor::numel(&out_shape));
        let src = self.value().data();
        let data = index.iter().map(|&i| src[i]).collect();
        let src_shape = self.shape().to_vec();
        Var::from_op(Tensor::new(out_shape, data), Gather { index, src_shape }, vec![self.clone()])
    }

    /// Adjoint of [`Var::gather`]: `out.flat[index[j]] += self.flat[j]`.
    pub fn scatter_add(&self, index: Arc<Vec<usize>>, out_shape: Vec<usize>) -> Var<T> {
        assert_eq!(index.len(), self.numel());
        let mut data = vec![T::zero(); crate::tensor::numel(&out_shape)];
        for (&i, &v) in index.iter().zip(self.value().data()) {
            data[i] += v;
        }
        let src_shape = self.shape().to_vec();
        Var::from_op(Tensor::new(out_shape, data), ScatterAdd { index, src_shape }, vec![self.clone()])
    }

    pub fn max_pool2d(&self, kernel: (usize, usize), stride: (usize, usize), padding: (usize, usize)) -> Var<T> {
        let geom = Conv2dGeometry::from_shape(self.shape(), kernel, stride, padding);
        let (_, index) = kernels::max_pool2d(self.value().data(), &geom);
        self.gather(Arc::new(index), geom.pooled_shape().to_vec())
    }

    pub fn avg_pool2d(&self, kernel: (usize, usize), stride: (usize, usize), padding: (usize, usize), count_include_pad: bool) -> Var<T> {
        let geom = Conv2dGeometry::from_shape(self.shape(), kernel, stride, padding);
        self.avg_pool2d_raw(geom, count_include_pad)
    }

    fn avg_pool2d_raw(&self, geom: Conv2dGeometry, include_pad: bool) -> Var<T> {
        let data = kernels::avg_pool2d(self.value().data(), &geom, include_pad);
        Var::from_op(Tensor::new(geom.pooled_shape(), data), AvgPool { geom, include_pad }, vec![self.clone()])
    }

    fn avg_pool2d_adjoint(&self, geom: Conv2dGeometry, include_pad: bool) -> Var<T> {
        let data = kernels::avg_pool2d_adjoint(self.value().data(), &geom, include_pad);
        Var::from_op(Tensor::new(geom.image_shape(), data), AvgPoolAdjoint { geom, include_pad }, vec![self.clone()])
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
