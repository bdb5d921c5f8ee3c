//! Raw array kernels behind the differentiable ops. All of them are plain
//! loops over contiguous row-major buffers and run in a fixed order, so the
//! results are bit-reproducible.

use crate::tensor::numel;
use crate::Scalar;

/// Numpy-style broadcast of two shapes (right-aligned), or `None` when
/// incompatible.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `small` laid against the dimensions of `big`, with zero stride
/// on broadcast axes. Panics if `small` is not broadcastable to `big`.
fn aligned_strides(small: &[usize], big: &[usize]) -> Vec<usize> {
    assert!(small.len() <= big.len(), "cannot broadcast {small:?} to {big:?}");
    let offset = big.len() - small.len();
    let mut strides = vec![0; big.len()];
    let mut acc = 1;
    for i in (0..small.len()).rev() {
        let d = small[i];
        let bd = big[i + offset];
        assert!(d == bd || d == 1, "cannot broadcast {small:?} to {big:?}");
        strides[i + offset] = if d == 1 && bd != 1 { 0 } else { acc };
        acc *= d;
    }
    strides
}

/// Walk every multi-index of `shape` except the last axis, calling
/// `f(offset_in_small, offset_in_big)` for the start of each innermost row.
fn for_each_row(big: &[usize], strides: &[usize], mut f: impl FnMut(usize, usize)) {
    if big.is_empty() {
        f(0, 0);
        return;
    }
    let rank = big.len();
    let inner = big[rank - 1];
    let rows = if inner == 0 { 0 } else { numel(big) / inner };
    let mut idx = vec![0usize; rank - 1];
    let mut small_off = 0usize;
    for row in 0..rows {
        f(small_off, row * inner);
        // odometer increment over leading axes
        for ax in (0..rank - 1).rev() {
            idx[ax] += 1;
            small_off += strides[ax];
            if idx[ax] < big[ax] {
                break;
            }
            small_off -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
}

/// Materialize `src` (shape `small`) broadcast to `big`.
pub fn expand<T: Scalar>(src: &[T], small: &[usize], big: &[usize]) -> Vec<T> {
    let strides = aligned_strides(small, big);
    let n = numel(big);
    let mut out = vec![T::zero(); n];
    if n == 0 {
        return out;
    }
    let inner = big.last().copied().unwrap_or(1);
    let inner_stride = strides.last().copied().unwrap_or(0);
    for_each_row(big, &strides, |s, o| {
        let dst = &mut out[o..o + inner];
        if inner_stride == 0 {
            dst.fill(src[s]);
        } else {
            dst.copy_from_slice(&src[s..s + inner]);
        }
    });
    out
}

/// Sum `src` (shape `big`) down to `small`; the adjoint of [`expand`].
pub fn sum_to<T: Scalar>(src: &[T], big: &[usize], small: &[usize]) -> Vec<T> {
    let strides = aligned_strides(small, big);
    let mut out = vec![T::zero(); numel(small)];
    if src.is_empty() {
        return out;
    }
    let inner = big.last().copied().unwrap_or(1);
    let inner_stride = strides.last().copied().unwrap_or(0);
    for_each_row(big, &strides, |s, o| {
        let row = &src[o..o + inner];
        if inner_stride == 0 {
            let mut acc = out[s];
            for &v in row {
                acc += v;
            }
            out[s] = acc;
        } else {
            for (d, &v) in out[s..s + inner].iter_mut().zip(row) {
                *d += v;
            }
        }
    });
    out
}

/// `[a, b, c] -> [b, a, c]`.
pub fn swap01<T: Scalar>(src: &[T], a: usize, b: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); a * b * c];
    for i in 0..a {
        for j in 0..b {
            let s = (i * b + j) * c;
            let d = (j * a + i) * c;
            out[d..d + c].copy_from_slice(&src[s..s + c]);
        }
    }
    out
}

/// View of a shape as `[outer, axis, inner]` around `axis`.
pub fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = numel(&shape[..axis]);
    let inner = numel(&shape[axis + 1..]);
    (outer, shape[axis], inner)
}

pub fn narrow<T: Scalar>(src: &[T], shape: &[usize], axis: usize, start: usize, len: usize) -> Vec<T> {
    let (outer, n, inner) = split_at_axis(shape, axis);
    assert!(start + len <= n, "narrow {start}+{len} exceeds axis size {n}");
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let s = (o * n + start) * inner;
        out.extend_from_slice(&src[s..s + len * inner]);
    }
    out
}

pub fn pad<T: Scalar>(src: &[T], shape: &[usize], axis: usize, before: usize, after: usize) -> Vec<T> {
    let (outer, n, inner) = split_at_axis(shape, axis);
    let total = before + n + after;
    let mut out = vec![T::zero(); outer * total * inner];
    for o in 0..outer {
        let s = o * n * inner;
        let d = (o * total + before) * inner;
        out[d..d + n * inner].copy_from_slice(&src[s..s + n * inner]);
    }
    out
}

/// Geometry of a 2-D convolution / pooling window over an NCHW image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeometry {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl Conv2dGeometry {
    pub fn from_shape(shape: &[usize], kernel: (usize, usize), stride: (usize, usize), padding: (usize, usize)) -> Self {
        assert_eq!(shape.len(), 4, "expected NCHW input, got {shape:?}");
        assert!(kernel.0 > 0 && kernel.1 > 0 && stride.0 > 0 && stride.1 > 0);
        Self { batch: shape[0], channels: shape[1], height: shape[2], width: shape[3], kernel, stride, padding }
    }

    pub fn out_h(&self) -> usize {
        let padded = self.height + 2 * self.padding.0;
        assert!(padded >= self.kernel.0, "kernel taller than padded input");
        (padded - self.kernel.0) / self.stride.0 + 1
    }

    pub fn out_w(&self) -> usize {
        let padded = self.width + 2 * self.padding.1;
        assert!(padded >= self.kernel.1, "kernel wider than padded input");
        (padded - self.kernel.1) / self.stride.1 + 1
    }

    pub fn image_shape(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }

    /// `[C*kh*kw, B*OH*OW]`
    pub fn cols_shape(&self) -> [usize; 2] {
        [self.channels * self.kernel.0 * self.kernel.1, self.batch * self.out_h() * self.out_w()]
    }

    pub fn pooled_shape(&self) -> [usize; 4] {
        [self.batch, self.channels, self.out_h(), self.out_w()]
    }

    /// Input coordinate hit by output position `o` and kernel tap `k` on one
    /// axis, if it falls inside the image.
    #[inline]
    fn tap(o: usize, k: usize, stride: usize, pad: usize, size: usize) -> Option<usize> {
        let pos = (o * stride + k) as isize - pad as isize;
        (pos >= 0 && (pos as usize) < size).then_some(pos as usize)
    }
}

pub fn im2col<T: Scalar>(src: &[T], g: &Conv2dGeometry) -> Vec<T> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (kh, kw) = g.kernel;
    let l = oh * ow;
    let cols = g.batch * l;
    let mut out = vec![T::zero(); g.channels * kh * kw * cols];
    for c in 0..g.channels {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (c * kh + ki) * kw + kj;
                let row_base = row * cols;
                for b in 0..g.batch {
                    let img = (b * g.channels + c) * g.height * g.width;
                    for y in 0..oh {
                        let Some(iy) = Conv2dGeometry::tap(y, ki, g.stride.0, g.padding.0, g.height) else {
                            continue;
                        };
                        let dst = row_base + b * l + y * ow;
                        let src_row = img + iy * g.width;
                        for x in 0..ow {
                            if let Some(ix) = Conv2dGeometry::tap(x, kj, g.stride.1, g.padding.1, g.width) {
                                out[dst + x] = src[src_row + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Scatter-add columns back onto the image; the adjoint of [`im2col`].
pub fn col2im<T: Scalar>(cols_data: &[T], g: &Conv2dGeometry) -> Vec<T> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (kh, kw) = g.kernel;
    let l = oh * ow;
    let cols = g.batch * l;
    let mut out = vec![T::zero(); numel(&g.image_shape())];
    for c in 0..g.channels {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (c * kh + ki) * kw + kj;
                let row_base = row * cols;
                for b in 0..g.batch {
                    let img = (b * g.channels + c) * g.height * g.width;
                    for y in 0..oh {
                        let Some(iy) = Conv2dGeometry::tap(y, ki, g.stride.0, g.padding.0, g.height) else {
                            continue;
                        };
                        let s = row_base + b * l + y * ow;
                        let dst_row = img + iy * g.width;
                        for x in 0..ow {
                            if let Some(ix) = Conv2dGeometry::tap(x, kj, g.stride.1, g.padding.1, g.width) {
                                out[dst_row + ix] += cols_data[s + x];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Max pooling; returns the pooled values and, for each output, the flat
/// input index it was taken from. Padded taps never win.
pub fn max_pool2d<T: Scalar>(src: &[T], g: &Conv2dGeometry) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let n = g.batch * g.channels * oh * ow;
    let mut vals = Vec::with_capacity(n);
    let mut idx = Vec::with_capacity(n);
    for plane in 0..g.batch * g.channels {
        let base = plane * g.height * g.width;
        for y in 0..oh {
            for x in 0..ow {
                let mut best: Option<(T, usize)> = None;
                for ki in 0..g.kernel.0 {
                    let Some(iy) = Conv2dGeometry::tap(y, ki, g.stride.0, g.padding.0, g.height) else { continue };
                    for kj in 0..g.kernel.1 {
                        let Some(ix) = Conv2dGeometry::tap(x, kj, g.stride.1, g.padding.1, g.width) else { continue };
                        let at = base + iy * g.width + ix;
                        let v = src[at];
                        if best.map_or(true, |(b, _)| v > b) {
                            best = Some((v, at));
                        }
                    }
                }
                let (v, at) = best.expect("pool window covers at least one input pixel");
                vals.push(v);
                idx.push(at);
            }
        }
    }
    (vals, idx)
}

/// Number of in-image taps of each output window, or the full window size
/// when padding counts toward the divisor.
fn window_counts(g: &Conv2dGeometry, count_include_pad: bool) -> Vec<usize> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let full = g.kernel.0 * g.kernel.1;
    let mut counts = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        let ny = (0..g.kernel.0).filter(|&k| Conv2dGeometry::tap(y, k, g.stride.0, g.padding.0, g.height).is_some()).count();
        for x in 0..ow {
            let nx = (0..g.kernel.1).filter(|&k| Conv2dGeometry::tap(x, k, g.stride.1, g.padding.1, g.width).is_some()).count();
            counts.push(if count_include_pad { full } else { ny * nx });
        }
    }
    counts
}

pub fn avg_pool2d<T: Scalar>(src: &[T], g: &Conv2dGeometry, count_include_pad: bool) -> Vec<T> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let counts = window_counts(g, count_include_pad);
    let mut out = Vec::with_capacity(g.batch * g.channels * oh * ow);
    for plane in 0..g.batch * g.channels {
        let base = plane * g.height * g.width;
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = T::zero();
                for ki in 0..g.kernel.0 {
                    let Some(iy) = Conv2dGeometry::tap(y, ki, g.stride.0, g.padding.0, g.height) else { continue };
                    for kj in 0..g.kernel.1 {
                        let Some(ix) = Conv2dGeometry::tap(x, kj, g.stride.1, g.padding.1, g.width) else { continue };
                        acc += src[base + iy * g.width + ix];
                    }
                }
                out.push(acc / T::of(counts[y * ow + x] as f64));
            }
        }
    }
    out
}

/// Adjoint of [`avg_pool2d`]: spread each output gradient over its window.
pub fn avg_pool2d_adjoint<T: Scalar>(grad: &[T], g: &Conv2dGeometry, count_include_pad: bool) -> Vec<T> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let counts = window_counts(g, count_include_pad);
    let mut out = vec![T::zero(); numel(&g.image_shape())];
    for plane in 0..g.batch * g.channels {
        let base = plane * g.height * g.width;
        let gbase = plane * oh * ow;
        for y in 0..oh {
            for x in 0..ow {
                let v = grad[gbase + y * ow + x] / T::of(counts[y * ow + x] as f64);
                for ki in 0..g.kernel.0 {
                    let Some(iy) = Conv2dGeometry::tap(y, ki, g.stride.0, g.padding.0, g.height) else { continue };
                    for kj in 0..g.kernel.1 {
                        let Some(ix) = Conv2dGeometry::tap(x, kj, g.stride.1, g.padding.1, g.width) else { continue };
                        out[base + iy * g.width + ix] += v;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_rules() {
        assert_eq!(broadcast_shape(&[2, 1, 4], &[3, 1]), Some(vec![2, 3, 4]));
        assert_eq!(broadcast_shape(&[], &[5]), Some(vec![5]));
        assert_eq!(broadcast_shape(&[2, 3], &[4, 3]), None);
    }

    #[test]
    fn expand_then_sum_to_scales_by_repeat_count() {
        let src = vec![1.0f64, 2.0, 3.0];
        let big = expand(&src, &[3, 1], &[3, 4]);
        assert_eq!(&big[..4], &[1.0; 4]);
        assert_eq!(sum_to(&big, &[3, 4], &[3, 1]), vec![4.0, 8.0, 12.0]);
        assert_eq!(sum_to(&big, &[3, 4], &[]), vec![24.0]);
        assert_eq!(sum_to(&big, &[3, 4], &[4]), vec![6.0; 4]);
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), y> == <x, col2im(y)>
        let g = Conv2dGeometry::from_shape(&[2, 3, 5, 4], (3, 2), (2, 1), (1, 1));
        let x: Vec<f64> = (0..numel(&g.image_shape())).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let [r, c] = g.cols_shape();
        let y: Vec<f64> = (0..r * c).map(|i| ((i * 5) % 13) as f64 - 6.0).collect();
        let lhs: f64 = im2col(&x, &g).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, &g)).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn avg_pool_excluding_padding_keeps_constants() {
        let g = Conv2dGeometry::from_shape(&[1, 1, 4, 4], (3, 3), (1, 1), (1, 1));
        let out = avg_pool2d(&[2.0f64; 16], &g, false);
        assert!(out.iter().all(|&v| v == 2.0));
        let with_pad = avg_pool2d(&[2.0f64; 16], &g, true);
        assert!((with_pad[0] - 8.0 / 9.0).abs() < 1e-15);
    }
}
