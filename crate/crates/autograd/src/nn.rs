//! Functional neural-network layers built from the primitives in `ops`.

use crate::kernels::Conv2dGeometry;
use crate::{Scalar, Var};

/// `x [B, in] · wᵀ [in, out] + b`
pub fn linear<T: Scalar>(x: &Var<T>, weight: &Var<T>, bias: Option<&Var<T>>) -> Var<T> {
    let y = x.matmul_t(weight, false, true);
    match bias {
        Some(b) => y.add(&b.reshape([1, b.numel()])),
        None => y,
    }
}

/// 2-D cross-correlation. `weight` is `[out, in, kh, kw]`.
pub fn conv2d<T: Scalar>(
    x: &Var<T>,
    weight: &Var<T>,
    bias: Option<&Var<T>>,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Var<T> {
    let ws = weight.shape();
    assert_eq!(ws.len(), 4, "conv2d weight must be [out, in, kh, kw]");
    assert_eq!(x.shape()[1], ws[1], "conv2d channel mismatch: input {:?}, weight {:?}", x.shape(), ws);
    let (out_c, in_c, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    let geom = Conv2dGeometry::from_shape(x.shape(), (kh, kw), stride, padding);
    let (b, oh, ow) = (geom.batch, geom.out_h(), geom.out_w());
    let cols = x.im2col(geom);
    let y = weight.reshape([out_c, in_c * kh * kw]).matmul(&cols);
    let y = if b == 1 {
        y.reshape([1, out_c, oh, ow])
    } else {
        y.reshape([out_c, b, oh * ow]).swap01().reshape([b, out_c, oh, ow])
    };
    add_channel_bias(y, bias)
}

/// Transposed convolution (the adjoint of [`conv2d`] in `x`). `weight` is
/// `[in, out, kh, kw]`; `output_padding` resolves the size ambiguity of
/// strided layers.
pub fn conv_transpose2d<T: Scalar>(
    x: &Var<T>,
    weight: &Var<T>,
    bias: Option<&Var<T>>,
    stride: (usize, usize),
    padding: (usize, usize),
    output_padding: (usize, usize),
) -> Var<T> {
    let ws = weight.shape();
    assert_eq!(ws.len(), 4, "conv_transpose2d weight must be [in, out, kh, kw]");
    let xs = x.shape();
    assert_eq!(xs[1], ws[0], "conv_transpose2d channel mismatch: input {xs:?}, weight {ws:?}");
    let (b, in_c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (out_c, kh, kw) = (ws[1], ws[2], ws[3]);
    let oh = (h - 1) * stride.0 + kh + output_padding.0 - 2 * padding.0;
    let ow = (w - 1) * stride.1 + kw + output_padding.1 - 2 * padding.1;
    let geom = Conv2dGeometry { batch: b, channels: out_c, height: oh, width: ow, kernel: (kh, kw), stride, padding };
    assert_eq!((geom.out_h(), geom.out_w()), (h, w), "inconsistent transposed-conv geometry");
    let x_flat = if b == 1 {
        x.reshape([in_c, h * w])
    } else {
        x.reshape([b, in_c, h * w]).swap01().reshape([in_c, b * h * w])
    };
    let cols = weight.reshape([in_c, out_c * kh * kw]).matmul_t(&x_flat, true, false);
    add_channel_bias(cols.col2im(geom), bias)
}

fn add_channel_bias<T: Scalar>(y: Var<T>, bias: Option<&Var<T>>) -> Var<T> {
    match bias {
        Some(b) => y.add(&b.reshape([1, b.numel(), 1, 1])),
        None => y,
    }
}

/// Normalize each feature vector (axis 1) to unit mean square.
pub fn pixel_norm<T: Scalar>(x: &Var<T>, eps: f64) -> Var<T> {
    let mut reduced = x.shape().to_vec();
    let c = reduced[1];
    reduced[1] = 1;
    let ms = x.square().sum_to(&reduced).mul_scalar(T::one() / T::of(c as f64));
    x.mul(&ms.add_scalar(T::of(eps)).powf(T::of(-0.5)))
}

/// Nearest-neighbour ×2 upsampling of an NCHW tensor.
pub fn upsample_nearest2x<T: Scalar>(x: &Var<T>) -> Var<T> {
    let s = x.shape();
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    x.reshape([b, c, h, 1, w, 1]).expand(&[b, c, h, 2, w, 2]).reshape([b, c, 2 * h, 2 * w])
}

/// Mean over the spatial axes: `[B, C, H, W] -> [B, C]`.
pub fn global_avg_pool<T: Scalar>(x: &Var<T>) -> Var<T> {
    let s = x.shape();
    let (b, c, hw) = (s[0], s[1], s[2] * s[3]);
    x.sum_to(&[b, c, 1, 1]).reshape([b, c]).mul_scalar(T::one() / T::of(hw as f64))
}

/// Crop spatial axes of an NCHW tensor to `(h, w)`, centered.
pub fn center_crop<T: Scalar>(x: &Var<T>, h: usize, w: usize) -> Var<T> {
    let s = x.shape();
    assert!(s[2] >= h && s[3] >= w, "crop {h}x{w} larger than {s:?}");
    x.narrow(2, (s[2] - h) / 2, h).narrow(3, (s[3] - w) / 2, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn direct_conv(x: &Tensor<f64>, w: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
        let (xs, ws) = (x.shape(), w.shape());
        let (b, c, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
        let (o, k) = (ws[0], ws[2]);
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut out = vec![0.0; b * o * oh * ow];
        for bi in 0..b {
            for oi in 0..o {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut s = 0.0;
                        for ci in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let iy = (y * stride + ki) as isize - pad as isize;
                                    let ix = (xx * stride + kj) as isize - pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                        s += x.data()[((bi * c + ci) * h + iy as usize) * wd + ix as usize]
                                            * w.data()[((oi * c + ci) * k + ki) * k + kj];
                                    }
                                }
                            }
                        }
                        out[((bi * o + oi) * oh + y) * ow + xx] = s;
                    }
                }
            }
        }
        Tensor::new([b, o, oh, ow], out)
    }

    #[test]
    fn conv2d_matches_direct_loop() {
        let x = Tensor::<f64>::from_fn([2, 3, 6, 5], |i| ((i * 31) % 17) as f64 / 17.0 - 0.5);
        let w = Tensor::<f64>::from_fn([4, 3, 3, 3], |i| ((i * 13) % 7) as f64 / 7.0 - 0.5);
        let got = conv2d(&Var::constant(x.clone()), &Var::constant(w.clone()), None, (2, 2), (1, 1));
        let want = direct_conv(&x, &w, 2, 1);
        assert_eq!(got.shape(), want.shape());
        for (a, b) in got.value().data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_transpose_is_adjoint_of_conv() {
        // <conv(x, w), y> == <x, convT(y, w)>
        let x = Tensor::<f64>::from_fn([2, 3, 8, 6], |i| ((i * 7) % 11) as f64 - 5.0);
        let w = Tensor::<f64>::from_fn([5, 3, 4, 4], |i| ((i * 3) % 5) as f64 - 2.0);
        let y_shape = direct_conv(&x, &w, 2, 1).shape().to_vec();
        let y = Tensor::<f64>::from_fn(y_shape, |i| ((i * 5) % 9) as f64 - 4.0);
        // conv weight [out=5, in=3] is a transposed-conv weight [in=5, out=3]
        let cx = conv2d(&Var::constant(x.clone()), &Var::constant(w.clone()), None, (2, 2), (1, 1));
        let ty = conv_transpose2d(&Var::constant(y.clone()), &Var::constant(w), None, (2, 2), (1, 1), (0, 0));
        assert_eq!(ty.shape(), x.shape());
        let lhs: f64 = cx.value().data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(ty.value().data()).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn upsample_repeats_pixels() {
        let x = Var::constant(Tensor::<f32>::new([1, 1, 1, 2], vec![1.0, 2.0]));
        let y = upsample_nearest2x(&x);
        assert_eq!(y.shape(), &[1, 1, 2, 4]);
        assert_eq!(y.value().data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }
}
