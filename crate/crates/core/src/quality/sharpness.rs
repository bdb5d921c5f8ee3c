use std::sync::OnceLock;

use crate::corpus::PixelTensor;

pub const LOG_SIGMA: f64 = 1.5;
pub const LOG_KERNEL_SIZE: usize = 9;
/// Fixed-point scale of the integer kernel.
const KERNEL_SCALE: f64 = 4096.0;

/// Zero-sum integer Laplacian-of-Gaussian kernel (σ = 1.5, 9×9) in units
/// of `1 / 4096`.
pub fn log_kernel() -> &'static [i64; LOG_KERNEL_SIZE * LOG_KERNEL_SIZE] {
    static KERNEL: OnceLock<[i64; LOG_KERNEL_SIZE * LOG_KERNEL_SIZE]> = OnceLock::new();
    KERNEL.get_or_init(|| {
        let r = (LOG_KERNEL_SIZE / 2) as i64;
        let s2 = LOG_SIGMA * LOG_SIGMA;
        let mut k = [0.0f64; LOG_KERNEL_SIZE * LOG_KERNEL_SIZE];
        for y in -r..=r {
            for x in -r..=r {
                let q = (x * x + y * y) as f64 / (2.0 * s2);
                k[((y + r) * (2 * r + 1) + x + r) as usize] =
                    -(1.0 - q) * (-q).exp() / (std::f64::consts::PI * s2 * s2);
            }
        }
        let mean = k.iter().sum::<f64>() / k.len() as f64;
        let mut out = [0i64; LOG_KERNEL_SIZE * LOG_KERNEL_SIZE];
        for (o, v) in out.iter_mut().zip(k) {
            *o = ((v - mean) * KERNEL_SCALE).round() as i64;
        }
        // rounding may leave a residue; the center absorbs it
        let residue: i64 = out.iter().sum();
        out[out.len() / 2] -= residue;
        out
    })
}

/// Mean squared LoG response over the valid interior, in squared
/// normalized-intensity units, ×100. Pixels are quantized to 8-bit code
/// values first and the filter runs in exact integer arithmetic, so a
/// constant image scores exactly 0 and adding a whole number of code
/// levels changes nothing. Images smaller than the kernel score 0.
pub fn sharpness(img: &PixelTensor) -> f64 {
    let (h, w) = (img.height(), img.width());
    if h < LOG_KERNEL_SIZE || w < LOG_KERNEL_SIZE {
        return 0.0;
    }
    let codes: Vec<i64> = img.to_luma8().into_raw().into_iter().map(i64::from).collect();
    let k = log_kernel();
    let (oh, ow) = (h - LOG_KERNEL_SIZE + 1, w - LOG_KERNEL_SIZE + 1);
    let mut sum_sq: i128 = 0;
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0i64;
            for ky in 0..LOG_KERNEL_SIZE {
                let row = &codes[(y + ky) * w + x..(y + ky) * w + x + LOG_KERNEL_SIZE];
                let krow = &k[ky * LOG_KERNEL_SIZE..(ky + 1) * LOG_KERNEL_SIZE];
                acc += row.iter().zip(krow).map(|(a, b)| a * b).sum::<i64>();
            }
            sum_sq += (acc as i128) * (acc as i128);
        }
    }
    let unit = KERNEL_SCALE * 255.0;
    100.0 * sum_sq as f64 / (unit * unit) / (oh * ow) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_zero_sum_and_symmetric() {
        let k = log_kernel();
        assert_eq!(k.iter().sum::<i64>(), 0);
        for y in 0..9 {
            for x in 0..9 {
                assert_eq!(k[y * 9 + x], k[x * 9 + y]);
                assert_eq!(k[y * 9 + x], k[(8 - y) * 9 + (8 - x)]);
            }
        }
        // centre is the negative extreme
        assert_eq!(*k.iter().min().unwrap(), k[40]);
    }

    #[test]
    fn constant_and_tiny_images() {
        assert_eq!(sharpness(&PixelTensor::constant(20, 30, 0.3)), 0.0);
        assert_eq!(sharpness(&PixelTensor::constant(5, 5, 0.3)), 0.0);
    }

    #[test]
    fn edges_are_sharper_than_ramps() {
        let step = PixelTensor::from_clamped(20, 20, (0..400).map(|i| if i % 20 < 10 { -0.5 } else { 0.5 }).collect());
        let ramp = PixelTensor::from_clamped(20, 20, (0..400).map(|i| (50 + 8 * (i % 20)) as f32 / 127.5 - 1.0).collect());
        assert!(sharpness(&step) > 0.0);
        // a ramp of whole code levels has zero second derivative
        assert_eq!(sharpness(&ramp), 0.0);
    }
}
