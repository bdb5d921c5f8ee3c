use std::path::Path;

use image::GrayImage;

use super::CorpusError;

/// Dimension order of [`PixelTensor::data`]: one grayscale channel, row-major.
pub const PIXEL_LAYOUT: &str = "HW";

/// A grayscale image with values in `[-1, 1]`, stored row-major (`H × W`).
#[derive(Clone, Debug, PartialEq)]
pub struct PixelTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PixelTensor {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self, CorpusError> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(CorpusError::InvalidPixels(format!(
                "{} values for a {height}x{width} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(CorpusError::InvalidPixels(format!("value {v} outside [-1, 1]")));
        }
        Ok(Self { height, width, data })
    }

    /// Like [`PixelTensor::new`] but clamps into range; NaN becomes `-1`.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f32>) -> Self {
        assert_eq!(data.len(), height * width, "pixel count mismatch");
        for v in &mut data {
            *v = if v.is_nan() { -1.0 } else { v.clamp(-1.0, 1.0) };
        }
        Self { height, width, data }
    }

    pub fn constant(height: usize, width: usize, value: f32) -> Self {
        Self::from_clamped(height, width, vec![value; height * width])
    }

    pub fn from_luma8(img: &GrayImage) -> Self {
        let data = img.as_raw().iter().map(|&v| v as f32 / 127.5 - 1.0).collect();
        Self::from_clamped(img.height() as usize, img.width() as usize, data)
    }

    /// 8-bit code values: `round((x + 1) · 127.5)`.
    pub fn to_luma8(&self) -> GrayImage {
        let raw = self.data.iter().map(|&v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8).collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer size")
    }

    /// Decodes any supported format, converting color to luma.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = std::fs::read(path).map_err(|e| CorpusError::io(path, e))?;
        let img = image::load_from_memory(&bytes)
            .map_err(|e| CorpusError::Decode { path: path.to_path_buf(), reason: e.to_string() })?;
        Ok(Self::from_luma8(&img.to_luma8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), CorpusError> {
        self.to_luma8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| CorpusError::io(path, std::io::Error::other(e.to_string())))
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Bilinear sample at continuous pixel-center coordinates, edges replicated.
    pub(crate) fn sample_bilinear(&self, y: f32, x: f32) -> f32 {
        let (y0, y1, ty) = axis_taps(y, self.height);
        let (x0, x1, tx) = axis_taps(x, self.width);
        let top = lerp(self.get(y0, x0), self.get(y0, x1), tx);
        let bottom = lerp(self.get(y1, x0), self.get(y1, x1), tx);
        lerp(top, bottom, ty)
    }
}

fn axis_taps(s: f32, len: usize) -> (usize, usize, f32) {
    let s = s.clamp(0.0, (len - 1) as f32);
    let i0 = (s.floor() as usize).min(len - 1);
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, s - i0 as f32)
}

fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

/// Bilinear resize with half-pixel centers. `target` is `(width, height)`.
pub fn resize(img: &PixelTensor, target: (usize, usize)) -> Result<PixelTensor, CorpusError> {
    let (tw, th) = target;
    if tw == 0 || th == 0 || tw > 16384 || th > 16384 {
        return Err(CorpusError::InvalidTarget { width: tw, height: th });
    }
    if (tw, th) == (img.width, img.height) {
        return Ok(img.clone());
    }
    let sy = img.height as f32 / th as f32;
    let sx = img.width as f32 / tw as f32;
    let mut data = Vec::with_capacity(tw * th);
    for y in 0..th {
        let fy = (y as f32 + 0.5) * sy - 0.5;
        for x in 0..tw {
            let fx = (x as f32 + 0.5) * sx - 0.5;
            data.push(img.sample_bilinear(fy, fx));
        }
    }
    Ok(PixelTensor::from_clamped(th, tw, data))
}

/// Largest centered square crop, then bilinear resize to `side × side`.
pub fn center_crop_resize(img: &PixelTensor, side: usize) -> Result<PixelTensor, CorpusError> {
    let s = img.height.min(img.width);
    let (y0, x0) = ((img.height - s) / 2, (img.width - s) / 2);
    let mut data = Vec::with_capacity(s * s);
    for y in y0..y0 + s {
        data.extend_from_slice(&img.data[y * img.width + x0..y * img.width + x0 + s]);
    }
    resize(&PixelTensor { height: s, width: s, data }, (side, side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(h: usize, w: usize) -> PixelTensor {
        let data = (0..h * w).map(|i| (i as f32 / (h * w) as f32) * 2.0 - 1.0).collect();
        PixelTensor::new(h, w, data).unwrap()
    }

    #[test]
    fn resize_shapes_and_errors() {
        let img = ramp(480, 640);
        let out = resize(&img, (320, 240)).unwrap();
        assert_eq!((out.width(), out.height()), (320, 240));
        assert!(out.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(matches!(resize(&img, (0, 10)), Err(CorpusError::InvalidTarget { .. })));
        assert_eq!(resize(&img, (640, 480)).unwrap(), img);
    }

    #[test]
    fn exact_halving_averages_pixel_pairs() {
        let img = PixelTensor::new(2, 4, vec![-1.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let out = resize(&img, (2, 1)).unwrap();
        // half-pixel centers land midway between source pixels on both axes
        assert_eq!(out.data(), &[-0.25, 0.375]);
    }

    #[test]
    fn luma_round_trip() {
        let img = ramp(8, 8);
        let back = PixelTensor::from_luma8(&img.to_luma8());
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 127.5);
        }
    }

    proptest! {
        #[test]
        fn constant_images_stay_constant(c in -1.0f32..=1.0, h in 1usize..40, w in 1usize..40, th in 1usize..40, tw in 1usize..40) {
            let out = resize(&PixelTensor::constant(h, w, c), (tw, th)).unwrap();
            prop_assert!(out.data().iter().all(|&v| v == c));
        }

        #[test]
        fn resize_stays_within_input_range(seed in 0u64..1000, th in 1usize..30, tw in 1usize..30) {
            let img = PixelTensor::from_clamped(17, 23, (0..17 * 23).map(|i| (((i as u64 * 2654435761 + seed) % 1000) as f32 / 500.0) - 1.0).collect());
            let (lo, hi) = img.data().iter().fold((1.0f32, -1.0f32), |(l, h), &v| (l.min(v), h.max(v)));
            let out = resize(&img, (tw, th)).unwrap();
            prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
        }
    }
}
