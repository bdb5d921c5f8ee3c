//! Procedural periocular-like NIR images for tests and smoke runs.
//!
//! Each image has skin with a soft vertical gradient, an almond-shaped eye
//! opening, iris, pupil, a specular highlight and an eyebrow band. Gender
//! shifts brow thickness and lash darkness, eye side mirrors the layout.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ClassLabel, CorpusError, EyeSide, Gender, ImageRecord, LabelRule, LabelingRules, Manifest, PixelTensor};

pub fn toy_image<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize, gender: Gender, side: EyeSide) -> PixelTensor {
    let (w, h) = (width as f32, height as f32);
    let mirror = if side == EyeSide::Left { 1.0 } else { -1.0 };
    let male = gender == Gender::Male;
    let skin = rng.gen_range(-0.1..0.25f32) + if male { -0.05 } else { 0.05 };
    let cx = w * (0.5 + mirror * rng.gen_range(0.0..0.06f32));
    let cy = h * rng.gen_range(0.5..0.6f32);
    let ax = w * rng.gen_range(0.30..0.38f32);
    let ay = h * rng.gen_range(0.14..0.2f32);
    let iris_r = ay * rng.gen_range(1.0..1.2f32);
    let ix = cx + mirror * ax * rng.gen_range(-0.15..0.15f32);
    let pupil_r = iris_r * rng.gen_range(0.35..0.5f32);
    let brow_y = cy - ay - h * rng.gen_range(0.12..0.18f32);
    let brow_t = h * if male { rng.gen_range(0.07..0.1f32) } else { rng.gen_range(0.03..0.05f32) };
    let lash = if male { 0.25 } else { 0.6 };
    let glint = (ix - mirror * iris_r * 0.35, cy - iris_r * 0.3, (iris_r * 0.22).max(0.6));
    let texture_phase = rng.gen_range(0.0..std::f32::consts::TAU);

    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            let mut v = skin + 0.15 * (py / h - 0.5);
            // brow: a tilted band above the eye
            let by = brow_y + mirror * 0.08 * (px - cx);
            if (py - by).abs() < brow_t && (px - cx).abs() < ax * 1.1 {
                v -= 0.45;
            }
            // almond opening from two parabolic lids
            let u = (px - cx) / ax;
            if u.abs() < 1.0 {
                let lid = ay * (1.0 - u * u);
                let d = py - cy;
                if d > -lid && d < lid * 0.8 {
                    v = 0.45;
                    let r = ((px - ix).powi(2) + (py - cy).powi(2)).sqrt();
                    if r < iris_r {
                        let ang = (py - cy).atan2(px - ix);
                        v = -0.2 + 0.08 * (ang * 9.0 + texture_phase).sin();
                    }
                    if r < pupil_r {
                        v = -0.9;
                    }
                    let g = ((px - glint.0).powi(2) + (py - glint.1).powi(2)).sqrt();
                    if g < glint.2 {
                        v = 0.95;
                    }
                } else if d <= -lid && d > -lid - h * 0.04 {
                    v -= lash;
                }
            }
            let n: f32 = StandardNormal.sample(rng);
            data.push(v + 0.03 * n);
        }
    }
    PixelTensor::from_clamped(height, width, data)
}

/// Shape of a generated corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyCorpusSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

/// File names are `toy_{index}_{L|R}_{F|M}.png`; [`toy_labeling_rules`]
/// recovers the labels. Genders and sides alternate.
pub fn write_toy_corpus(dir: &Path, spec: ToyCorpusSpec) -> Result<Vec<PathBuf>, CorpusError> {
    std::fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut paths = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let gender = if i % 2 == 0 { Gender::Female } else { Gender::Male };
        let side = if (i / 2) % 2 == 0 { EyeSide::Left } else { EyeSide::Right };
        let img = toy_image(&mut rng, spec.width, spec.height, gender, side);
        let name = format!(
            "toy_{i:05}_{}_{}.png",
            if side == EyeSide::Left { "L" } else { "R" },
            if gender == Gender::Female { "F" } else { "M" }
        );
        let path = dir.join(name);
        img.save_png(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn toy_labeling_rules() -> LabelingRules {
    let rule = |p: &str| p.to_string();
    LabelingRules {
        eye_side: vec![
            LabelRule { pattern: rule(r"_L_"), value: EyeSide::Left },
            LabelRule { pattern: rule(r"_R_"), value: EyeSide::Right },
        ],
        gender: vec![
            LabelRule { pattern: rule(r"_F\.png$"), value: Gender::Female },
            LabelRule { pattern: rule(r"_M\.png$"), value: Gender::Male },
        ],
        class_label: Vec::new(),
        ..LabelingRules::default()
    }
}

/// Writes a toy corpus and returns its manifest.
pub fn toy_manifest(dir: &Path, spec: ToyCorpusSpec) -> Result<Manifest, CorpusError> {
    write_toy_corpus(dir, spec)?;
    Ok(super::ingest_directory(dir, &toy_labeling_rules())?.manifest)
}

/// In-memory records for tests that never touch disk.
pub fn toy_records(spec: ToyCorpusSpec) -> Vec<(ImageRecord, PixelTensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|i| {
            let gender = if i % 2 == 0 { Gender::Female } else { Gender::Male };
            let side = if (i / 2) % 2 == 0 { EyeSide::Left } else { EyeSide::Right };
            let img = toy_image(&mut rng, spec.width, spec.height, gender, side);
            let rec = ImageRecord {
                id: format!("toy_{i:05}"),
                path: PathBuf::new(),
                eye_side: side,
                gender,
                class_label: ClassLabel::Bonafide,
                width: spec.width as u32,
                height: spec.height as u32,
            };
            (rec, img)
        })
        .collect()
}
