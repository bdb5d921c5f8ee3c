use serde::{Deserialize, Serialize};

use super::{ConditionLabel, GanError, ImageSize, ModelKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub in_features: usize,
    pub out_features: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorArch {
    /// Projection to `channels[0] × base_h × base_w`, then four ×2
    /// transposed-conv blocks down to one channel and a tanh head. Output
    /// is `canvas` pixels, center-cropped to the image size.
    Dcgan { base_h: usize, base_w: usize, canvas_h: usize, canvas_w: usize, channels: Vec<usize> },
    /// Mapping network, a learned 4×4 constant and modulated-conv synthesis
    /// blocks with noise injection and skip (toRGB) outputs.
    Style {
        mapping: Vec<DenseSpec>,
        mapping_lr_mul: f64,
        style_dim: usize,
        resolutions: Vec<usize>,
        channels: Vec<usize>,
    },
}

/// Strided 4×4 conv blocks followed by one linear score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticArch {
    pub in_channels: usize,
    pub channels: Vec<usize>,
    pub label_plane: bool,
    pub equalized_lr: bool,
    pub final_h: usize,
    pub final_w: usize,
}

/// Everything needed to rebuild a model's parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchDescriptor {
    pub kind: ModelKind,
    pub image_size: ImageSize,
    pub latent_dim: usize,
    pub n_classes: usize,
    pub generator: GeneratorArch,
    pub critic: CriticArch,
}

pub const MAPPING_LAYERS: usize = 8;
pub const STYLE_DIM: usize = 512;

fn conv_out(n: usize) -> usize {
    // 4×4 kernel, stride 2, padding 1
    (n + 2 - 4) / 2 + 1
}

impl ArchDescriptor {
    /// `base_channels` is the width of the highest-resolution layer;
    /// deeper layers double it, capped at `max_channels`.
    pub fn new(
        kind: ModelKind,
        image_size: ImageSize,
        latent_dim: usize,
        base_channels: usize,
        max_channels: usize,
    ) -> Result<Self, GanError> {
        let bad = |m: String| Err(GanError::InvalidArchitecture(m));
        if latent_dim == 0 || base_channels == 0 || max_channels < base_channels {
            return bad(format!("latent {latent_dim}, base {base_channels}, max {max_channels}"));
        }
        let ImageSize { width, height } = image_size;
        let width_at = |i: u32| (base_channels << i).min(max_channels);
        let n_classes = if kind.is_conditional() { ConditionLabel::COUNT } else { 0 };
        let (generator, n_critic_blocks) = match kind {
            ModelKind::Stylegan2Lite => {
                if width != height || !width.is_power_of_two() || width < 8 {
                    return bad(format!("style generator needs a square power-of-two size >= 8, got {image_size}"));
                }
                if latent_dim != STYLE_DIM {
                    return bad(format!("style generator needs latent_dim {STYLE_DIM}, got {latent_dim}"));
                }
                let levels = width.trailing_zeros() - 1; // 4, 8, ..., width
                let resolutions: Vec<usize> = (0..levels).map(|i| 4usize << i).collect();
                let channels = (0..levels).map(|i| width_at(levels - 1 - i)).collect();
                let mapping = vec![DenseSpec { in_features: STYLE_DIM, out_features: STYLE_DIM }; MAPPING_LAYERS];
                let g = GeneratorArch::Style { mapping, mapping_lr_mul: 0.01, style_dim: STYLE_DIM, resolutions, channels };
                (g, levels as usize - 1)
            }
            _ => {
                if width < 16 || height < 16 {
                    return bad(format!("image size {image_size} below 16x16"));
                }
                let (base_h, base_w) = (height.div_ceil(16), width.div_ceil(16));
                let mut channels: Vec<usize> = (0..4).rev().map(width_at).collect();
                channels.push(1);
                let g = GeneratorArch::Dcgan { base_h, base_w, canvas_h: base_h * 16, canvas_w: base_w * 16, channels };
                (g, 4)
            }
        };
        let (mut fh, mut fw) = (height, width);
        for _ in 0..n_critic_blocks {
            fh = conv_out(fh);
            fw = conv_out(fw);
        }
        let critic = CriticArch {
            in_channels: 1 + kind.is_conditional() as usize,
            channels: (0..n_critic_blocks as u32).map(width_at).collect(),
            label_plane: kind.is_conditional(),
            equalized_lr: kind == ModelKind::Stylegan2Lite,
            final_h: fh,
            final_w: fw,
        };
        Ok(Self { kind, image_size, latent_dim, n_classes, generator, critic })
    }

    /// Fully-connected layers of the mapping network (empty for DCGAN).
    pub fn mapping_layers(&self) -> &[DenseSpec] {
        match &self.generator {
            GeneratorArch::Style { mapping, .. } => mapping,
            GeneratorArch::Dcgan { .. } => &[],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dcgan_layout() {
        let a = ArchDescriptor::new(ModelKind::Cgan, ImageSize::new(80, 60), 128, 8, 64).unwrap();
        let GeneratorArch::Dcgan { base_h, base_w, canvas_h, canvas_w, channels } = &a.generator else { panic!() };
        assert_eq!((*base_h, *base_w, *canvas_h, *canvas_w), (4, 5, 64, 80));
        assert_eq!(channels, &[64, 32, 16, 8, 1]);
        assert_eq!(a.critic.channels, vec![8, 16, 32, 64]);
        assert_eq!((a.critic.final_h, a.critic.final_w), (3, 5));
        assert_eq!(a.critic.in_channels, 2);
        assert_eq!(a.n_classes, 2);
    }

    #[test]
    fn style_layout() {
        let a = ArchDescriptor::new(ModelKind::Stylegan2Lite, ImageSize::new(32, 32), 512, 16, 64).unwrap();
        let GeneratorArch::Style { resolutions, channels, mapping, .. } = &a.generator else { panic!() };
        assert_eq!(resolutions, &[4, 8, 16, 32]);
        assert_eq!(channels, &[64, 64, 32, 16]);
        assert_eq!(mapping.len(), 8);
        assert_eq!(a.critic.channels, vec![16, 32, 64]);
        assert_eq!((a.critic.final_h, a.critic.final_w), (4, 4));
        assert!(ArchDescriptor::new(ModelKind::Stylegan2Lite, ImageSize::new(32, 24), 512, 16, 64).is_err());
        assert!(ArchDescriptor::new(ModelKind::Stylegan2Lite, ImageSize::new(32, 32), 128, 16, 64).is_err());
    }
}
