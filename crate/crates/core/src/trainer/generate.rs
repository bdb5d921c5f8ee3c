use std::path::Path;

use serde::{Deserialize, Serialize};
use spai_autograd::Scalar;

use super::{Checkpoint, TrainError};
use crate::corpus::PixelTensor;
use crate::ganzoo::{latent_rng, sample_latent, ConditionLabel, GanError, ModelKind, PerSampleNoise};

/// Where a generated image came from: image `index` uses stream `index` of
/// `seed`, so any image can be regenerated alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub index: u64,
    pub seed: u64,
    pub label: Option<ConditionLabel>,
    pub checkpoint_digest: Option<String>,
    pub model_kind: ModelKind,
}

#[derive(Clone, Debug)]
pub struct GeneratedImage {
    pub image: PixelTensor,
    pub provenance: Provenance,
}

const CHUNK: u64 = 32;

/// Draws `n` images. Conditional models need `label`; unconditional ones
/// reject it.
pub fn generate<T: Scalar>(
    ckpt: &Checkpoint<T>,
    n: u64,
    seed: u64,
    label: Option<ConditionLabel>,
) -> Result<Vec<GeneratedImage>, TrainError> {
    let model = &ckpt.model;
    let kind = model.arch.kind;
    match (kind.is_conditional(), label) {
        (true, None) => return Err(GanError::Conditioning(format!("{kind} needs a condition label")).into()),
        (false, Some(_)) => return Err(GanError::Conditioning(format!("{kind} takes no condition label")).into()),
        _ => {}
    }
    let d = model.arch.latent_dim;
    let mut out = Vec::with_capacity(n as usize);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let mut rngs: Vec<_> = (start..end).map(|i| latent_rng(seed, i)).collect();
        let codes: Vec<_> = rngs.iter_mut().flat_map(|r| sample_latent::<T, _>(r, 1, d)).collect();
        let labels = label.map(|l| vec![l; codes.len()]);
        let images = model.synthesize(&codes, labels.as_deref(), &mut PerSampleNoise(rngs))?;
        out.extend(images.into_iter().zip(start..end).map(|(image, index)| GeneratedImage {
            image,
            provenance: Provenance { index, seed, label, checkpoint_digest: ckpt.digest.clone(), model_kind: kind },
        }));
        start = end;
    }
    Ok(out)
}

/// Writes `gen_{index:06}.png` per image plus `provenance.json` and
/// `provenance.csv` listing all.
pub fn write_generated(dir: &Path, images: &[GeneratedImage]) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
    for g in images {
        g.image.save_png(&dir.join(format!("gen_{:06}.png", g.provenance.index)))?;
    }
    let prov: Vec<&Provenance> = images.iter().map(|g| &g.provenance).collect();
    let path = dir.join("provenance.json");
    let json = serde_json::to_string_pretty(&prov).expect("provenance serializes");
    std::fs::write(&path, json).map_err(|e| TrainError::io(&path, e))?;
    let mut csv = String::from("file,index,seed,label,model_kind,checkpoint_digest\n");
    for p in prov {
        let label = p.label.map(|l| l.to_string()).unwrap_or_default();
        let digest = p.checkpoint_digest.as_deref().unwrap_or_default();
        csv.push_str(&format!("gen_{:06}.png,{},{},{label},{},{digest}\n", p.index, p.index, p.seed, p.model_kind));
    }
    let path = dir.join("provenance.csv");
    std::fs::write(&path, csv).map_err(|e| TrainError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ganzoo::{ArchDescriptor, GanModel, ImageSize};
    use crate::trainer::{CheckpointMeta, RngState, Seeds};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ckpt(kind: ModelKind) -> Checkpoint<f32> {
        let arch = ArchDescriptor::new(kind, ImageSize::new(16, 16), 8, 4, 16).unwrap();
        let model = GanModel::new(arch.clone(), &mut ChaCha8Rng::seed_from_u64(3));
        let meta = CheckpointMeta {
            arch,
            step: 0,
            images_seen: 0,
            kimg: 0.0,
            config_hash: String::new(),
            seeds: Seeds::all(0),
            latent_rng: RngState::capture(&ChaCha8Rng::seed_from_u64(0)),
        };
        Checkpoint { model, meta, digest: Some("d".into()) }
    }

    #[test]
    fn images_are_independent_of_batch_composition() {
        let c = ckpt(ModelKind::Wgan);
        let all = generate(&c, 40, 9, None).unwrap();
        let few = generate(&c, 3, 9, None).unwrap();
        for i in 0..3 {
            assert_eq!(all[i].image, few[i].image);
        }
        assert_eq!(all[39].provenance.index, 39);
        assert_ne!(all[0].image, all[1].image);
    }

    #[test]
    fn condition_is_enforced() {
        let c = ckpt(ModelKind::Cgan);
        assert!(generate(&c, 2, 0, None).is_err());
        let f = generate(&c, 2, 0, Some(ConditionLabel::Female)).unwrap();
        let m = generate(&c, 2, 0, Some(ConditionLabel::Male)).unwrap();
        assert_ne!(f[0].image, m[0].image);
        assert!(generate(&ckpt(ModelKind::Wgan), 1, 0, Some(ConditionLabel::Male)).is_err());
    }

    #[test]
    fn writes_pngs_and_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = generate(&ckpt(ModelKind::WganGp), 2, 1, None).unwrap();
        write_generated(dir.path(), &imgs).unwrap();
        assert!(dir.path().join("gen_000001.png").exists());
        let p: Vec<Provenance> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("provenance.json")).unwrap()).unwrap();
        assert_eq!(p.len(), 2);
        let csv = std::fs::read_to_string(dir.path().join("provenance.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("gen_000001.png,1,1,,wgan_gp,"));
    }
}
