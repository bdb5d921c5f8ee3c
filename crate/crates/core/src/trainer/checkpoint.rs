use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spai_autograd::Scalar;

use super::{Seeds, TrainError};
use crate::archive;
use crate::ganzoo::{ArchDescriptor, GanModel};

pub const CHECKPOINT_KIND: &str = "gan-checkpoint";

/// Position of a ChaCha stream: key, stream id and word offset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed_hex: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed_hex: hex::encode(rng.get_seed()), stream: rng.get_stream(), word_pos: rng.get_word_pos().to_string() }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, TrainError> {
        use rand::SeedableRng;
        let bad = |m: &str| TrainError::Checkpoint(format!("rng state: {m}"));
        let seed: [u8; 32] = hex::decode(&self.seed_hex).map_err(|_| bad("seed"))?.try_into().map_err(|_| bad("seed length"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad("word position"))?);
        Ok(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub arch: ArchDescriptor,
    pub step: u64,
    pub images_seen: u64,
    pub kimg: f64,
    pub config_hash: String,
    pub seeds: Seeds,
    pub latent_rng: RngState,
}

/// Generator and critic parameters with the state needed to resume or
/// regenerate.
#[derive(Clone, Debug)]
pub struct Checkpoint<T: Scalar> {
    pub model: GanModel<T>,
    pub meta: CheckpointMeta,
    /// Hex SHA-256 of the serialized archive, set on save/load.
    pub digest: Option<String>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn save(&mut self, path: &Path) -> Result<(), TrainError> {
        let digest = archive::write(
            path,
            CHECKPOINT_KIND,
            &self.meta,
            &[("generator", &self.model.generator), ("critic", &self.model.critic)],
        )?;
        self.digest = Some(digest);
        Ok(())
    }

    /// Scalar type a checkpoint file was written with.
    pub fn stored_dtype(path: &Path) -> Result<String, TrainError> {
        let a: archive::Archive<serde_json::Value, f32> = archive::read(path)?;
        Ok(a.dtype)
    }

    /// Fails with [`TrainError::Checksum`] on any corruption.
    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let mut a: archive::Archive<CheckpointMeta, T> = archive::read(path)?;
        if a.kind != CHECKPOINT_KIND {
            return Err(TrainError::Checkpoint(format!("{} is a {:?} archive", path.display(), a.kind)));
        }
        let missing = |g: &str| TrainError::Checkpoint(format!("missing {g} parameters"));
        let generator = a.take_group("generator").ok_or_else(|| missing("generator"))?;
        let critic = a.take_group("critic").ok_or_else(|| missing("critic"))?;
        let model = GanModel::from_parts(a.meta.arch.clone(), generator, critic)?;
        Ok(Self { model, meta: a.meta, digest: Some(a.digest) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ganzoo::{ImageSize, ModelKind};
    use rand::{RngCore, SeedableRng};

    #[test]
    fn save_load_and_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let arch = ArchDescriptor::new(ModelKind::Cgan, ImageSize::new(16, 16), 8, 4, 16).unwrap();
        let model = GanModel::<f32>::new(arch.clone(), &mut ChaCha8Rng::seed_from_u64(0));
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.next_u64();
        let meta = CheckpointMeta {
            arch,
            step: 10,
            images_seen: 600,
            kimg: 0.6,
            config_hash: "abc".into(),
            seeds: Seeds::all(1),
            latent_rng: RngState::capture(&rng),
        };
        let mut ck = Checkpoint { model: model.clone(), meta, digest: None };
        let path = dir.path().join("c.bin");
        ck.save(&path).unwrap();
        let back = Checkpoint::<f32>::load(&path).unwrap();
        assert_eq!(back.model, model);
        assert_eq!(back.meta, ck.meta);
        assert_eq!(back.digest, ck.digest);
        let mut resumed = back.meta.latent_rng.restore().unwrap();
        assert_eq!(resumed.next_u64(), rng.next_u64());

        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 100] ^= 1;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(Checkpoint::<f32>::load(&path), Err(TrainError::Checksum(_))));
    }
}
