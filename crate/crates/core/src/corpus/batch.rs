use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{center_crop_resize, resize, CorpusError, Gender, Manifest, PixelTensor};

/// Generator for the shuffle of one epoch: `seed` selects the key, `epoch`
/// the stream.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    rng
}

/// Shuffled index batches covering `0..n` exactly once; the last batch may
/// be short.
pub fn batch_plan(n: usize, size: usize, seed: u64, epoch: u64) -> Result<Vec<Vec<usize>>, CorpusError> {
    if size == 0 {
        return Err(CorpusError::InvalidBatchSize(size));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut epoch_rng(seed, epoch));
    Ok(order.chunks(size).map(<[usize]>::to_vec).collect())
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub ids: Vec<String>,
    pub images: Vec<PixelTensor>,
}

/// One epoch over a manifest, decoding images from disk as it goes.
pub struct BatchIter<'a> {
    manifest: &'a Manifest,
    plan: std::vec::IntoIter<Vec<usize>>,
}

impl Iterator for BatchIter<'_> {
    type Item = Result<Batch, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        let idx = self.plan.next()?;
        let mut batch = Batch { ids: Vec::with_capacity(idx.len()), images: Vec::with_capacity(idx.len()) };
        for i in idx {
            let r = &self.manifest.records[i];
            match PixelTensor::load(&r.path) {
                Ok(img) => batch.images.push(img),
                Err(e) => return Some(Err(e)),
            }
            batch.ids.push(r.id.clone());
        }
        Some(Ok(batch))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.plan.size_hint()
    }
}

impl ExactSizeIterator for BatchIter<'_> {}

pub fn batches(manifest: &Manifest, size: usize, shuffle_seed: u64) -> Result<BatchIter<'_>, CorpusError> {
    let plan = batch_plan(manifest.len(), size, shuffle_seed, 0)?;
    Ok(BatchIter { manifest, plan: plan.into_iter() })
}

/// How source images are brought to the training size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fit {
    /// Bilinear resize to `(width, height)`.
    Resize(usize, usize),
    /// Centered square crop, then resize to `side × side`.
    CenterCropSquare(usize),
}

/// Decoded, resized images held in memory with their gender labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub images: Vec<PixelTensor>,
    pub genders: Vec<Gender>,
}

impl Dataset {
    pub fn load(manifest: &Manifest, fit: Fit) -> Result<Self, CorpusError> {
        let mut ds = Dataset { ids: Vec::new(), images: Vec::new(), genders: Vec::new() };
        for r in &manifest.records {
            let img = PixelTensor::load(&r.path)?;
            ds.images.push(fit_image(&img, fit)?);
            ds.ids.push(r.id.clone());
            ds.genders.push(r.gender);
        }
        Ok(ds)
    }

    pub fn from_images(images: Vec<PixelTensor>, genders: Vec<Gender>) -> Self {
        assert_eq!(images.len(), genders.len());
        let ids = (0..images.len()).map(|i| format!("img{i:06}")).collect();
        Self { ids, images, genders }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.images.first().map(|i| (i.width(), i.height()))
    }
}

pub fn fit_image(img: &PixelTensor, fit: Fit) -> Result<PixelTensor, CorpusError> {
    match fit {
        Fit::Resize(w, h) => resize(img, (w, h)),
        Fit::CenterCropSquare(side) => center_crop_resize(img, side),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn batch_counts() {
        let plan = batch_plan(3000, 60, 1, 0).unwrap();
        assert_eq!(plan.len(), 50);
        let sizes: Vec<usize> = batch_plan(7, 3, 1, 0).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        assert!(matches!(batch_plan(7, 0, 1, 0), Err(CorpusError::InvalidBatchSize(0))));
    }

    #[test]
    fn deterministic_per_seed_and_epoch() {
        assert_eq!(batch_plan(100, 7, 5, 2).unwrap(), batch_plan(100, 7, 5, 2).unwrap());
        assert_ne!(batch_plan(100, 7, 5, 2).unwrap(), batch_plan(100, 7, 6, 2).unwrap());
        assert_ne!(batch_plan(100, 7, 5, 2).unwrap(), batch_plan(100, 7, 5, 3).unwrap());
    }

    proptest! {
        #[test]
        fn plan_partitions_indices(n in 0usize..300, size in 1usize..50, seed in any::<u64>()) {
            let plan = batch_plan(n, size, seed, 0).unwrap();
            prop_assert_eq!(plan.len(), n.div_ceil(size));
            let mut all: Vec<usize> = plan.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(plan.iter().rev().skip(1).all(|b| b.len() == size));
        }
    }
}
