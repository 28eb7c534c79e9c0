//! Batch assembly from a manifest and the backbone-driven feature stream
//! used to train the head on images.

use std::sync::mpsc;
use std::thread;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::augment::{zoom_augment, AugmentConfig};
use super::image::{load_resize, preprocess_vgg, TARGET_SIZE};
use super::manifest::{DatasetManifest, Record, Subset};
use crate::backbone::vgg16_forward;
use crate::error::{DataError, Result};
use crate::head::gap;
use crate::tensor::Tensor;
use crate::train::FeatureStream;
use crate::weights::WeightStore;

/// Prepared batches waiting for the backbone.
const PREFETCH_BATCHES: usize = 2;

/// Preprocessed images with one-hot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Tensor,
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f32> {
    let mut row = vec![0.0; classes];
    row[class] = 1.0;
    row
}

/// Seeded permutation of `0..len` for one epoch. Each epoch draws from its
/// own stream of the seed.
pub fn epoch_order(len: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

/// Loads, optionally zoom-augments, and preprocesses `records` into one
/// batch.
pub fn assemble_batch(
    records: &[&Record],
    classes: usize,
    augment: Option<(&AugmentConfig, &mut dyn RngCore)>,
) -> Result<Batch, DataError> {
    let mut pixels = Vec::with_capacity(records.len() * TARGET_SIZE * TARGET_SIZE * 3);
    let mut labels = Vec::with_capacity(records.len() * classes);
    let mut augment = augment;
    for r in records {
        let mut img = load_resize(&r.path)?;
        if let Some((cfg, rng)) = augment.as_mut() {
            img = zoom_augment(&img, cfg, rng);
        }
        pixels.extend(preprocess_vgg(&img).into_data());
        labels.extend(one_hot(r.class, classes));
    }
    let b = records.len();
    Ok(Batch {
        images: Tensor::new([b, TARGET_SIZE, TARGET_SIZE, 3], pixels).expect("non-empty batch"),
        labels: Tensor::new([b, classes], labels).expect("non-empty batch"),
    })
}

/// One epoch of batches over `subset`. Training records are shuffled with
/// `shuffle_seed` and zoom-augmented; validation records keep manifest order
/// and are only preprocessed.
pub fn batches(
    manifest: &DatasetManifest,
    subset: Subset,
    augment: &AugmentConfig,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: usize,
) -> Result<Batches, DataError> {
    let records = manifest.subset(subset);
    if records.is_empty() {
        return Err(DataError::EmptySubset(subset.name()));
    }
    let order = match subset {
        Subset::Train => epoch_order(records.len(), shuffle_seed, epoch),
        Subset::Validation => (0..records.len()).collect(),
    };
    let rng = (subset == Subset::Train).then(|| (*augment, augment.pass_rng(epoch)));
    Ok(Batches {
        records,
        order,
        classes: manifest.classes.len(),
        batch_size: batch_size.max(1),
        next: 0,
        augment: rng,
    })
}

pub struct Batches {
    records: Vec<Record>,
    order: Vec<usize>,
    classes: usize,
    batch_size: usize,
    next: usize,
    augment: Option<(AugmentConfig, ChaCha8Rng)>,
}

impl Batches {
    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl Iterator for Batches {
    type Item = Result<Batch, DataError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let picked: Vec<&Record> = self.order[self.next..end]
            .iter()
            .map(|&i| &self.records[i])
            .collect();
        self.next = end;
        let aug = self
            .augment
            .as_mut()
            .map(|(cfg, rng)| (&*cfg, rng as &mut dyn RngCore));
        Some(assemble_batch(&picked, self.classes, aug))
    }
}

/// Backbone features for a subset of a manifest, computed per batch.
///
/// Image loading and augmentation run on a producer thread that stays at
/// most [`PREFETCH_BATCHES`] ahead of the backbone. When augmentation is off
/// the features are deterministic and are cached after the first pass.
pub struct ImageFeatureStream<'w> {
    records: Vec<Record>,
    classes: usize,
    backbone: &'w WeightStore,
    augment: Option<AugmentConfig>,
    cache: Option<Vec<(Vec<f32>, Vec<f32>)>>,
}

impl<'w> ImageFeatureStream<'w> {
    pub fn new(
        manifest: &DatasetManifest,
        subset: Subset,
        backbone: &'w WeightStore,
        augment: Option<AugmentConfig>,
    ) -> Self {
        ImageFeatureStream {
            records: manifest.subset(subset),
            classes: manifest.classes.len(),
            backbone,
            augment: augment.filter(|a| !a.is_identity()),
            cache: None,
        }
    }

    /// Augmentation-free stream over arbitrary records.
    pub fn from_records(records: Vec<Record>, classes: usize, backbone: &'w WeightStore) -> Self {
        ImageFeatureStream {
            records,
            classes,
            backbone,
            augment: None,
            cache: None,
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    fn fill_cache(&mut self, batch_size: usize) -> Result<()> {
        let order: Vec<usize> = (0..self.records.len()).collect();
        let mut rows = Vec::with_capacity(self.records.len());
        self.run(0, &order, batch_size, &mut |f, y| {
            let (b, _) = f.matrix_dims()?;
            for i in 0..b {
                rows.push((f.row(i).to_vec(), y.row(i).to_vec()));
            }
            Ok(())
        })?;
        self.cache = Some(rows);
        Ok(())
    }

    fn run(
        &self,
        pass: usize,
        order: &[usize],
        batch_size: usize,
        visit: &mut dyn FnMut(&Tensor, &Tensor) -> Result<()>,
    ) -> Result<()> {
        let (tx, rx) = mpsc::sync_channel::<Result<Batch, DataError>>(PREFETCH_BATCHES);
        let records = &self.records;
        let classes = self.classes;
        let augment = self.augment;
        thread::scope(|scope| {
            scope.spawn(move || {
                let mut rng = augment.map(|a| (a, a.pass_rng(pass)));
                for chunk in order.chunks(batch_size) {
                    let picked: Vec<&Record> = chunk.iter().map(|&i| &records[i]).collect();
                    let aug = rng.as_mut().map(|(a, r)| (&*a, r as &mut dyn RngCore));
                    let batch = assemble_batch(&picked, classes, aug);
                    let failed = batch.is_err();
                    if tx.send(batch).is_err() || failed {
                        break;
                    }
                }
            });
            for batch in rx {
                let batch = batch?;
                let features = gap(&vgg16_forward(&batch.images, self.backbone)?)?;
                visit(&features, &batch.labels)?;
            }
            Ok(())
        })
    }
}

impl FeatureStream for ImageFeatureStream<'_> {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn for_each_batch(
        &mut self,
        pass: usize,
        order: &[usize],
        batch_size: usize,
        visit: &mut dyn FnMut(&Tensor, &Tensor) -> Result<()>,
    ) -> Result<()> {
        if self.augment.is_some() {
            return self.run(pass, order, batch_size, visit);
        }
        if self.cache.is_none() {
            self.fill_cache(batch_size)?;
        }
        let cache = self.cache.as_ref().unwrap();
        for chunk in order.chunks(batch_size) {
            let width = cache[0].0.len();
            let mut f = Vec::with_capacity(chunk.len() * width);
            let mut y = Vec::with_capacity(chunk.len() * self.classes);
            for &i in chunk {
                f.extend_from_slice(&cache[i].0);
                y.extend_from_slice(&cache[i].1);
            }
            let f = Tensor::new([chunk.len(), width], f)?;
            let y = Tensor::new([chunk.len(), self.classes], y)?;
            visit(&f, &y)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_order_is_a_seeded_permutation() {
        let a = epoch_order(50, 7, 1);
        assert_eq!(a, epoch_order(50, 7, 1));
        assert_ne!(a, epoch_order(50, 7, 2));
        assert_ne!(a, epoch_order(50, 8, 1));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn one_hot_rows() {
        assert_eq!(one_hot(1, 3), [0.0, 1.0, 0.0]);
    }
}
