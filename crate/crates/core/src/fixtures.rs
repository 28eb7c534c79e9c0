//! Synthetic stand-ins for the real dataset and pretrained weights: random
//! backbone weights, Gaussian feature blobs and small class-coloured image
//! trees.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::backbone::ConvConfig;
use crate::data::one_hot;
use crate::error::DataError;
use crate::tensor::Tensor;
use crate::train::FeatureSet;
use crate::weights::WeightStore;

/// He-uniform VGG16 kernels (`bound = sqrt(6 / fan_in)`) and small random
/// biases, deterministic in `seed`.
pub fn random_backbone(seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for layer in ConvConfig::vgg16().layers() {
        let dims = layer.kernel_dims();
        let fan_in = (dims[0] * dims[1] * dims[2]) as f32;
        let bound = (6.0 / fan_in).sqrt();
        let count: usize = dims.iter().product();
        let kernel = (0..count)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let bias = (0..layer.out_channels)
            .map(|_| rng.random_range(-0.01..0.01))
            .collect();
        store
            .insert(layer.kernel_name(), Tensor::new(dims, kernel).unwrap())
            .unwrap();
        store
            .insert(
                layer.bias_name(),
                Tensor::new([layer.out_channels], bias).unwrap(),
            )
            .unwrap();
    }
    store
}

/// Backbone weight set with every kernel and bias zero.
pub fn zero_backbone() -> WeightStore {
    let mut store = WeightStore::new();
    for (name, dims) in ConvConfig::vgg16().tensor_specs() {
        store.insert(name, Tensor::zeros(dims)).unwrap();
    }
    store
}

/// Isotropic Gaussian clusters around `classes` random centres. Centres are
/// drawn on a sphere of radius `separation`; samples add `N(0, noise²)` per
/// coordinate. Rows cycle through the classes.
#[derive(Debug, Clone, Copy)]
pub struct Blobs {
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Blobs {
    pub fn centres(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.classes)
            .map(|_| {
                let v: Vec<f64> = (0..self.dim)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x * self.separation / norm).collect()
            })
            .collect()
    }

    /// `n` samples drawn from sample stream `stream` of the seed.
    pub fn sample(&self, n: usize, stream: u64) -> FeatureSet {
        let centres = self.centres();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream + 1);
        let normal = Normal::new(0.0, self.noise).expect("noise must be finite and >= 0");
        let mut f = Vec::with_capacity(n * self.dim);
        let mut y = Vec::with_capacity(n * self.classes);
        for i in 0..n {
            let class = i % self.classes;
            f.extend(
                centres[class]
                    .iter()
                    .map(|&c| (c + normal.sample(&mut rng)) as f32),
            );
            y.extend(one_hot(class, self.classes));
        }
        FeatureSet::new(
            Tensor::new([n, self.dim], f).unwrap(),
            Tensor::new([n, self.classes], y).unwrap(),
        )
        .unwrap()
    }
}

/// Random features in `[-1, 1)` with uniformly random labels.
pub fn random_pairs(n: usize, dim: usize, classes: usize, seed: u64) -> FeatureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = (0..n * dim)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    let y = (0..n)
        .flat_map(|_| one_hot(rng.random_range(0..classes), classes))
        .collect();
    FeatureSet::new(
        Tensor::new([n, dim], f).unwrap(),
        Tensor::new([n, classes], y).unwrap(),
    )
    .unwrap()
}

/// Base colour of class `class` in the synthetic image fixtures.
pub fn class_colour(class: usize) -> [u8; 3] {
    const PALETTE: [[u8; 3]; 6] = [
        [200, 60, 140],
        [70, 40, 170],
        [230, 190, 210],
        [40, 160, 90],
        [160, 120, 30],
        [20, 20, 20],
    ];
    PALETTE[class % PALETTE.len()]
}

/// Writes `<root>/<class>/img_NNN.png`: `size`×`size` images of the class
/// colour with per-pixel noise of ±`jitter` and a class-dependent stripe
/// pattern.
pub fn write_image_fixture(
    root: &Path,
    classes: &[&str],
    per_class: usize,
    size: u32,
    seed: u64,
) -> Result<(), DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = 20i32;
    for (c, name) in classes.iter().enumerate() {
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(|source| DataError::Io {
            path: dir.clone(),
            source,
        })?;
        let base = class_colour(c);
        for i in 0..per_class {
            let img = image::RgbImage::from_fn(size, size, |x, y| {
                let stripe = if ((x + y * c as u32) / 4).is_multiple_of(2) {
                    25
                } else {
                    -25
                };
                let px = base.map(|v| {
                    let n = rng.random_range(-jitter..=jitter);
                    (v as i32 + n + stripe).clamp(0, 255) as u8
                });
                image::Rgb(px)
            });
            let path = dir.join(format!("img_{i:03}.png"));
            img.save(&path).map_err(|e| DataError::Encode {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
    }
    Ok(())
}
