//! In-browser demos built on the core crate: zoom augmentation of an image,
//! a convolution + ReLU + max-pool feature map, and head training on
//! synthetic feature blobs.

use histograde::backbone::{conv2d_same, maxpool_2x2};
use histograde::data::{zoom_augment, AugmentConfig};
use histograde::fixtures::Blobs;
use histograde::tensor::relu;
use histograde::train::{fit, EpochMetrics, Flow};
use histograde::{HeadDims, Tensor, TrainConfig};
use wasm_bindgen::prelude::*;

fn rgba_to_rgb(rgba: &[u8], width: usize, height: usize) -> Result<Tensor, String> {
    if width == 0 || height == 0 || rgba.len() != width * height * 4 {
        return Err(format!(
            "expected {width}x{height} RGBA ({} bytes), got {} bytes",
            width * height * 4,
            rgba.len()
        ));
    }
    let rgb = rgba
        .chunks_exact(4)
        .flat_map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
        .collect();
    Tensor::new([height, width, 3], rgb).map_err(|e| e.to_string())
}

fn rgb_to_rgba(rgb: &[f32]) -> Vec<u8> {
    rgb.chunks_exact(3)
        .flat_map(|p| {
            let [r, g, b] = [p[0], p[1], p[2]].map(|v| v.round().clamp(0.0, 255.0) as u8);
            [r, g, b, 255]
        })
        .collect()
}

/// Zoom-augments an RGBA image with factors drawn from
/// `[1 - zoom_range, 1 + zoom_range]`. Returns RGBA of the same size.
#[wasm_bindgen]
pub fn zoom_preview(
    rgba: &[u8],
    width: usize,
    height: usize,
    zoom_range: f64,
    seed: u32,
) -> Result<Vec<u8>, String> {
    if !(0.0..1.0).contains(&zoom_range) {
        return Err(format!("zoom range {zoom_range} must be in [0, 1)"));
    }
    let img = rgba_to_rgb(rgba, width, height)?;
    let cfg = AugmentConfig {
        zoom_range,
        rng_seed: seed.into(),
    };
    let out = zoom_augment(&img, &cfg, &mut cfg.pass_rng(0));
    Ok(rgb_to_rgba(out.data()))
}

/// 3x3 kernels offered by [`feature_map`].
pub const KERNELS: [&str; 4] = ["edge", "sobel-x", "sharpen", "blur"];

fn kernel(name: &str) -> Option<[f32; 9]> {
    Some(match name {
        "edge" => [-1., -1., -1., -1., 8., -1., -1., -1., -1.],
        "sobel-x" => [-1., 0., 1., -2., 0., 2., -1., 0., 1.],
        "sharpen" => [0., -1., 0., -1., 5., -1., 0., -1., 0.],
        "blur" => [1. / 9.; 9],
        _ => return None,
    })
}

/// Grey-level convolution with the named kernel, then ReLU and 2x2 max
/// pooling, rescaled to 0..=255. Returns RGBA of size
/// `(width / 2) x (height / 2)`.
#[wasm_bindgen]
pub fn feature_map(
    rgba: &[u8],
    width: usize,
    height: usize,
    kernel_name: &str,
) -> Result<Vec<u8>, String> {
    let k = kernel(kernel_name)
        .ok_or_else(|| format!("unknown kernel `{kernel_name}`, expected one of {KERNELS:?}"))?;
    let img = rgba_to_rgb(rgba, width, height)?;
    let grey: Vec<f32> = img
        .data()
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0)
        .collect();
    let x = Tensor::new([1, height, width, 1], grey).map_err(|e| e.to_string())?;
    let k = Tensor::new([3, 3, 1, 1], k.to_vec()).unwrap();
    let bias = Tensor::zeros([1]);
    let conv = conv2d_same(&x, &k, &bias).map_err(|e| e.to_string())?;
    let pooled = maxpool_2x2(&relu(&conv)).map_err(|e| e.to_string())?;
    let max = pooled.data().iter().copied().fold(0.0f32, f32::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    Ok(pooled
        .data()
        .iter()
        .flat_map(|&v| {
            let g = (v * scale).round() as u8;
            [g, g, g, 255]
        })
        .collect())
}

/// Trains a small head on 3-class Gaussian blobs (60 train, 20
/// validation) until `epochs` or validation accuracy `threshold`. Returns
/// `[train_loss, val_accuracy]` per epoch, flattened.
#[wasm_bindgen]
pub fn train_blobs(
    separation: f64,
    noise: f64,
    epochs: usize,
    threshold: f64,
    seed: u32,
) -> Result<Vec<f64>, String> {
    if !(noise >= 0.0 && noise.is_finite() && separation.is_finite()) {
        return Err("separation and noise must be finite, noise >= 0".into());
    }
    let blobs = Blobs {
        classes: 3,
        dim: 32,
        separation,
        noise,
        seed: seed.into(),
    };
    let (mut train, mut val) = (blobs.sample(60, 0), blobs.sample(20, 1));
    let dims = HeadDims {
        features: 32,
        hidden1: 64,
        hidden2: 64,
        classes: 3,
    };
    let cfg = TrainConfig {
        max_epochs: epochs,
        batch_size: 20,
        early_stop_val_accuracy: threshold,
        rng_seed: seed.into(),
        ..TrainConfig::default()
    };
    let mut curve = Vec::with_capacity(epochs * 2);
    let mut record = |m: &EpochMetrics| {
        curve.extend([m.train_loss, m.val_accuracy]);
        Flow::Continue
    };
    fit(dims, &mut train, &mut val, &cfg, &mut [&mut record]).map_err(|e| e.to_string())?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(w: usize, h: usize) -> Vec<u8> {
        (0..w * h)
            .flat_map(|i| {
                let v = if (i % w / 4 + i / w / 4).is_multiple_of(2) {
                    230
                } else {
                    20
                };
                [v, v / 2, 255 - v, 255]
            })
            .collect()
    }

    #[test]
    fn zoom_preview_is_seeded() {
        let img = checker(16, 12);
        let a = zoom_preview(&img, 16, 12, 0.3, 4).unwrap();
        assert_eq!(a.len(), img.len());
        assert_eq!(a, zoom_preview(&img, 16, 12, 0.3, 4).unwrap());
        assert_eq!(zoom_preview(&img, 16, 12, 0.0, 4).unwrap(), img);
        assert!(zoom_preview(&img, 15, 12, 0.3, 4).is_err());
    }

    #[test]
    fn feature_map_sizes_and_kernels() {
        let img = checker(16, 12);
        for name in KERNELS {
            let out = feature_map(&img, 16, 12, name).unwrap();
            assert_eq!(out.len(), 8 * 6 * 4, "{name}");
        }
        let flat = vec![128u8; 8 * 8 * 4];
        let edges = feature_map(&flat, 8, 8, "sobel-x").unwrap();
        // Only the zero-padded right border responds on a flat image.
        assert!(edges.chunks(4).any(|p| p[0] == 0));
        assert!(feature_map(&img, 16, 12, "emboss").is_err());
    }

    #[test]
    fn blob_training_curve() {
        let curve = train_blobs(0.5, 1.0, 10, 1.0, 1).unwrap();
        assert_eq!(curve.len(), 20);
        assert!(curve[18] < curve[0]);

        let curve = train_blobs(4.0, 0.5, 50, 0.9, 1).unwrap();
        let epochs = curve.len() / 2;
        assert!(epochs < 50);
        assert!(curve[2 * epochs - 1] >= 0.9);
        assert!(train_blobs(1.0, 1.0, 5, 1.5, 0).is_err());
    }
}
