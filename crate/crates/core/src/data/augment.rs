use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub zoom_range: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            zoom_range: 0.2,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn is_identity(&self) -> bool {
        self.zoom_range == 0.0
    }

    /// Generator for one pass over the data; passes draw from independent
    /// streams of the same seed.
    pub fn pass_rng(&self, pass: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(pass as u64);
        rng
    }
}

/// Row and column zoom factors, each uniform in
/// `[1 - zoom_range, 1 + zoom_range]`.
pub fn sample_zoom(zoom_range: f64, rng: &mut impl RngCore) -> (f64, f64) {
    let lo = 1.0 - zoom_range;
    let span = 2.0 * zoom_range;
    let zy = lo + span * rng.random::<f64>();
    let zx = lo + span * rng.random::<f64>();
    (zy, zx)
}

/// Centre-anchored zoom of a `[h, w, c]` image. Output pixel `(i, j)` reads
/// the source at `centre + factor * (offset from centre)`, rounded to the
/// nearest pixel and clamped to the border. Factors above 1 zoom out.
pub fn apply_zoom(x: &Tensor, zy: f64, zx: f64) -> Tensor {
    let [h, w, c]: [usize; 3] = x.dims().try_into().expect("apply_zoom expects [h, w, c]");
    let src_index = |i: usize, n: usize, z: f64| {
        let centre = (n as f64 - 1.0) / 2.0;
        let s = (centre + z * (i as f64 - centre)).round();
        s.clamp(0.0, (n - 1) as f64) as usize
    };
    let rows: Vec<usize> = (0..h).map(|i| src_index(i, h, zy)).collect();
    let cols: Vec<usize> = (0..w).map(|j| src_index(j, w, zx)).collect();
    let src = x.data();
    let mut out = Vec::with_capacity(src.len());
    for &sy in &rows {
        for &sx in &cols {
            let o = (sy * w + sx) * c;
            out.extend_from_slice(&src[o..o + c]);
        }
    }
    Tensor::new(x.dims().to_vec(), out).unwrap()
}

/// Samples factors from `rng` and applies them.
pub fn zoom_augment(x: &Tensor, cfg: &AugmentConfig, rng: &mut impl RngCore) -> Tensor {
    let (zy, zx) = sample_zoom(cfg.zoom_range, rng);
    apply_zoom(x, zy, zx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Tensor {
        Tensor::new([6, 5, 3], (0..90).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn zero_range_is_identity() {
        let cfg = AugmentConfig {
            zoom_range: 0.0,
            rng_seed: 9,
        };
        let x = ramp();
        let mut rng = cfg.pass_rng(0);
        for _ in 0..5 {
            assert_eq!(zoom_augment(&x, &cfg, &mut rng), x);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = AugmentConfig::default();
        let x = ramp();
        let a = zoom_augment(&x, &cfg, &mut cfg.pass_rng(3));
        let b = zoom_augment(&x, &cfg, &mut cfg.pass_rng(3));
        assert_eq!(a, b);
    }

    #[test]
    fn constant_image_unchanged() {
        let x = Tensor::full([8, 8, 3], 42.0f32);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (zy, zx) = sample_zoom(0.5, &mut rng);
            assert_eq!(apply_zoom(&x, zy, zx), x);
        }
    }

    #[test]
    fn zoom_index_arithmetic() {
        // source column = round(1.5 + z * (j - 1.5)), clamped to 0..=3
        let x = Tensor::new([1, 4, 1], vec![10., 20., 30., 40.]).unwrap();
        let y = apply_zoom(&x, 1.0, 0.5);
        assert_eq!(y.data(), &[20., 20., 30., 30.]);
        let y = apply_zoom(&x, 1.0, 2.0);
        assert_eq!(y.data(), &[10., 20., 40., 40.]);
    }
}
