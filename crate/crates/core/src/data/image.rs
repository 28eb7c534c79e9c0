//! Image decoding, nearest-neighbour resizing and the backbone's
//! channel-swap / mean-subtraction preprocessing.

use std::path::Path;

use crate::error::DataError;
use crate::tensor::Tensor;

pub const TARGET_SIZE: usize = 224;

/// Per-channel means subtracted after the RGB → BGR swap, in BGR order.
pub const BGR_MEANS: [f32; 3] = [103.939, 116.779, 123.68];

/// Decoded 8-bit RGB pixels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
        let rgb = img.to_rgb8();
        Ok(RgbImage {
            width: rgb.width() as usize,
            height: rgb.height() as usize,
            pixels: rgb.into_raw(),
        })
    }

    pub fn open(path: &Path) -> Result<Self, DataError> {
        let bytes = std::fs::read(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode(&bytes).map_err(|message| DataError::Decode {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Rounds and clamps a `[height, width, 3]` tensor to 8-bit pixels.
    pub fn from_tensor(x: &Tensor) -> Self {
        let [height, width, c]: [usize; 3] =
            x.dims().try_into().expect("from_tensor expects [h, w, 3]");
        assert_eq!(c, 3, "from_tensor expects 3 channels");
        RgbImage {
            width,
            height,
            pixels: x
                .data()
                .iter()
                .map(|v| v.round().clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), DataError> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| DataError::Encode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// `[height, width, 3]` tensor with values 0..=255.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            [self.height, self.width, 3],
            self.pixels.iter().map(|&v| v as f32).collect(),
        )
        .expect("image dims are non-zero")
    }
}

/// Source index for output index `i` when scaling `src` samples to `dst`:
/// the sample under the output pixel's centre.
pub fn nearest_index(i: usize, src: usize, dst: usize) -> usize {
    let pos = (i as f64 + 0.5) * src as f64 / dst as f64;
    (pos.floor() as usize).min(src - 1)
}

pub fn resize_nearest(img: &RgbImage, width: usize, height: usize) -> RgbImage {
    let mut pixels = Vec::with_capacity(width * height * 3);
    let cols: Vec<usize> = (0..width)
        .map(|x| nearest_index(x, img.width, width))
        .collect();
    for y in 0..height {
        let sy = nearest_index(y, img.height, height);
        let row = &img.pixels[sy * img.width * 3..(sy + 1) * img.width * 3];
        for &sx in &cols {
            pixels.extend_from_slice(&row[sx * 3..sx * 3 + 3]);
        }
    }
    RgbImage {
        width,
        height,
        pixels,
    }
}

/// Decodes `path` and resizes it to `[224, 224, 3]` RGB, values 0..=255.
pub fn load_resize(path: impl AsRef<Path>) -> Result<Tensor, DataError> {
    let img = RgbImage::open(path.as_ref())?;
    Ok(resize_nearest(&img, TARGET_SIZE, TARGET_SIZE).to_tensor())
}

/// RGB → BGR, then subtract [`BGR_MEANS`]. No scaling. Last dim must be 3.
pub fn preprocess_vgg(x: &Tensor) -> Tensor {
    assert_eq!(x.dims().last(), Some(&3), "preprocess_vgg needs 3 channels");
    let mut out = x.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let [r, g, b] = [px[0], px[1], px[2]];
        px[0] = b - BGR_MEANS[0];
        px[1] = g - BGR_MEANS[1];
        px[2] = r - BGR_MEANS[2];
    }
    out
}

/// Inverse of [`preprocess_vgg`].
pub fn unprocess_vgg(x: &Tensor) -> Tensor {
    assert_eq!(x.dims().last(), Some(&3), "unprocess_vgg needs 3 channels");
    let mut out = x.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let [b, g, r] = [
            px[0] + BGR_MEANS[0],
            px[1] + BGR_MEANS[1],
            px[2] + BGR_MEANS[2],
        ];
        px[0] = r;
        px[1] = g;
        px[2] = b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(width: usize, height: usize, rgb: [u8; 3]) -> RgbImage {
        RgbImage {
            width,
            height,
            pixels: rgb.repeat(width * height),
        }
    }

    #[test]
    fn identity_size_keeps_pixels() {
        let pixels: Vec<u8> = (0..224 * 224 * 3).map(|i| (i * 7 % 251) as u8).collect();
        let img = RgbImage {
            width: 224,
            height: 224,
            pixels,
        };
        assert_eq!(resize_nearest(&img, 224, 224), img);
    }

    #[test]
    fn narrow_solid_red_fills_output() {
        let out = resize_nearest(&solid(2, 5, [255, 0, 0]), 224, 224);
        assert!(out.pixels.chunks(3).all(|p| p == [255, 0, 0]));
    }

    #[test]
    fn preprocess_known_pixels() {
        let x = Tensor::new([3, 3], vec![255., 255., 255., 0., 0., 0., 255., 0., 0.]).unwrap();
        let y = preprocess_vgg(&x);
        let want = [
            151.061, 138.221, 131.32, -103.939, -116.779, -123.68, -103.939, -116.779, 131.32,
        ];
        for (a, b) in y.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn unprocess_inverts() {
        let x = Tensor::new([2, 3], vec![12., 200., 7., 0., 255., 128.]).unwrap();
        assert!(unprocess_vgg(&preprocess_vgg(&x)).max_abs_diff(&x) < 1e-4);
    }
}
