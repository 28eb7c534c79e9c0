//! Frozen VGG16 convolutional feature extractor (configuration D, no
//! classifier). Forward only; weights are never written.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::tensor::Tensor;
use crate::weights::{load_weights, WeightStore};

pub const INPUT_SIZE: usize = 224;
pub const FEATURE_SIZE: usize = 7;
pub const FEATURE_CHANNELS: usize = 512;

/// One 3×3 same-padded convolution followed by ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayer {
    pub block: usize,
    pub index: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvLayer {
    pub fn name(&self) -> String {
        format!("block{}_conv{}", self.block, self.index)
    }

    pub fn kernel_name(&self) -> String {
        format!("{}/kernel", self.name())
    }

    pub fn bias_name(&self) -> String {
        format!("{}/bias", self.name())
    }

    pub fn kernel_dims(&self) -> [usize; 4] {
        [3, 3, self.in_channels, self.out_channels]
    }
}

/// Output widths per block; each block ends in a 2×2 stride-2 max-pool.
const BLOCKS: [&[usize]; 5] = [
    &[64, 64],
    &[128, 128],
    &[256, 256, 256],
    &[512, 512, 512],
    &[512, 512, 512],
];

/// The fixed 13-layer schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvConfig {
    layers: Vec<ConvLayer>,
}

impl ConvConfig {
    pub fn vgg16() -> Self {
        let mut layers = Vec::with_capacity(13);
        let mut cin = 3;
        for (b, widths) in BLOCKS.iter().enumerate() {
            for (j, &cout) in widths.iter().enumerate() {
                layers.push(ConvLayer {
                    block: b + 1,
                    index: j + 1,
                    in_channels: cin,
                    out_channels: cout,
                });
                cin = cout;
            }
        }
        ConvConfig { layers }
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    /// Whether `layer` is the last convolution of its block.
    pub fn ends_block(&self, layer: &ConvLayer) -> bool {
        BLOCKS[layer.block - 1].len() == layer.index
    }

    /// `(name, dims)` for every tensor of a complete weight set, in order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    (l.kernel_name(), l.kernel_dims().to_vec()),
                    (l.bias_name(), vec![l.out_channels]),
                ]
            })
            .collect()
    }
}

/// Checks that `store` holds exactly the VGG16 tensors with the right dims.
pub fn validate_backbone(store: &WeightStore) -> Result<(), FormatError> {
    let specs = ConvConfig::vgg16().tensor_specs();
    for (name, dims) in &specs {
        store.require_dims(name, dims)?;
    }
    if let Some(extra) = store.names().find(|n| !specs.iter().any(|(s, _)| s == n)) {
        return Err(FormatError::UnexpectedTensor {
            name: extra.to_string(),
        });
    }
    Ok(())
}

/// Loads a BCNW file and validates it as a VGG16 weight set.
pub fn load_backbone(path: impl AsRef<Path>) -> Result<WeightStore, FormatError> {
    let store = load_weights(path)?;
    validate_backbone(&store)?;
    Ok(store)
}

/// Pixels per GEMM call; bounds the patch buffer at a few MB.
const TILE_PIXELS: usize = 256;

/// Stride-1 cross-correlation with zero padding that preserves the spatial
/// dims. Products are accumulated in 64-bit.
pub fn conv2d_same(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [b, h, w, cin] = dims4(x, "conv2d_same input")?;
    let [kh, kw, kcin, cout] = dims4(kernel, "conv2d_same kernel")?;
    if kcin != cin {
        return Err(Error::shape(format!(
            "conv2d_same: input {:?} has {cin} channels, kernel {:?} expects {kcin}",
            x.dims(),
            kernel.dims()
        )));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::shape(format!(
            "conv2d_same: kernel {:?} must have odd spatial dims",
            kernel.dims()
        )));
    }
    if bias.dims() != [cout] {
        return Err(Error::shape(format!(
            "conv2d_same: bias {:?} does not match {cout} output channels",
            bias.dims()
        )));
    }
    let (ph, pw) = ((kh - 1) / 2, (kw - 1) / 2);
    let patch = kh * kw * cin;
    let kmat: Vec<f64> = kernel.data().iter().map(|&v| v as f64).collect();
    let bias64: Vec<f64> = bias.data().iter().map(|&v| v as f64).collect();
    let xd = x.data();

    let rows_per_tile = (TILE_PIXELS / w).max(1);
    let mut patches = vec![0.0f64; rows_per_tile * w * patch];
    let mut acc = vec![0.0f64; rows_per_tile * w * cout];
    let mut out = Vec::with_capacity(b * h * w * cout);

    for n in 0..b {
        let img = &xd[n * h * w * cin..(n + 1) * h * w * cin];
        let mut y0 = 0;
        while y0 < h {
            let rows = rows_per_tile.min(h - y0);
            let pixels = rows * w;
            // im2col: one row of `patch` values per output pixel, ordered
            // (ky, kx, c) to match the kernel's row-major layout.
            for r in 0..rows {
                let y = y0 + r;
                for xo in 0..w {
                    let dst = &mut patches[(r * w + xo) * patch..(r * w + xo + 1) * patch];
                    for ky in 0..kh {
                        let iy = y as isize + ky as isize - ph as isize;
                        for kx in 0..kw {
                            let ix = xo as isize + kx as isize - pw as isize;
                            let seg = &mut dst[(ky * kw + kx) * cin..(ky * kw + kx + 1) * cin];
                            if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                seg.fill(0.0);
                            } else {
                                let src = (iy as usize * w + ix as usize) * cin;
                                for (d, &s) in seg.iter_mut().zip(&img[src..src + cin]) {
                                    *d = s as f64;
                                }
                            }
                        }
                    }
                }
            }
            for row in acc[..pixels * cout].chunks_exact_mut(cout) {
                row.copy_from_slice(&bias64);
            }
            // SAFETY: patches is pixels×patch, kmat is patch×cout and acc is
            // pixels×cout, all row-major and non-overlapping.
            unsafe {
                matrixmultiply::dgemm(
                    pixels,
                    patch,
                    cout,
                    1.0,
                    patches.as_ptr(),
                    patch as isize,
                    1,
                    kmat.as_ptr(),
                    cout as isize,
                    1,
                    1.0,
                    acc.as_mut_ptr(),
                    cout as isize,
                    1,
                );
            }
            out.extend(acc[..pixels * cout].iter().map(|&v| v as f32));
            y0 += rows;
        }
    }
    Tensor::new([b, h, w, cout], out)
}

/// 2×2 window, stride 2; a trailing odd row or column is dropped.
pub fn maxpool_2x2(x: &Tensor) -> Result<Tensor> {
    let [b, h, w, c] = dims4(x, "maxpool_2x2 input")?;
    if h < 2 || w < 2 {
        return Err(Error::shape(format!(
            "maxpool_2x2 needs height and width >= 2, got {:?}",
            x.dims()
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let at = |n: usize, y: usize, xx: usize| ((n * h + y) * w + xx) * c;
    let mut out = Vec::with_capacity(b * oh * ow * c);
    for n in 0..b {
        for y in 0..oh {
            for xo in 0..ow {
                let corners = [
                    at(n, 2 * y, 2 * xo),
                    at(n, 2 * y, 2 * xo + 1),
                    at(n, 2 * y + 1, 2 * xo),
                    at(n, 2 * y + 1, 2 * xo + 1),
                ];
                for ch in 0..c {
                    let m = corners
                        .iter()
                        .map(|&o| xd[o + ch])
                        .fold(f32::NEG_INFINITY, f32::max);
                    out.push(m);
                }
            }
        }
    }
    Tensor::new([b, oh, ow, c], out)
}

/// VGG16 features for preprocessed `[b, 224, 224, 3]` input: `[b, 7, 7, 512]`.
pub fn vgg16_forward(x: &Tensor, weights: &WeightStore) -> Result<Tensor> {
    match x.dims() {
        [_, INPUT_SIZE, INPUT_SIZE, 3] => forward_features(x, weights),
        d => Err(Error::shape(format!(
            "vgg16_forward expects [b, {INPUT_SIZE}, {INPUT_SIZE}, 3], got {d:?}"
        ))),
    }
}

/// The same conv/pool stack on any `[b, h, w, 3]` input with `h, w >= 32`.
/// Output is `[b, h/32, w/32, 512]` (floored at every pool).
pub fn forward_features(x: &Tensor, weights: &WeightStore) -> Result<Tensor> {
    match x.dims() {
        [_, h, w, 3] if *h >= 32 && *w >= 32 => {}
        d => {
            return Err(Error::shape(format!(
                "backbone input must be [b, h>=32, w>=32, 3], got {d:?}"
            )))
        }
    }
    validate_backbone(weights)?;
    let config = ConvConfig::vgg16();
    let mut act = x.clone();
    for layer in config.layers() {
        let kernel = weights.require(&layer.kernel_name())?;
        let bias = weights.require(&layer.bias_name())?;
        act = conv2d_same(&act, kernel, bias)?;
        for v in act.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        if config.ends_block(layer) {
            act = maxpool_2x2(&act)?;
        }
    }
    Ok(act)
}

fn dims4(t: &Tensor, what: &str) -> Result<[usize; 4]> {
    t.dims()
        .try_into()
        .map_err(|_| Error::shape(format!("{what} must be rank 4, got {:?}", t.dims())))
}
