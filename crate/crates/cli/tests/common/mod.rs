//! Fixtures and brute-force reference kernels shared by the CLI tests and
//! the acceptance suite.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use histograde::fixtures::{random_backbone, write_image_fixture};
use histograde::weights::save_weights;
use histograde::Tensor;

pub const CLASSES: [&str; 3] = ["grade_1", "grade_2", "grade_3"];

/// A 12-image, 3-class dataset and a random backbone file under `root`.
pub struct Fixture {
    pub data: PathBuf,
    pub weights: PathBuf,
}

pub fn fixture(root: &Path) -> Fixture {
    let data = root.join("data");
    write_image_fixture(&data, &CLASSES, 4, 48, 7).unwrap();
    let weights = root.join("vgg16.bcnw");
    save_weights(&weights, &random_backbone(3)).unwrap();
    Fixture { data, weights }
}

pub fn naive_matmul(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let (m, k) = a.matrix_dims().unwrap();
    let (_, n) = b.matrix_dims().unwrap();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += a.data()[i * k + p] * b.data()[p * n + j];
            }
        }
    }
    Tensor::new([m, n], out).unwrap()
}

/// Zero-padded stride-1 convolution straight from the definition.
pub fn naive_conv(x: &Tensor<f64>, k: &Tensor<f64>, bias: &Tensor<f64>) -> Tensor<f64> {
    let [b, h, w, cin]: [usize; 4] = x.dims().try_into().unwrap();
    let [kh, kw, _, cout]: [usize; 4] = k.dims().try_into().unwrap();
    let (ph, pw) = (kh / 2, kw / 2);
    let xd = x.data();
    let kd = k.data();
    let mut out = vec![0.0; b * h * w * cout];
    for n in 0..b {
        for i in 0..h {
            for j in 0..w {
                for o in 0..cout {
                    let mut acc = bias.data()[o];
                    for di in 0..kh {
                        for dj in 0..kw {
                            let (si, sj) = (i + di, j + dj);
                            if si < ph || sj < pw || si - ph >= h || sj - pw >= w {
                                continue;
                            }
                            let (si, sj) = (si - ph, sj - pw);
                            for c in 0..cin {
                                acc += xd[((n * h + si) * w + sj) * cin + c]
                                    * kd[((di * kw + dj) * cin + c) * cout + o];
                            }
                        }
                    }
                    out[((n * h + i) * w + j) * cout + o] = acc;
                }
            }
        }
    }
    Tensor::new([b, h, w, cout], out).unwrap()
}

pub fn naive_maxpool(x: &Tensor<f64>) -> Tensor<f64> {
    let [b, h, w, c]: [usize; 4] = x.dims().try_into().unwrap();
    let (oh, ow) = (h / 2, w / 2);
    let at = |n: usize, i: usize, j: usize, ch: usize| x.data()[((n * h + i) * w + j) * c + ch];
    let mut out = Vec::with_capacity(b * oh * ow * c);
    for n in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|&(di, dj)| at(n, 2 * i + di, 2 * j + dj, ch))
                        .fold(f64::NEG_INFINITY, f64::max);
                    out.push(m);
                }
            }
        }
    }
    Tensor::new([b, oh, ow, c], out).unwrap()
}

pub fn naive_gap(x: &Tensor<f64>) -> Tensor<f64> {
    let [b, h, w, c]: [usize; 4] = x.dims().try_into().unwrap();
    let mut out = vec![0.0; b * c];
    for n in 0..b {
        for p in 0..h * w {
            for ch in 0..c {
                out[n * c + ch] += x.data()[(n * h * w + p) * c + ch];
            }
        }
    }
    Tensor::new(
        [b, c],
        out.into_iter().map(|v| v / (h * w) as f64).collect(),
    )
    .unwrap()
}
