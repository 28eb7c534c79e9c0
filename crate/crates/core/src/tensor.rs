//! Dense row-major tensors and the handful of primitives the backbone and
//! head are built from.
//!
//! Layout is channel-last: a rank-4 activation is `[batch, height, width,
//! channel]` with the channel index contiguous in memory.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{Error, Result};

/// Element type of a [`Tensor`]. Storage is normally `f32`; `f64` is used by
/// gradient checks.
pub trait Real:
    Copy
    + Default
    + PartialOrd
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn of(v: f64) -> Self;
    fn widen(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T: Real = f32> {
    dims: Vec<usize>,
    data: Vec<T>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > 4 {
        return Err(Error::shape(format!(
            "rank must be 1..=4, got dims {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::shape(format!("zero dimension in {dims:?}")));
    }
    Ok(dims.iter().product())
}

impl<T: Real> Tensor<T> {
    pub fn new(dims: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let dims = dims.into();
        let count = check_dims(&dims)?;
        if count != data.len() {
            return Err(Error::shape(format!(
                "dims {dims:?} need {count} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    /// Panics on invalid dims; for shapes known statically.
    pub fn full(dims: impl Into<Vec<usize>>, value: T) -> Self {
        let dims = dims.into();
        let count = check_dims(&dims).expect("invalid tensor dims");
        Tensor {
            dims,
            data: vec![value; count],
        }
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Self {
        Self::full(dims, T::ZERO)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Rows and columns of a rank-2 tensor.
    pub fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.dims[..] {
            [m, n] => Ok((m, n)),
            _ => Err(Error::shape(format!(
                "expected a rank-2 tensor, got dims {:?}",
                self.dims
            ))),
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = *self.dims.last().unwrap();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        let count = check_dims(&dims)?;
        if count != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} ({} elements) to {dims:?} ({count} elements)",
                self.dims,
                self.data.len()
            )));
        }
        Ok(Tensor {
            dims,
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| U::of(v.widen())).collect(),
        }
    }

    pub fn transpose(&self) -> Result<Self> {
        let (m, n) = self.matrix_dims()?;
        let mut out = vec![T::ZERO; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor {
            dims: vec![n, m],
            data: out,
        })
    }

    /// Adds `bias` to every row of a rank-2 tensor.
    pub fn add_row_bias(&mut self, bias: &Tensor<T>) -> Result<()> {
        let (_, n) = self.matrix_dims()?;
        if bias.dims != [n] {
            return Err(Error::shape(format!(
                "bias dims {:?} do not match row width {n}",
                bias.dims
            )));
        }
        for row in self.data.chunks_exact_mut(n) {
            for (v, &b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Column sums of a rank-2 tensor, accumulated in 64-bit.
    pub fn sum_rows(&self) -> Result<Self> {
        let (_, n) = self.matrix_dims()?;
        let mut acc = vec![0.0f64; n];
        for row in self.data.chunks_exact(n) {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v.widen();
            }
        }
        Ok(Tensor {
            dims: vec![n],
            data: acc.into_iter().map(T::of).collect(),
        })
    }

    /// First non-finite element, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                index,
                value: self.data[index].widen(),
            }),
            None => Ok(()),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        assert_eq!(self.dims, other.dims, "max_abs_diff on mismatched dims");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.widen() - b.widen()).abs())
            .fold(0.0, f64::max)
    }
}

impl<T: Real> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?}[", self.dims)?;
        for (i, v) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", ...")?;
        }
        write!(f, "]")
    }
}

/// `c[i,j] = Σ_p a[i,p]·b[p,j]`, each output accumulated in 64-bit.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = a.matrix_dims()?;
    let (k2, n) = b.matrix_dims()?;
    if k != k2 {
        return Err(Error::shape(format!(
            "matmul inner dims differ: {:?} x {:?}",
            a.dims, b.dims
        )));
    }
    let mut out = Vec::with_capacity(m * n);
    let mut acc = vec![0.0f64; n];
    for i in 0..m {
        acc.fill(0.0);
        for (p, &av) in a.row(i).iter().enumerate() {
            let av = av.widen();
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (c, &bv) in acc.iter_mut().zip(brow) {
                *c += av * bv.widen();
            }
        }
        out.extend(acc.iter().map(|&v| T::of(v)));
    }
    Ok(Tensor {
        dims: vec![m, n],
        data: out,
    })
}

/// `max(0, x)` elementwise; NaN passes through.
pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v < T::ZERO { T::ZERO } else { v })
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, n) = x.matrix_dims()?;
    x.check_finite()?;
    let mut out = Vec::with_capacity(x.len());
    let mut exps = vec![0.0f64; n];
    for row in x.data.chunks_exact(n) {
        let max = row
            .iter()
            .map(|v| v.widen())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (e, &v) in exps.iter_mut().zip(row) {
            *e = (v.widen() - max).exp();
            sum += *e;
        }
        out.extend(exps.iter().map(|&e| T::of(e / sum)));
    }
    Ok(Tensor {
        dims: x.dims.clone(),
        data: out,
    })
}
