//! Trainable classification head: global average pooling, two ReLU dense
//! layers and a softmax output, with a hand-written backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, FormatError, Result};
use crate::tensor::{matmul, relu, softmax_rows, Real, Tensor};
use crate::weights::WeightStore;

pub const GRADES: [&str; 3] = ["grade_1", "grade_2", "grade_3"];

/// Probabilities are clamped to this before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadDims {
    pub features: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub classes: usize,
}

impl Default for HeadDims {
    fn default() -> Self {
        HeadDims {
            features: 512,
            hidden1: 1024,
            hidden2: 1024,
            classes: 3,
        }
    }
}

impl HeadDims {
    /// Dims of W1, b1, W2, b2, W3, b3.
    pub fn shapes(&self) -> [Vec<usize>; 6] {
        [
            vec![self.features, self.hidden1],
            vec![self.hidden1],
            vec![self.hidden1, self.hidden2],
            vec![self.hidden2],
            vec![self.hidden2, self.classes],
            vec![self.classes],
        ]
    }

    pub fn param_count(&self) -> usize {
        self.shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

pub const PARAM_NAMES: [&str; 6] = [
    "head/W1", "head/b1", "head/W2", "head/b2", "head/W3", "head/b3",
];

/// The six head tensors, in the order W1, b1, W2, b2, W3, b3. Gradients use
/// the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T: Real = f32> {
    dims: HeadDims,
    tensors: [Tensor<T>; 6],
}

pub type HeadGrads<T = f32> = HeadParams<T>;

impl<T: Real> HeadParams<T> {
    pub fn zeros(dims: HeadDims) -> Self {
        HeadParams {
            dims,
            tensors: dims.shapes().map(Tensor::zeros),
        }
    }

    /// Glorot-uniform weights with bound `sqrt(6 / (fan_in + fan_out))`,
    /// zero biases.
    pub fn glorot(dims: HeadDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dims);
        for t in p.tensors.iter_mut().step_by(2) {
            let (fan_in, fan_out) = t.matrix_dims().unwrap();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in t.data_mut() {
                *v = T::of(rng.random_range(-bound..bound));
            }
        }
        p
    }

    pub fn from_tensors(dims: HeadDims, tensors: [Tensor<T>; 6]) -> Result<Self> {
        for ((t, shape), name) in tensors.iter().zip(dims.shapes()).zip(PARAM_NAMES) {
            if t.dims() != shape.as_slice() {
                return Err(Error::shape(format!(
                    "{name} has dims {:?}, expected {shape:?}",
                    t.dims()
                )));
            }
        }
        Ok(HeadParams { dims, tensors })
    }

    pub fn dims(&self) -> HeadDims {
        self.dims
    }

    pub fn tensors(&self) -> &[Tensor<T>; 6] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>; 6] {
        &mut self.tensors
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> HeadParams<U> {
        HeadParams {
            dims: self.dims,
            tensors: [0, 1, 2, 3, 4, 5].map(|i| self.tensors[i].cast()),
        }
    }
}

impl HeadParams<f32> {
    pub fn to_store(&self) -> WeightStore {
        let mut store = WeightStore::new();
        for (name, t) in PARAM_NAMES.iter().zip(&self.tensors) {
            store
                .insert(*name, t.clone())
                .expect("head names are unique");
        }
        store
    }

    /// Reads `head/W1..head/b3`, inferring dims from W1 and W3.
    pub fn from_store(store: &WeightStore) -> Result<Self, FormatError> {
        let w1 = store.require(PARAM_NAMES[0])?;
        let w2 = store.require(PARAM_NAMES[2])?;
        let w3 = store.require(PARAM_NAMES[4])?;
        let mismatch = |name: &str, t: &Tensor| FormatError::ShapeMismatch {
            name: name.to_string(),
            expected: vec![0, 0],
            found: t.dims().to_vec(),
        };
        let (features, hidden1) = w1.matrix_dims().map_err(|_| mismatch(PARAM_NAMES[0], w1))?;
        let (_, hidden2) = w2.matrix_dims().map_err(|_| mismatch(PARAM_NAMES[2], w2))?;
        let (_, classes) = w3.matrix_dims().map_err(|_| mismatch(PARAM_NAMES[4], w3))?;
        let dims = HeadDims {
            features,
            hidden1,
            hidden2,
            classes,
        };
        let shapes = dims.shapes();
        let mut tensors = Vec::with_capacity(6);
        for (name, shape) in PARAM_NAMES.iter().zip(&shapes) {
            tensors.push(store.require_dims(name, shape)?.clone());
        }
        if let Some(extra) = store.names().find(|n| !PARAM_NAMES.contains(n)) {
            return Err(FormatError::UnexpectedTensor {
                name: extra.to_string(),
            });
        }
        Ok(HeadParams {
            dims,
            tensors: tensors.try_into().unwrap(),
        })
    }
}

/// Mean over the spatial positions of each channel: `[b,h,w,c] -> [b,c]`.
pub fn gap<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, h, w, c]: [usize; 4] = x
        .dims()
        .try_into()
        .map_err(|_| Error::shape(format!("gap expects a rank-4 tensor, got {:?}", x.dims())))?;
    let spatial = h * w;
    let mut acc = vec![0.0f64; c];
    let mut out = Vec::with_capacity(b * c);
    for n in 0..b {
        acc.fill(0.0);
        for px in x.data()[n * spatial * c..(n + 1) * spatial * c].chunks_exact(c) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v.widen();
            }
        }
        out.extend(acc.iter().map(|&s| T::of(s / spatial as f64)));
    }
    Tensor::new([b, c], out)
}

/// Intermediates of one forward pass, tied to the parameters that made it.
#[derive(Debug)]
pub struct HeadCache<'p, T: Real = f32> {
    params: &'p HeadParams<T>,
    input: Tensor<T>,
    hidden1: Tensor<T>,
    hidden2: Tensor<T>,
    probs: Tensor<T>,
}

impl<T: Real> HeadCache<'_, T> {
    pub fn probs(&self) -> &Tensor<T> {
        &self.probs
    }
}

fn dense<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let mut z = matmul(x, w)?;
    z.add_row_bias(b)?;
    Ok(z)
}

pub fn head_forward<'p, T: Real>(
    features: &Tensor<T>,
    params: &'p HeadParams<T>,
) -> Result<(Tensor<T>, HeadCache<'p, T>)> {
    let (_, d) = features.matrix_dims()?;
    if d != params.dims.features {
        return Err(Error::shape(format!(
            "head expects {} features per row, got {:?}",
            params.dims.features,
            features.dims()
        )));
    }
    let [w1, b1, w2, b2, w3, b3] = &params.tensors;
    let hidden1 = relu(&dense(features, w1, b1)?);
    let hidden2 = relu(&dense(&hidden1, w2, b2)?);
    let probs = softmax_rows(&dense(&hidden2, w3, b3)?)?;
    Ok((
        probs.clone(),
        HeadCache {
            params,
            input: features.clone(),
            hidden1,
            hidden2,
            probs,
        },
    ))
}

fn check_one_hot<T: Real>(y: &Tensor<T>) -> Result<()> {
    let (m, _) = y.matrix_dims()?;
    for i in 0..m {
        let row = y.row(i);
        let ones = row.iter().filter(|&&v| v == T::ONE).count();
        let zeros = row.iter().filter(|&&v| v == T::ZERO).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::NotOneHot { row: i });
        }
    }
    Ok(())
}

/// Mean categorical cross-entropy with probabilities floored at
/// [`PROB_FLOOR`].
pub fn cross_entropy<T: Real>(probs: &Tensor<T>, labels: &Tensor<T>) -> Result<f64> {
    if probs.dims() != labels.dims() {
        return Err(Error::shape(format!(
            "probs {:?} and labels {:?} differ",
            probs.dims(),
            labels.dims()
        )));
    }
    check_one_hot(labels)?;
    let (m, _) = probs.matrix_dims()?;
    let mut total = 0.0;
    for i in 0..m {
        for (&p, &y) in probs.row(i).iter().zip(labels.row(i)) {
            if y == T::ONE {
                total -= p.widen().max(PROB_FLOOR).ln();
            }
        }
    }
    Ok(total / m as f64)
}

/// Exact gradients of [`cross_entropy`] with respect to every head tensor.
pub fn head_backward<T: Real>(
    cache: &HeadCache<'_, T>,
    labels: &Tensor<T>,
) -> Result<HeadGrads<T>> {
    if cache.probs.dims() != labels.dims() {
        return Err(Error::StaleCache(format!(
            "cache holds probs {:?}, labels are {:?}",
            cache.probs.dims(),
            labels.dims()
        )));
    }
    check_one_hot(labels)?;
    let (b, classes) = labels.matrix_dims()?;
    let scale = 1.0 / b as f64;
    let dlogits = Tensor::new(
        [b, classes],
        cache
            .probs
            .data()
            .iter()
            .zip(labels.data())
            .map(|(&p, &y)| T::of((p.widen() - y.widen()) * scale))
            .collect(),
    )?;
    let [_, _, w2, _, w3, _] = &cache.params.tensors;

    let dw3 = matmul(&cache.hidden2.transpose()?, &dlogits)?;
    let db3 = dlogits.sum_rows()?;
    let dz2 = relu_backward(matmul(&dlogits, &w3.transpose()?)?, &cache.hidden2);
    let dw2 = matmul(&cache.hidden1.transpose()?, &dz2)?;
    let db2 = dz2.sum_rows()?;
    let dz1 = relu_backward(matmul(&dz2, &w2.transpose()?)?, &cache.hidden1);
    let dw1 = matmul(&cache.input.transpose()?, &dz1)?;
    let db1 = dz1.sum_rows()?;

    Ok(HeadParams {
        dims: cache.params.dims,
        tensors: [dw1, db1, dw2, db2, dw3, db3],
    })
}

/// Zeroes `grad` wherever the ReLU output was not positive.
fn relu_backward<T: Real>(mut grad: Tensor<T>, activated: &Tensor<T>) -> Tensor<T> {
    for (g, &a) in grad.data_mut().iter_mut().zip(activated.data()) {
        if a <= T::ZERO {
            *g = T::ZERO;
        }
    }
    grad
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn grade_name(class: usize) -> String {
    GRADES
        .get(class)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("class_{}", class + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub grade: String,
    pub probs: Vec<f32>,
}

/// Labels each feature row by argmax of the head's probabilities.
pub fn predict(params: &HeadParams, features: &Tensor) -> Result<Vec<Prediction>> {
    let (probs, _) = head_forward(features, params)?;
    Ok(predictions_from_probs(&probs))
}

pub fn predictions_from_probs(probs: &Tensor) -> Vec<Prediction> {
    let (m, _) = probs.matrix_dims().expect("probs are rank 2");
    (0..m)
        .map(|i| {
            let row = probs.row(i);
            let class = argmax(row);
            Prediction {
                class,
                grade: grade_name(class),
                probs: row.to_vec(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_head_param_count() {
        assert_eq!(HeadDims::default().param_count(), 1_577_987);
        let p = HeadParams::<f32>::zeros(HeadDims::default());
        assert_eq!(p.param_count(), 1_577_987);
    }

    #[test]
    fn gap_cases() {
        let x = Tensor::full([2, 7, 7, 5], 3.25f32);
        let g = gap(&x).unwrap();
        assert_eq!(g.dims(), &[2, 5]);
        assert!(g.data().iter().all(|&v| v == 3.25));
        let x = Tensor::new([1, 2, 2, 1], vec![1.0f32, 2., 3., 4.]).unwrap();
        assert_eq!(gap(&x).unwrap().data(), &[2.5]);
        let x = Tensor::<f32>::zeros([3, 7, 7, 512]);
        assert_eq!(gap(&x).unwrap().dims(), &[3, 512]);
    }

    #[test]
    fn zero_params_give_uniform_probs() {
        let p = HeadParams::<f32>::zeros(HeadDims::default());
        let f = Tensor::full([2, 512], 1.5f32);
        let (probs, _) = head_forward(&f, &p).unwrap();
        for &v in probs.data() {
            assert!((v as f64 - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let y = Tensor::new([1, 3], vec![0.0f64, 1., 0.]).unwrap();
        assert_eq!(cross_entropy(&y, &y).unwrap(), 0.0);
        let p = Tensor::new([1, 3], vec![0.25f64, 0.5, 0.25]).unwrap();
        assert!((cross_entropy(&p, &y).unwrap() - 2f64.ln()).abs() < 1e-12);
        let u = Tensor::full([1, 3], 1.0f64 / 3.0);
        assert!((cross_entropy(&u, &y).unwrap() - 3f64.ln()).abs() < 1e-12);
        let zero = Tensor::new([1, 3], vec![1.0f64, 0., 0.]).unwrap();
        assert!((cross_entropy(&zero, &y).unwrap() - (-PROB_FLOOR.ln())).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_rejects_soft_labels() {
        let p = Tensor::full([2, 3], 1.0f32 / 3.0);
        let y = Tensor::new([2, 3], vec![1.0f32, 0., 0., 0.5, 0.5, 0.]).unwrap();
        assert!(matches!(
            cross_entropy(&p, &y),
            Err(Error::NotOneHot { row: 1 })
        ));
    }

    #[test]
    fn logit_gradient_is_probs_minus_labels() {
        // Zero hidden layers; b3 steers the logits to ln(0.5, 0.25, 0.25).
        let dims = HeadDims {
            features: 2,
            hidden1: 2,
            hidden2: 2,
            classes: 3,
        };
        let mut p = HeadParams::<f64>::zeros(dims);
        p.tensors_mut()[5] =
            Tensor::new([3], vec![0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()]).unwrap();
        let f = Tensor::new([1, 2], vec![0.3, -0.2]).unwrap();
        let y = Tensor::new([1, 3], vec![1.0, 0.0, 0.0]).unwrap();
        let (_, cache) = head_forward(&f, &p).unwrap();
        let g = head_backward(&cache, &y).unwrap();
        let db3 = g.tensors()[5].data();
        for (got, want) in db3.iter().zip([-0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-12, "{db3:?}");
        }
    }

    #[test]
    fn perfect_prediction_has_zero_gradients() {
        let dims = HeadDims {
            features: 3,
            hidden1: 4,
            hidden2: 4,
            classes: 3,
        };
        let mut p = HeadParams::<f64>::glorot(dims, 3);
        // Saturate class 1 through the output bias only.
        p.tensors_mut()[4] = Tensor::zeros([4, 3]);
        p.tensors_mut()[5] = Tensor::new([3], vec![-1e3, 1e3, -1e3]).unwrap();
        let f = Tensor::new([2, 3], vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.6]).unwrap();
        let y = Tensor::new([2, 3], vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let (probs, cache) = head_forward(&f, &p).unwrap();
        assert_eq!(probs, y);
        let g = head_backward(&cache, &y).unwrap();
        assert!(g
            .tensors()
            .iter()
            .all(|t| t.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn backward_rejects_mismatched_labels() {
        let dims = HeadDims {
            features: 2,
            hidden1: 2,
            hidden2: 2,
            classes: 3,
        };
        let p = HeadParams::<f32>::zeros(dims);
        let (_, cache) = head_forward(&Tensor::zeros([2, 2]), &p).unwrap();
        let y = Tensor::new([1, 3], vec![1.0f32, 0., 0.]).unwrap();
        assert!(matches!(
            head_backward(&cache, &y),
            Err(Error::StaleCache(_))
        ));
    }

    #[test]
    fn predict_tie_break_and_argmax() {
        let probs = Tensor::new([2, 3], vec![0.1f32, 0.7, 0.2, 1. / 3., 1. / 3., 1. / 3.]).unwrap();
        let preds = predictions_from_probs(&probs);
        assert_eq!(preds[0].grade, "grade_2");
        assert_eq!(preds[1].grade, "grade_1");

        let p = HeadParams::zeros(HeadDims::default());
        let preds = predict(&p, &Tensor::full([3, 512], 0.7)).unwrap();
        assert!(preds.iter().all(|q| q.grade == "grade_1"));
    }

    #[test]
    fn store_round_trip() {
        let dims = HeadDims {
            features: 4,
            hidden1: 5,
            hidden2: 6,
            classes: 3,
        };
        let p = HeadParams::<f32>::glorot(dims, 11);
        let store = p.to_store();
        assert_eq!(store.names().collect::<Vec<_>>(), PARAM_NAMES);
        assert_eq!(HeadParams::from_store(&store).unwrap(), p);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let dims = HeadDims::default();
        let p = HeadParams::<f32>::glorot(dims, 0);
        let bound = (6.0f32 / (512.0 + 1024.0)).sqrt();
        assert!(p.tensors()[0].data().iter().all(|v| v.abs() <= bound));
        assert!(p.tensors()[1].data().iter().all(|&v| v == 0.0));
        assert_eq!(p, HeadParams::glorot(dims, 0));
    }
}
