//! Epoch loop: shuffled mini-batches, forward/backward/Adam per batch,
//! validation after every epoch and the validation-accuracy early stop.

use std::io::{self, Write};

use crate::adam::{AdamConfig, AdamState};
use crate::data::epoch_order;
use crate::error::{Error, Result};
use crate::head::{argmax, cross_entropy, head_backward, head_forward, HeadDims, HeadParams};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub early_stop_val_accuracy: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds weight init and the per-epoch training order.
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 50,
            batch_size: 52,
            early_stop_val_accuracy: 0.88,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.early_stop_val_accuracy) {
            return Err(Error::Config(format!(
                "early-stop threshold {} must be in [0, 1]",
                self.early_stop_val_accuracy
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must be in [0, 1)".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("adam epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// A source of `(features [b, d], one-hot labels [b, classes])` batches.
pub trait FeatureStream {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Visits the samples in `order` (indices into the stream) in batches
    /// of at most `batch_size`. `pass` distinguishes epochs for any
    /// per-pass randomness the stream applies.
    fn for_each_batch(
        &mut self,
        pass: usize,
        order: &[usize],
        batch_size: usize,
        visit: &mut dyn FnMut(&Tensor, &Tensor) -> Result<()>,
    ) -> Result<()>;
}

/// Precomputed features held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Tensor,
    pub labels: Tensor,
}

impl FeatureSet {
    pub fn new(features: Tensor, labels: Tensor) -> Result<Self> {
        let (n, _) = features.matrix_dims()?;
        let (m, _) = labels.matrix_dims()?;
        if n != m {
            return Err(Error::shape(format!("{n} feature rows but {m} label rows")));
        }
        Ok(FeatureSet { features, labels })
    }

    pub fn rows(&self, idx: &[usize]) -> (Tensor, Tensor) {
        (
            gather_rows(&self.features, idx),
            gather_rows(&self.labels, idx),
        )
    }
}

pub fn gather_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let (_, n) = t.matrix_dims().expect("gather_rows on rank-2 tensor");
    let mut out = Vec::with_capacity(idx.len() * n);
    for &i in idx {
        out.extend_from_slice(t.row(i));
    }
    Tensor::new([idx.len(), n], out).expect("non-empty selection")
}

impl FeatureStream for FeatureSet {
    fn len(&self) -> usize {
        self.features.dims()[0]
    }

    fn for_each_batch(
        &mut self,
        _pass: usize,
        order: &[usize],
        batch_size: usize,
        visit: &mut dyn FnMut(&Tensor, &Tensor) -> Result<()>,
    ) -> Result<()> {
        for chunk in order.chunks(batch_size) {
            let (f, y) = self.rows(chunk);
            visit(&f, &y)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Called after every completed epoch.
pub trait EpochCallback {
    fn on_epoch_end(&mut self, metrics: &EpochMetrics) -> Flow;
}

impl<F: FnMut(&EpochMetrics) -> Flow> EpochCallback for F {
    fn on_epoch_end(&mut self, metrics: &EpochMetrics) -> Flow {
        self(metrics)
    }
}

/// Loss and accuracy accumulated over samples.
#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    loss_sum: f64,
    correct: usize,
    seen: usize,
}

impl Tally {
    fn add(&mut self, batch_loss: f64, probs: &Tensor, labels: &Tensor) {
        let (b, _) = labels.matrix_dims().unwrap();
        self.loss_sum += batch_loss * b as f64;
        self.correct += (0..b)
            .filter(|&i| argmax(probs.row(i)) == argmax(labels.row(i)))
            .count();
        self.seen += b;
    }

    fn loss(&self) -> f64 {
        self.loss_sum / self.seen as f64
    }

    fn accuracy(&self) -> f64 {
        self.correct as f64 / self.seen as f64
    }
}

/// Mean cross-entropy and argmax accuracy over the whole stream, in order.
pub fn evaluate(
    params: &HeadParams,
    stream: &mut dyn FeatureStream,
    batch_size: usize,
) -> Result<(f64, f64)> {
    if stream.is_empty() {
        return Err(Error::EmptyStream("evaluation"));
    }
    let order: Vec<usize> = (0..stream.len()).collect();
    let mut tally = Tally::default();
    stream.for_each_batch(0, &order, batch_size.max(1), &mut |f, y| {
        let (probs, _) = head_forward(f, params)?;
        tally.add(cross_entropy(&probs, y)?, &probs, y);
        Ok(())
    })?;
    Ok((tally.loss(), tally.accuracy()))
}

/// Trains a freshly initialised head of the given dims.
pub fn fit(
    dims: HeadDims,
    train: &mut dyn FeatureStream,
    validation: &mut dyn FeatureStream,
    cfg: &TrainConfig,
    callbacks: &mut [&mut dyn EpochCallback],
) -> Result<(HeadParams, Vec<EpochMetrics>)> {
    cfg.validate()?;
    let params = HeadParams::glorot(dims, cfg.rng_seed);
    fit_from(params, train, validation, cfg, callbacks)
}

/// Continues training `params`. Stops after `cfg.max_epochs` epochs, after
/// the first epoch whose validation accuracy reaches
/// `cfg.early_stop_val_accuracy`, or when a callback returns
/// [`Flow::Stop`].
pub fn fit_from(
    mut params: HeadParams,
    train: &mut dyn FeatureStream,
    validation: &mut dyn FeatureStream,
    cfg: &TrainConfig,
    callbacks: &mut [&mut dyn EpochCallback],
) -> Result<(HeadParams, Vec<EpochMetrics>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyStream("training"));
    }
    if validation.is_empty() {
        return Err(Error::EmptyStream("validation"));
    }
    let mut adam = AdamState::new(cfg.adam(), params.tensors().iter());
    let mut history = Vec::new();
    let val_order: Vec<usize> = (0..validation.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let order = epoch_order(train.len(), cfg.rng_seed, epoch);
        let mut tally = Tally::default();
        let mut batch = 0;
        train.for_each_batch(epoch, &order, cfg.batch_size, &mut |f, y| {
            batch += 1;
            let non_finite = |e: Error| match e {
                Error::NonFinite { .. } => Error::NonFiniteLoss { epoch, batch },
                other => other,
            };
            let (probs, cache) = head_forward(f, &params).map_err(non_finite)?;
            let loss = cross_entropy(&probs, y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            tally.add(loss, &probs, y);
            let grads = head_backward(&cache, y)?;
            drop(cache);
            adam.step(params.tensors_mut(), grads.tensors())
        })?;

        let mut val = Tally::default();
        validation.for_each_batch(0, &val_order, cfg.batch_size, &mut |f, y| {
            let (probs, _) = head_forward(f, &params)?;
            val.add(cross_entropy(&probs, y)?, &probs, y);
            Ok(())
        })?;

        let metrics = EpochMetrics {
            epoch,
            train_loss: tally.loss(),
            train_accuracy: tally.accuracy(),
            val_loss: val.loss(),
            val_accuracy: val.accuracy(),
        };
        history.push(metrics);
        let mut stop = metrics.val_accuracy >= cfg.early_stop_val_accuracy;
        for cb in callbacks.iter_mut() {
            stop |= cb.on_epoch_end(&metrics) == Flow::Stop;
        }
        if stop {
            break;
        }
    }
    Ok((params, history))
}

pub const METRICS_HEADER: &str = "epoch,train_loss,train_accuracy,val_loss,val_accuracy";

/// `v` with six significant digits in plain decimal notation.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new digit (9.999995 -> 10.00000)
    let rounded: f64 = s.parse().unwrap();
    if rounded != 0.0 && rounded.abs().log10().floor() as i32 > magnitude && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{v:.decimals$}");
    }
    s
}

pub fn write_metrics_csv(out: &mut impl Write, history: &[EpochMetrics]) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for m in history {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.epoch,
            format_sig6(m.train_loss),
            format_sig6(m.train_accuracy),
            format_sig6(m.val_loss),
            format_sig6(m.val_accuracy)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> HeadDims {
        HeadDims {
            features: 4,
            hidden1: 8,
            hidden2: 8,
            classes: 3,
        }
    }

    fn toy_set(n: usize) -> FeatureSet {
        let mut f = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 3;
            let mut row = vec![0.1f32; 4];
            row[c] = 2.0;
            f.extend(row);
            let mut lab = vec![0.0f32; 3];
            lab[c] = 1.0;
            y.extend(lab);
        }
        FeatureSet::new(
            Tensor::new([n, 4], f).unwrap(),
            Tensor::new([n, 3], y).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let cfg = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        let (p, h) = fit(tiny(), &mut toy_set(6), &mut toy_set(3), &cfg, &mut []).unwrap();
        assert!(h.is_empty());
        assert_eq!(p, HeadParams::glorot(tiny(), cfg.rng_seed));
    }

    #[test]
    fn empty_streams_rejected() {
        let empty = &mut EmptyStream;
        let cfg = TrainConfig::default();
        assert!(matches!(
            fit(tiny(), empty, &mut toy_set(3), &cfg, &mut []),
            Err(Error::EmptyStream("training"))
        ));
        assert!(matches!(
            fit(tiny(), &mut toy_set(3), &mut EmptyStream, &cfg, &mut []),
            Err(Error::EmptyStream("validation"))
        ));
        let p = HeadParams::zeros(tiny());
        assert!(evaluate(&p, &mut EmptyStream, 4).is_err());
    }

    struct EmptyStream;
    impl FeatureStream for EmptyStream {
        fn len(&self) -> usize {
            0
        }
        fn for_each_batch(
            &mut self,
            _: usize,
            _: &[usize],
            _: usize,
            _: &mut dyn FnMut(&Tensor, &Tensor) -> Result<()>,
        ) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn early_stop_and_callbacks() {
        let cfg = TrainConfig {
            max_epochs: 40,
            batch_size: 4,
            early_stop_val_accuracy: 1.0,
            lr: 1e-2,
            ..TrainConfig::default()
        };
        let (_, h) = fit(tiny(), &mut toy_set(12), &mut toy_set(6), &cfg, &mut []).unwrap();
        let k = h.iter().position(|m| m.val_accuracy >= 1.0).unwrap();
        assert_eq!(h.len(), k + 1);

        let mut seen = 0;
        let mut stop_at_two = |m: &EpochMetrics| {
            seen += 1;
            if m.epoch == 2 {
                Flow::Stop
            } else {
                Flow::Continue
            }
        };
        let cfg = TrainConfig { lr: 1e-6, ..cfg };
        let (_, h) = fit(
            tiny(),
            &mut toy_set(12),
            &mut toy_set(6),
            &cfg,
            &mut [&mut stop_at_two],
        )
        .unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(seen, 2);
    }

    #[test]
    fn nan_features_abort_with_location() {
        let mut bad = toy_set(6);
        bad.features.data_mut()[4 * 4] = f32::NAN;
        let cfg = TrainConfig {
            batch_size: 2,
            ..TrainConfig::default()
        };
        let err = fit(tiny(), &mut bad, &mut toy_set(3), &cfg, &mut []).unwrap_err();
        assert!(
            matches!(err, Error::NonFiniteLoss { epoch: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn invalid_config() {
        for cfg in [
            TrainConfig {
                early_stop_val_accuracy: -0.1,
                ..TrainConfig::default()
            },
            TrainConfig {
                early_stop_val_accuracy: 1.5,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(
                fit(tiny(), &mut toy_set(3), &mut toy_set(3), &cfg, &mut []),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn evaluate_perfect_and_uniform() {
        // output bias alone decides: class 2 for every row
        let mut p = HeadParams::zeros(tiny());
        p.tensors_mut()[5] = Tensor::new([3], vec![-100.0, -100.0, 100.0]).unwrap();
        let f = Tensor::zeros([2, 4]);
        let y = Tensor::new([2, 3], vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let (loss, acc) = evaluate(&p, &mut FeatureSet::new(f, y).unwrap(), 52).unwrap();
        assert!(loss < 1e-12);
        assert_eq!(acc, 1.0);

        let p = HeadParams::zeros(tiny());
        for (class, want_acc) in [(0, 1.0), (1, 0.0), (2, 0.0)] {
            let mut lab = vec![0.0f32; 3];
            lab[class] = 1.0;
            let mut s =
                FeatureSet::new(Tensor::zeros([1, 4]), Tensor::new([1, 3], lab).unwrap()).unwrap();
            let (loss, acc) = evaluate(&p, &mut s, 1).unwrap();
            assert!((loss - 3f64.ln()).abs() < 1e-6);
            assert_eq!(acc, want_acc);
        }
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(std::f64::consts::LN_2), "0.693147");
        assert_eq!(format_sig6(1.0), "1.00000");
        assert_eq!(format_sig6(0.88), "0.880000");
        assert_eq!(format_sig6(12.345678), "12.3457");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(9.9999999), "10.0000");
        assert_eq!(format_sig6(0.00123456789), "0.00123457");
        assert_eq!(format_sig6(1234567.0), "1234567");
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_metrics_csv(
            &mut buf,
            &[EpochMetrics {
                epoch: 1,
                train_loss: 1.0986123,
                train_accuracy: 0.5,
                val_loss: 2.9,
                val_accuracy: 0.72,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n1,1.09861,0.500000,2.90000,0.720000\n"
        );
    }
}
