use histograde::fixtures::{random_pairs, Blobs};
use histograde::head::HeadParams;
use histograde::train::{evaluate, fit, fit_from, EpochMetrics, FeatureSet, Flow};
use histograde::{HeadDims, TrainConfig};

fn small_dims(features: usize) -> HeadDims {
    HeadDims {
        features,
        hidden1: 32,
        hidden2: 32,
        classes: 3,
    }
}

fn blobs() -> (FeatureSet, FeatureSet) {
    let b = Blobs {
        classes: 3,
        dim: 16,
        separation: 3.0,
        noise: 1.0,
        seed: 3,
    };
    (b.sample(60, 0), b.sample(30, 1))
}

fn run(cfg: &TrainConfig) -> (HeadParams, Vec<EpochMetrics>) {
    let (mut train, mut val) = blobs();
    fit(small_dims(16), &mut train, &mut val, cfg, &mut []).unwrap()
}

#[test]
fn identical_seeds_give_bit_identical_runs() {
    let cfg = TrainConfig {
        max_epochs: 15,
        batch_size: 8,
        early_stop_val_accuracy: 1.0,
        rng_seed: 17,
        ..TrainConfig::default()
    };
    let (pa, ha) = run(&cfg);
    let (pb, hb) = run(&cfg);
    assert_eq!(pa, pb);
    let bits = |h: &[EpochMetrics]| -> Vec<[u64; 4]> {
        h.iter()
            .map(|m| [m.train_loss, m.train_accuracy, m.val_loss, m.val_accuracy].map(f64::to_bits))
            .collect()
    };
    assert_eq!(bits(&ha), bits(&hb));

    let (pc, _) = run(&TrainConfig {
        rng_seed: 18,
        ..cfg
    });
    assert_ne!(pa, pc);
}

#[test]
fn early_stop_emits_exactly_k_epochs() {
    let base = TrainConfig {
        max_epochs: 40,
        batch_size: 8,
        early_stop_val_accuracy: 1.0,
        lr: 2e-4,
        ..TrainConfig::default()
    };
    let (_, full) = run(&base);
    // Pick a threshold first reached strictly after epoch 1.
    let (k, threshold) = full
        .iter()
        .skip(1)
        .find(|m| {
            full[..m.epoch - 1]
                .iter()
                .all(|p| p.val_accuracy < m.val_accuracy)
        })
        .map(|m| (m.epoch, m.val_accuracy))
        .expect("validation accuracy never improved");
    let (_, stopped) = run(&TrainConfig {
        early_stop_val_accuracy: threshold,
        ..base
    });
    assert_eq!(stopped.len(), k);
    assert_eq!(stopped, full[..k]);
}

#[test]
fn never_exceeds_max_epochs() {
    for max_epochs in [0, 1, 3] {
        let (_, history) = run(&TrainConfig {
            max_epochs,
            early_stop_val_accuracy: 1.0,
            ..TrainConfig::default()
        });
        assert!(history.len() <= max_epochs);
    }
}

#[test]
fn callback_sees_every_epoch_and_can_stop() {
    let (mut train, mut val) = blobs();
    let mut seen = Vec::new();
    let mut record = |m: &EpochMetrics| {
        seen.push(m.epoch);
        if m.epoch == 4 {
            Flow::Stop
        } else {
            Flow::Continue
        }
    };
    let cfg = TrainConfig {
        early_stop_val_accuracy: 1.0,
        ..TrainConfig::default()
    };
    let (_, history) = fit(
        small_dims(16),
        &mut train,
        &mut val,
        &cfg,
        &mut [&mut record],
    )
    .unwrap();
    assert_eq!(seen, [1, 2, 3, 4]);
    assert_eq!(history.len(), 4);
}

#[test]
fn fit_from_continues_training() {
    let (mut train, mut val) = blobs();
    let cfg = TrainConfig {
        max_epochs: 5,
        early_stop_val_accuracy: 1.0,
        ..TrainConfig::default()
    };
    let (p1, h1) = fit(small_dims(16), &mut train, &mut val, &cfg, &mut []).unwrap();
    let (_, h2) = fit_from(p1, &mut train, &mut val, &cfg, &mut []).unwrap();
    assert!(h2[4].train_loss < h1[0].train_loss);
}

#[test]
fn accuracy_is_invariant_under_logit_rescaling() {
    let (mut train, mut val) = blobs();
    let cfg = TrainConfig {
        max_epochs: 5,
        early_stop_val_accuracy: 1.0,
        ..TrainConfig::default()
    };
    let (params, _) = fit(small_dims(16), &mut train, &mut val, &cfg, &mut []).unwrap();
    let (_, acc) = evaluate(&params, &mut val, 7).unwrap();
    for scale in [0.01f32, 0.5, 3.0, 40.0] {
        let mut scaled = params.clone();
        for t in &mut scaled.tensors_mut()[4..] {
            for v in t.data_mut() {
                *v *= scale;
            }
        }
        assert_eq!(
            evaluate(&scaled, &mut val, 7).unwrap().1,
            acc,
            "scale {scale}"
        );
    }
}

#[test]
fn batch_size_does_not_change_evaluation() {
    let mut set = random_pairs(23, 16, 3, 4);
    let params = HeadParams::glorot(small_dims(16), 9);
    let (l1, a1) = evaluate(&params, &mut set, 1).unwrap();
    let (l2, a2) = evaluate(&params, &mut set, 52).unwrap();
    assert!((l1 - l2).abs() < 1e-9);
    assert_eq!(a1, a2);
}
