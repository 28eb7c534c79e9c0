use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use histograde::backbone::{load_backbone, vgg16_forward};
use histograde::data::{
    load_resize, preprocess_vgg, scan_dataset, split_dataset, zoom_augment, DatasetManifest,
    ImageFeatureStream, RgbImage, Subset, TARGET_SIZE,
};
use histograde::head::{gap, predict, GRADES};
use histograde::train::{evaluate, fit, write_metrics_csv, EpochMetrics, Flow};
use histograde::weights::{load_weights, save_weights, tensor_checksum};
use histograde::{HeadDims, HeadParams, Tensor, WeightStore};

use crate::config::RunConfig;
use crate::error::CliError;

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

fn existing_file<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let path = required(value, flag)?;
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "--{flag}: file not found: {}",
            path.display()
        )));
    }
    Ok(path)
}

fn existing_dir<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let path = required(value, flag)?;
    if !path.is_dir() {
        return Err(CliError::Config(format!(
            "--{flag}: directory not found: {}",
            path.display()
        )));
    }
    Ok(path)
}

fn head_file(path: &Path) -> Result<&Path, CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "--head: file not found: {}",
            path.display()
        )));
    }
    Ok(path)
}

fn check_classes(manifest: &DatasetManifest, root: &Path) -> Result<(), CliError> {
    if manifest.classes.len() != GRADES.len() {
        return Err(CliError::Invalid(format!(
            "{} has {} class directories ({}); expected {}",
            root.display(),
            manifest.classes.len(),
            manifest.classes.join(", "),
            GRADES.len()
        )));
    }
    Ok(())
}

fn load_head(path: &Path) -> Result<HeadParams, CliError> {
    Ok(HeadParams::from_store(&load_weights(path)?)?)
}

fn stdout_error(source: io::Error) -> CliError {
    CliError::Output {
        path: "<stdout>".into(),
        source,
    }
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let output = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(output)?);
    write(&mut out).map_err(output)?;
    out.flush().map_err(output)
}

/// Extracts `[1, 512]` pooled backbone features for one image.
pub fn image_features(path: &Path, backbone: &WeightStore) -> Result<Tensor, CliError> {
    let img = preprocess_vgg(&load_resize(path)?).reshape([1, TARGET_SIZE, TARGET_SIZE, 3])?;
    Ok(gap(&vgg16_forward(&img, backbone)?)?)
}

/// Scans and splits `--data`, trains a head on frozen backbone features,
/// then writes the head and the per-epoch metrics.
pub fn cmd_train(cfg: &RunConfig, log: &mut dyn Write) -> Result<Vec<EpochMetrics>, CliError> {
    cfg.validate()?;
    let data = existing_dir(&cfg.data, "data")?;
    let weights = existing_file(&cfg.weights, "weights")?;

    let backbone = load_backbone(weights)?;
    let scanned = scan_dataset(data)?;
    check_classes(&scanned, data)?;
    let manifest = split_dataset(&scanned, cfg.val_split)?;
    for subset in [Subset::Train, Subset::Validation] {
        if manifest.count(subset) == 0 {
            return Err(CliError::Invalid(format!(
                "{} subset is empty with val-split {}",
                subset.name(),
                cfg.val_split
            )));
        }
    }
    let _ = writeln!(
        log,
        "{} training and {} validation images in {} classes",
        manifest.count(Subset::Train),
        manifest.count(Subset::Validation),
        manifest.classes.len()
    );

    let mut train =
        ImageFeatureStream::new(&manifest, Subset::Train, &backbone, Some(cfg.augment()));
    let mut val = ImageFeatureStream::new(&manifest, Subset::Validation, &backbone, None);
    let max_epochs = cfg.train.max_epochs;
    let mut progress = |m: &EpochMetrics| {
        let _ = writeln!(
            log,
            "epoch {}/{max_epochs} loss={:.4} accuracy={:.4} val_loss={:.4} val_accuracy={:.4}",
            m.epoch, m.train_loss, m.train_accuracy, m.val_loss, m.val_accuracy
        );
        Flow::Continue
    };
    let (head, history) = fit(
        HeadDims::default(),
        &mut train,
        &mut val,
        &cfg.train_config(),
        &mut [&mut progress],
    )?;

    save_weights(&cfg.head, &head.to_store())?;
    write_file(&cfg.metrics, |out| write_metrics_csv(out, &history))?;
    let _ = writeln!(
        log,
        "wrote {} and {}",
        cfg.head.display(),
        cfg.metrics.display()
    );
    Ok(history)
}

/// Loss and accuracy of the trained head over every image under
/// `--holdout`.
pub fn cmd_evaluate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(f64, f64), CliError> {
    cfg.validate()?;
    let holdout = existing_dir(&cfg.holdout, "holdout")?;
    let weights = existing_file(&cfg.weights, "weights")?;
    let head = load_head(head_file(&cfg.head)?)?;
    let backbone = load_backbone(weights)?;
    let manifest = scan_dataset(holdout)?;
    check_classes(&manifest, holdout)?;

    let mut stream = ImageFeatureStream::from_records(manifest.records, GRADES.len(), &backbone);
    let (loss, accuracy) = evaluate(&head, &mut stream, cfg.train.batch_size)?;
    writeln!(out, "loss={loss:.6} accuracy={accuracy:.6}").map_err(stdout_error)?;
    Ok((loss, accuracy))
}

/// One `path,grade,p1,p2,p3` line per image on `out`. Images that fail are
/// reported on `err` and the rest are still predicted.
pub fn cmd_predict(
    cfg: &RunConfig,
    images: &[PathBuf],
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(CliError::Config("no images given".into()));
    }
    let weights = existing_file(&cfg.weights, "weights")?;
    let head = load_head(head_file(&cfg.head)?)?;
    let backbone = load_backbone(weights)?;

    let mut failed = 0;
    for path in images {
        let result =
            image_features(path, &backbone).and_then(|f| Ok(predict(&head, &f)?.remove(0)));
        match result {
            Ok(p) => {
                let probs: Vec<String> = p.probs.iter().map(|v| format!("{v:.6}")).collect();
                writeln!(out, "{},{},{}", path.display(), p.grade, probs.join(","))
                    .map_err(stdout_error)?;
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(err, "error: {}: {e}", path.display());
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Invalid(format!(
            "{failed} of {} images could not be predicted",
            images.len()
        )));
    }
    Ok(())
}

/// One `name dims checksum` line per tensor, in file order.
pub fn cmd_inspect(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "file not found: {}",
            path.display()
        )));
    }
    let store = load_weights(path)?;
    for (name, t) in store.iter() {
        let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
        writeln!(out, "{name} {} {}", dims.join("x"), tensor_checksum(t)).map_err(stdout_error)?;
    }
    Ok(())
}

/// Writes `count` zoom-augmented copies of the first training images to
/// `out_dir` as PNG and lists the written paths on `out`.
pub fn cmd_preview_augment(
    cfg: &RunConfig,
    out_dir: &Path,
    count: usize,
    out: &mut dyn Write,
) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let data = existing_dir(&cfg.data, "data")?;
    let manifest = scan_dataset(data)?;
    fs::create_dir_all(out_dir).map_err(|source| CliError::Output {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let augment = cfg.augment();
    let mut rng = augment.pass_rng(0);
    let mut written = Vec::with_capacity(count);
    for (i, record) in manifest.records.iter().cycle().take(count).enumerate() {
        let img = zoom_augment(&load_resize(&record.path)?, &augment, &mut rng);
        let name = format!("aug_{i:03}_{}.png", manifest.classes[record.class]);
        let path = out_dir.join(name);
        RgbImage::from_tensor(&img).save_png(&path)?;
        writeln!(out, "{}", path.display()).map_err(stdout_error)?;
        written.push(path);
    }
    Ok(written)
}
