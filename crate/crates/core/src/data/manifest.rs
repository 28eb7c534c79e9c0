use std::fs;
use std::path::{Path, PathBuf};

use crate::error::DataError;

pub const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subset {
    Train,
    Validation,
}

impl Subset {
    pub fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub path: PathBuf,
    pub class: usize,
    pub subset: Subset,
}

/// Every image under a dataset root, grouped by class, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub records: Vec<Record>,
}

impl DatasetManifest {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for r in &self.records {
            counts[r.class] += 1;
        }
        counts
    }

    pub fn subset(&self, subset: Subset) -> Vec<Record> {
        self.records
            .iter()
            .filter(|r| r.subset == subset)
            .cloned()
            .collect()
    }

    pub fn count(&self, subset: Subset) -> usize {
        self.records.iter().filter(|r| r.subset == subset).count()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Reads `<root>/<class>/<image>`; classes and files sorted
/// lexicographically. Every record starts in the training subset.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest, DataError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(DataError::MissingRoot(root.to_path_buf()));
    }
    let mut class_dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        if entry.file_type().map_err(io_err(root))?.is_dir() {
            class_dirs.push(entry.path());
        }
    }
    class_dirs.sort();
    if class_dirs.len() < 2 {
        return Err(DataError::TooFewClasses {
            root: root.to_path_buf(),
            found: class_dirs.len(),
        });
    }

    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut records = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.is_file() && is_image_file(&path) {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(DataError::EmptyClass { class: name });
        }
        files.sort();
        records.extend(files.into_iter().map(|path| Record {
            path,
            class,
            subset: Subset::Train,
        }));
        classes.push(name);
    }
    Ok(DatasetManifest { classes, records })
}

/// Per class, the first `floor(fraction * n)` files in sorted order become
/// validation and the rest training.
pub fn split_dataset(
    manifest: &DatasetManifest,
    validation_fraction: f64,
) -> Result<DatasetManifest, DataError> {
    if !(0.0..1.0).contains(&validation_fraction) {
        return Err(DataError::InvalidFraction(validation_fraction));
    }
    let counts = manifest.class_counts();
    let mut seen = vec![0usize; counts.len()];
    let records = manifest
        .records
        .iter()
        .map(|r| {
            let n_val = (validation_fraction * counts[r.class] as f64).floor() as usize;
            let subset = if seen[r.class] < n_val {
                Subset::Validation
            } else {
                Subset::Train
            };
            seen[r.class] += 1;
            Record {
                subset,
                ..r.clone()
            }
        })
        .collect();
    Ok(DatasetManifest {
        classes: manifest.classes.clone(),
        records,
    })
}
