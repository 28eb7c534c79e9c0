//! Dataset discovery, splitting, image loading, augmentation and batching.

mod augment;
mod batches;
mod image;
mod manifest;

pub use augment::{apply_zoom, sample_zoom, zoom_augment, AugmentConfig};
pub use batches::{
    assemble_batch, batches, epoch_order, one_hot, Batch, Batches, ImageFeatureStream,
};
pub use image::{
    load_resize, nearest_index, preprocess_vgg, resize_nearest, unprocess_vgg, RgbImage, BGR_MEANS,
    TARGET_SIZE,
};
pub use manifest::{
    is_image_file, scan_dataset, split_dataset, DatasetManifest, Record, Subset, IMAGE_EXTENSIONS,
};
