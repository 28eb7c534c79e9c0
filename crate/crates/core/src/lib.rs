//! Histopathology grade classification by transfer learning: a frozen VGG16
//! convolutional backbone produces 512-channel features that a small dense
//! head (1024 → 1024 → 3, softmax) learns to grade.
//!
//! * [`tensor`] dense channel-last tensors and matrix primitives
//! * [`weights`] the BCNW tensor file format
//! * [`backbone`] convolution, pooling and the VGG16 forward pass
//! * [`head`] pooling head, loss, backward pass, prediction
//! * [`adam`] the optimizer
//! * [`train`] the epoch loop with validation early stopping
//! * [`data`] dataset scanning, splitting, preprocessing, augmentation
//! * [`fixtures`] synthetic weights, features and images

pub mod adam;
pub mod backbone;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod head;
pub mod tensor;
pub mod train;
pub mod weights;

pub use error::{DataError, Error, FormatError, Result};
pub use head::{HeadDims, HeadParams};
pub use tensor::Tensor;
pub use train::{EpochMetrics, TrainConfig};
pub use weights::WeightStore;
