//! Brain-MRI triage on a desk-scale shifted-window transformer.
//!
//! - [`tensor`]: `f64` tensors and the reverse-mode tape
//! - [`swin`]: the windowed-attention model and its weight file
//! - [`data`]: PNM decoding, preprocessing, augmentation, splitting, batching
//! - [`trainer`]: AdamW training, evaluation, metric history
//! - [`metrics`]: confusion matrices and the nine rate measures
//! - [`segment`]: grayscale, Otsu, connected components, size estimate

pub mod data;
pub mod metrics;
pub mod segment;
pub mod swin;
pub mod tensor;
pub mod trainer;
