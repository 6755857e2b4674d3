//! Image ingestion and preprocessing, dataset manifests, splitting and
//! batching.

mod augment;
mod batch;
mod manifest;
mod pnm;
mod preprocess;
pub mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

pub use augment::{augment, center_crop, hflip, reflect_pad, rotate90, AUGMENT_PAD};
pub use batch::{make_batches, sample_seed, Batch};
pub use manifest::{split_train_test, stratified_split, DatasetManifest, ManifestEntry};
pub use pnm::{decode_pnm, encode_p5, encode_p6, load_pnm, load_rgb8, PnmRaster};
pub use preprocess::{denormalize, normalize, preprocess, resize_bilinear, PreprocessConfig, Resample, TARGET_SIZE};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("input error: {0}")]
    Input(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Which of the two models a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detection,
    Classification,
}

/// Detection class names by label id. The positive class is "Yes".
pub const DETECTION_CLASSES: [&str; 2] = ["No", "Yes"];
pub const CLASSIFICATION_CLASSES: [&str; 3] = ["Meningioma Tumor", "Glioma Tumor", "Pituitary Tumor"];

impl Task {
    pub fn classes(self) -> &'static [&'static str] {
        match self {
            Task::Detection => &DETECTION_CLASSES,
            Task::Classification => &CLASSIFICATION_CLASSES,
        }
    }

    pub fn num_classes(self) -> usize {
        self.classes().len()
    }

    pub fn label_of(self, class_name: &str) -> Option<usize> {
        self.classes().iter().position(|&c| c == class_name)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Detection => "detection",
            Task::Classification => "classification",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detection" | "detect" => Ok(Task::Detection),
            "classification" | "classify" => Ok(Task::Classification),
            other => Err(DataError::Manifest(format!("unknown task {other:?}"))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Three-channel image stored as channel planes, `[c][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if height == 0 || width == 0 {
            return Err(DataError::Input(format!("zero-extent image {height}x{width}")));
        }
        if data.len() != 3 * height * width {
            return Err(DataError::Input(format!(
                "3x{height}x{width} image needs {} values, got {}",
                3 * height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; 3 * height * width],
        }
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn to_tensor(&self) -> Result<Tensor, DataError> {
        Ok(Tensor::new(vec![3, self.height, self.width], self.data.clone())?)
    }

    /// Quantizes `[0, 1]` values to bytes with round-half-away-from-zero.
    pub fn to_rgb8(&self) -> Rgb8Image {
        let plane = self.height * self.width;
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let pixels = (0..plane)
            .map(|p| [q(self.data[p]), q(self.data[plane + p]), q(self.data[2 * plane + p])])
            .collect();
        Rgb8Image {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn from_rgb8(img: &Rgb8Image) -> Self {
        let plane = img.width * img.height;
        let mut data = vec![0.0; 3 * plane];
        for (p, px) in img.pixels.iter().enumerate() {
            for c in 0..3 {
                data[c * plane + p] = f64::from(px[c]) / 255.0;
            }
        }
        Self {
            height: img.height,
            width: img.width,
            data,
        }
    }
}

/// Interleaved 8-bit RGB raster in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Rgb8Image {
    pub fn filled(width: usize, height: usize, px: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![px; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        self.pixels[row * self.width + col]
    }
}

/// A labeled, decoded image.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub label: usize,
    pub source_path: String,
    pub task: Task,
}

impl Sample {
    pub fn new(image: Image, label: usize, source_path: impl Into<String>, task: Task) -> Result<Self, DataError> {
        if label >= task.num_classes() {
            return Err(DataError::Input(format!(
                "label {label} out of range for {task} ({} classes)",
                task.num_classes()
            )));
        }
        if image.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(DataError::Input("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self {
            image,
            label,
            source_path: source_path.into(),
            task,
        })
    }
}
