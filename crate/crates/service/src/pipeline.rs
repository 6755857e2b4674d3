//! One request end to end: decode, preprocess, detect, classify when a
//! tumor is found, segment, assemble the report.

use std::path::Path;
use std::sync::Arc;

use base64::Engine;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use swinscan_core::data::{load_pnm, load_rgb8, preprocess, Image, PreprocessConfig};
use swinscan_core::segment::{segment, SegmentationResult};
use swinscan_core::swin::{forward_classify, weights_from_bytes, ModelWeights, Prediction};

use crate::report::{build_report, Clock, DiagnosticReport, ModelVersions, ReportInputs, ReportTask};
use crate::{pdf, ServiceError};

/// Largest accepted request body.
pub const MAX_REQUEST_BYTES: usize = 8 * 1024 * 1024;

/// Wire form of a prediction request. Unknown fields are ignored.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PredictRequest {
    /// Base64 (standard alphabet) PNM bytes.
    pub image: String,
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub pixel_spacing_mm: Option<f64>,
    /// Echoed into the report, never stored.
    #[serde(default)]
    pub patient_ref: Option<String>,
}

impl PredictRequest {
    pub fn new(image_bytes: &[u8], task: ReportTask) -> Self {
        Self {
            image: base64::engine::general_purpose::STANDARD.encode(image_bytes),
            task: Some(task.as_str().to_owned()),
            pixel_spacing_mm: None,
            patient_ref: None,
        }
    }

    /// Parses a JSON body, enforcing the size cap first.
    pub fn from_json(body: &[u8]) -> Result<Self, ServiceError> {
        if body.len() > MAX_REQUEST_BYTES {
            return Err(ServiceError::PayloadTooLarge { limit: MAX_REQUEST_BYTES });
        }
        serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
    }

    pub fn task(&self) -> Result<ReportTask, ServiceError> {
        match &self.task {
            Some(t) => ReportTask::parse(t),
            None => Err(ServiceError::BadTask("task is required".into())),
        }
    }

    fn spacing(&self) -> Result<Option<f64>, ServiceError> {
        match self.pixel_spacing_mm {
            Some(s) if !(s.is_finite() && s > 0.0) => {
                Err(ServiceError::BadRequest(format!("pixel_spacing_mm must be positive, got {s}")))
            }
            s => Ok(s),
        }
    }
}

/// Everything one request produced; the report plus the pieces the PDF
/// needs.
#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub report: DiagnosticReport,
    pub detection: Prediction,
    pub classification: Option<Prediction>,
    pub segmentation: SegmentationResult,
}

impl PredictOutcome {
    pub fn pdf(&self) -> Result<Vec<u8>, ServiceError> {
        Ok(pdf::write_pdf(&self.report, &self.segmentation.highlighted)?)
    }
}

/// `sha256:<hex>` of a weight file's bytes.
pub fn weights_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Immutable after construction; shared across concurrent requests.
pub struct Predictor {
    detector: ModelWeights,
    classifier: ModelWeights,
    versions: ModelVersions,
    clock: Arc<dyn Clock>,
}

impl Predictor {
    pub fn new(detector: ModelWeights, classifier: ModelWeights, versions: ModelVersions, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        for (what, w, k) in [("detection", &detector, 2), ("classification", &classifier, 3)] {
            if w.config().num_classes != k {
                return Err(ServiceError::Contract(format!(
                    "{what} weights have {} classes, expected {k}",
                    w.config().num_classes
                )));
            }
        }
        Ok(Self {
            detector,
            classifier,
            versions,
            clock,
        })
    }

    pub fn from_bytes(detect: &[u8], classify: &[u8], clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let load = |b: &[u8]| weights_from_bytes(b).map_err(|e| ServiceError::Model(e.to_string()));
        let versions = ModelVersions {
            detection: weights_digest(detect),
            classification: weights_digest(classify),
        };
        Self::new(load(detect)?, load(classify)?, versions, clock)
    }

    pub fn load(detect: &Path, classify: &Path, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        Self::from_bytes(&std::fs::read(detect)?, &std::fs::read(classify)?, clock)
    }

    pub fn versions(&self) -> &ModelVersions {
        &self.versions
    }

    pub fn handle_json(&self, body: &[u8]) -> Result<PredictOutcome, ServiceError> {
        self.predict(&PredictRequest::from_json(body)?)
    }

    pub fn predict(&self, req: &PredictRequest) -> Result<PredictOutcome, ServiceError> {
        let task = req.task()?;
        let spacing = req.spacing()?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(req.image.trim())
            .map_err(|e| ServiceError::BadEncoding(e.to_string()))?;
        let image = load_pnm(&bytes).map_err(|e| ServiceError::BadImage(e.to_string()))?;
        let rgb = load_rgb8(&bytes).map_err(|e| ServiceError::BadImage(e.to_string()))?;

        let detection = self.forward(&self.detector, &image)?;
        let classification = if task.wants_classification() && detection.argmax() == 1 {
            Some(self.forward(&self.classifier, &image)?)
        } else {
            None
        };
        let segmentation = segment(&rgb, spacing).map_err(|e| ServiceError::BadImage(e.to_string()))?;
        let report = build_report(ReportInputs {
            task,
            detection: Some(&detection),
            classification: classification.as_ref(),
            segmentation: &segmentation,
            versions: self.versions.clone(),
            patient_ref: req.patient_ref.clone(),
            timestamp: self.clock.now(),
        })?;
        Ok(PredictOutcome {
            report,
            detection,
            classification,
            segmentation,
        })
    }

    fn forward(&self, weights: &ModelWeights, image: &Image) -> Result<Prediction, ServiceError> {
        let config = weights.config();
        let pre = PreprocessConfig {
            target_size: config.image_size,
            ..PreprocessConfig::default()
        };
        let input = preprocess(image, &pre)
            .and_then(|i| i.to_tensor())
            .map_err(|e| ServiceError::BadImage(e.to_string()))?;
        forward_classify(&input, config, weights).map_err(|e| ServiceError::Model(e.to_string()))
    }
}
