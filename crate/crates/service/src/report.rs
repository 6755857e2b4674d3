//! The diagnostic report: what the API returns as JSON and the PDF renders.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use swinscan_core::data::{CLASSIFICATION_CLASSES, DETECTION_CLASSES};
use swinscan_core::segment::SegmentationResult;
use swinscan_core::swin::Prediction;

use crate::ServiceError;

pub const REPORT_SCHEMA: &str = "swinscan.report/v1";

pub const DISCLAIMER: &str =
    "Research prototype trained at desk scale. Not a medical device; every finding must be reviewed by a qualified clinician.";

/// Which stages a request asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportTask {
    /// Detection and segmentation only.
    Detect,
    /// Same stages as `Full`: classification is gated on detection anyway.
    Classify,
    Full,
}

impl ReportTask {
    pub fn parse(s: &str) -> Result<Self, ServiceError> {
        match s {
            "detect" => Ok(Self::Detect),
            "classify" => Ok(Self::Classify),
            "full" => Ok(Self::Full),
            other => Err(ServiceError::BadTask(format!(
                "unknown task {other:?}; expected detect, classify or full"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Detect => "detect",
            Self::Classify => "classify",
            Self::Full => "full",
        }
    }

    pub fn wants_classification(self) -> bool {
        self != Self::Detect
    }
}

/// Source of report timestamps, injectable so reports can be reproduced.
pub trait Clock: Send + Sync {
    /// RFC 3339, UTC, whole seconds.
    fn now(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

#[derive(Debug, Clone)]
pub struct FixedClock(pub String);

impl Clock for FixedClock {
    fn now(&self) -> String {
        self.0.clone()
    }
}

/// Environment variable that pins every report timestamp.
pub const TIMESTAMP_ENV: &str = "SWINSCAN_TIMESTAMP";

/// A fixed clock when `SWINSCAN_TIMESTAMP` is set, the system clock
/// otherwise.
pub fn clock_from_env() -> Arc<dyn Clock> {
    match std::env::var(TIMESTAMP_ENV) {
        Ok(ts) if !ts.is_empty() => Arc::new(FixedClock(ts)),
        _ => Arc::new(SystemClock),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbability {
    pub class: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub label: String,
    pub probabilities: Vec<ClassProbability>,
}

impl ClassResult {
    fn from_prediction(p: &Prediction, classes: &[&str]) -> Result<Self, ServiceError> {
        if p.probabilities.len() != classes.len() {
            return Err(ServiceError::Contract(format!(
                "expected {} probabilities, got {}",
                classes.len(),
                p.probabilities.len()
            )));
        }
        Ok(Self {
            label: classes[p.argmax()].to_owned(),
            probabilities: classes
                .iter()
                .zip(&p.probabilities)
                .map(|(c, &probability)| ClassProbability {
                    class: (*c).to_owned(),
                    probability,
                })
                .collect(),
        })
    }

    pub fn probability_of(&self, class: &str) -> Option<f64> {
        self.probabilities.iter().find(|p| p.class == class).map(|p| p.probability)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub row: f64,
    pub col: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub region_found: bool,
    pub threshold: u8,
    pub area_px: usize,
    pub area_mm2: Option<f64>,
    pub bbox: Option<BoundingBox>,
    pub centroid: Option<Centroid>,
    pub image_width: usize,
    pub image_height: usize,
}

impl SegmentationSummary {
    pub fn from_result(r: &SegmentationResult) -> Self {
        Self {
            region_found: r.size.region_found,
            threshold: r.threshold,
            area_px: r.size.area_px,
            area_mm2: r.size.area_mm2,
            bbox: r.size.bbox.map(|(row0, col0, row1, col1)| BoundingBox { row0, col0, row1, col1 }),
            centroid: r.size.centroid.map(|(row, col)| Centroid { row, col }),
            image_width: r.highlighted.width,
            image_height: r.highlighted.height,
        }
    }
}

/// `sha256:<hex>` digests of the two weight files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersions {
    pub detection: String,
    pub classification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub schema: String,
    pub task: ReportTask,
    pub detection: ClassResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassResult>,
    pub segmentation: SegmentationSummary,
    pub model_versions: ModelVersions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_ref: Option<String>,
    pub timestamp: String,
    pub disclaimer: String,
}

impl DiagnosticReport {
    pub fn tumor_detected(&self) -> bool {
        self.detection.label == DETECTION_CLASSES[1]
    }

    /// Pretty JSON with a trailing newline; field order is fixed by the
    /// struct layout, so equal reports give equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Everything `build_report` assembles.
#[derive(Debug, Clone)]
pub struct ReportInputs<'a> {
    pub task: ReportTask,
    pub detection: Option<&'a Prediction>,
    pub classification: Option<&'a Prediction>,
    pub segmentation: &'a SegmentationResult,
    pub versions: ModelVersions,
    pub patient_ref: Option<String>,
    pub timestamp: String,
}

/// Assembles the report. Classification is dropped unless the task asks
/// for it and detection says "Yes".
pub fn build_report(inputs: ReportInputs<'_>) -> Result<DiagnosticReport, ServiceError> {
    let det = inputs
        .detection
        .ok_or_else(|| ServiceError::Contract("a report needs a detection result".into()))?;
    let detection = ClassResult::from_prediction(det, &DETECTION_CLASSES)?;
    let tumor = detection.label == DETECTION_CLASSES[1];
    let classification = match inputs.classification {
        Some(p) if tumor && inputs.task.wants_classification() => {
            Some(ClassResult::from_prediction(p, &CLASSIFICATION_CLASSES)?)
        }
        _ => None,
    };
    Ok(DiagnosticReport {
        schema: REPORT_SCHEMA.into(),
        task: inputs.task,
        detection,
        classification,
        segmentation: SegmentationSummary::from_result(inputs.segmentation),
        model_versions: inputs.versions,
        patient_ref: inputs.patient_ref,
        timestamp: inputs.timestamp,
        disclaimer: DISCLAIMER.into(),
    })
}
