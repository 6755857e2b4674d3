//! Delivery layer for the swinscan models: request pipeline, JSON report,
//! PDF writer and validating reader, SVG plots and the HTTP API.

pub mod api;
pub mod pdf;
pub mod pipeline;
pub mod plot;
pub mod report;

pub use pipeline::{PredictOutcome, PredictRequest, Predictor, MAX_REQUEST_BYTES};
pub use report::{build_report, Clock, DiagnosticReport, FixedClock, ReportInputs, ReportTask, SystemClock};

/// Errors surfaced to API callers. `code()` is the machine-readable tag.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid base64 image: {0}")]
    BadEncoding(String),
    #[error("unreadable PNM image: {0}")]
    BadImage(String),
    #[error("{0}")]
    BadTask(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("request body exceeds {limit} bytes")]
    PayloadTooLarge { limit: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("model failure: {0}")]
    Model(String),
    #[error(transparent)]
    Pdf(#[from] pdf::PdfError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadEncoding(_) => "bad_encoding",
            Self::BadImage(_) => "bad_image",
            Self::BadTask(_) => "bad_task",
            Self::BadRequest(_) => "bad_request",
            Self::PayloadTooLarge { .. } => "payload_too_large",
            Self::Contract(_) => "contract_error",
            Self::Model(_) => "model_error",
            Self::Pdf(_) => "pdf_error",
            Self::Io(_) => "io_error",
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self {
            Self::BadEncoding(_) | Self::BadImage(_) | Self::BadTask(_) | Self::BadRequest(_) => 400,
            Self::PayloadTooLarge { .. } => 413,
            _ => 500,
        }
    }

    /// True for errors caused by the caller's input rather than the service.
    pub fn is_client_error(&self) -> bool {
        self.status() < 500
    }
}
