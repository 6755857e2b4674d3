//! HTTP surface: `POST /v1/predict`, `POST /v1/report.pdf`, `GET /v1/health`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::json;

use crate::pipeline::{PredictOutcome, Predictor, MAX_REQUEST_BYTES};
use crate::ServiceError;

/// Port used when neither `--port` nor `SWINSCAN_PORT` is given.
pub const DEFAULT_PORT: u16 = 8080;
pub const PORT_ENV: &str = "SWINSCAN_PORT";

pub fn router(predictor: Arc<Predictor>) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/report.pdf", post(report_pdf))
        .route("/v1/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_REQUEST_BYTES))
        .with_state(predictor)
}

/// `{"error": {"code", "message"}}` with the error's status.
pub fn error_response(err: &ServiceError) -> Response {
    let status = StatusCode::from_u16(err.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let body = json!({"error": {"code": err.code(), "message": err.to_string()}});
    (status, [(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
}

fn from_rejection(r: BytesRejection) -> ServiceError {
    if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ServiceError::PayloadTooLarge { limit: MAX_REQUEST_BYTES }
    } else {
        ServiceError::BadRequest(r.body_text())
    }
}

/// Runs the CPU-bound pipeline off the async workers.
async fn run(predictor: Arc<Predictor>, body: Result<Bytes, BytesRejection>) -> Result<PredictOutcome, ServiceError> {
    let body = body.map_err(from_rejection)?;
    tokio::task::spawn_blocking(move || predictor.handle_json(&body))
        .await
        .map_err(|e| ServiceError::Model(format!("worker failed: {e}")))?
}

async fn predict(State(p): State<Arc<Predictor>>, body: Result<Bytes, BytesRejection>) -> Response {
    match run(p, body).await {
        Ok(out) => ([(header::CONTENT_TYPE, "application/json")], out.report.to_json()).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn report_pdf(State(p): State<Arc<Predictor>>, body: Result<Bytes, BytesRejection>) -> Response {
    match run(p, body).await.and_then(|out| out.pdf()) {
        Ok(pdf) => ([(header::CONTENT_TYPE, "application/pdf")], pdf).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn health(State(p): State<Arc<Predictor>>) -> Response {
    let body = json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "model_versions": p.versions(),
    });
    ([(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, predictor: Arc<Predictor>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(predictor))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
