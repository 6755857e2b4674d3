//! Fixtures shared by the service test targets.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use swinscan::report::FixedClock;
use swinscan::Predictor;
use swinscan_core::data::encode_p6;
use swinscan_core::data::synth::detection_image;
use swinscan_core::swin::{weights_to_bytes, ModelWeights, SwinConfig};

pub const PINNED: &str = "2026-05-01T09:30:00Z";

/// Untrained desk-scale weight files (detection, classification).
pub fn random_weight_files(seed: u64) -> (Vec<u8>, Vec<u8>) {
    let det = ModelWeights::init(&SwinConfig::detection(), seed).unwrap();
    let cls = ModelWeights::init(&SwinConfig::classification(), seed + 1).unwrap();
    (weights_to_bytes(&det), weights_to_bytes(&cls))
}

pub fn predictor_from(det: &[u8], cls: &[u8]) -> Predictor {
    Predictor::from_bytes(det, cls, Arc::new(FixedClock(PINNED.into()))).unwrap()
}

pub fn random_predictor(seed: u64) -> Predictor {
    let (d, c) = random_weight_files(seed);
    predictor_from(&d, &c)
}

/// 64×64 P6 scan with a bright disk near the center.
pub fn disk_p6(seed: u64) -> Vec<u8> {
    encode_p6(&detection_image(1, &mut ChaCha8Rng::seed_from_u64(seed)).image)
}

/// 64×64 P6 scan of background noise only.
pub fn blank_p6(seed: u64) -> Vec<u8> {
    encode_p6(&detection_image(0, &mut ChaCha8Rng::seed_from_u64(seed)).image)
}

pub fn request_body(image: &[u8], task: &str) -> Vec<u8> {
    use base64::Engine;
    let json = serde_json::json!({
        "image": base64::engine::general_purpose::STANDARD.encode(image),
        "task": task,
    });
    serde_json::to_vec(&json).unwrap()
}

pub fn schema_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name)
}

pub fn validator(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(schema_path(name)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

/// Panics with every violation listed.
pub fn assert_schema(name: &str, instance: &Value) {
    let v = validator(name);
    let errors: Vec<String> = v.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}\n{instance:#}");
}
