//! Fine-tuning loop (AdamW, constant learning rate), evaluation and the
//! per-epoch metrics log.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{augment, make_batches, normalize, sample_seed, DataError, PreprocessConfig, Sample};
use crate::metrics::{ConfusionMatrix, MetricsError, MetricsReport};
use crate::swin::{forward_classify, forward_on_tape, ModelWeights, SwinError};
use crate::tensor::{Tape, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}, step {step}: {reason}")]
    Diverged { epoch: usize, step: usize, reason: String },
    #[error("training input error: {0}")]
    Input(String),
    #[error(transparent)]
    Swin(#[from] SwinError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Random flip/rotation per sample and epoch. Off by default: right-angle
    /// rotations do not preserve every class layout.
    pub augment: bool,
    /// Stop after the first epoch whose evaluation accuracy reaches this
    /// value. `None` always runs `epochs` epochs.
    pub stop_at_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 32,
            learning_rate: 3e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            augment: false,
            stop_at_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Input(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return bad("betas must lie in [0, 1) and eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub steps: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Adaptive moments with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(config: &TrainConfig, weights: &ModelWeights) -> Self {
        Self {
            lr: config.learning_rate,
            weight_decay: config.weight_decay,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
            step: 0,
            moments: weights
                .iter()
                .map(|(_, t)| (vec![0.0; t.numel()], vec![0.0; t.numel()]))
                .collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update; `grads` follows the parameter map's key order.
    pub fn update(&mut self, weights: &mut ModelWeights, grads: &[Vec<f64>]) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((_, param), (m, v)), g) in weights.iter_mut().zip(&mut self.moments).zip(grads) {
            for (((p, m), v), &g) in param.data_mut().iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *p -= self.lr * self.weight_decay * *p;
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

/// The normalized `3 × H × W` tensor the model consumes.
pub fn model_input(sample: &Sample) -> Result<Tensor, TrainError> {
    Ok(normalize(&sample.image, &PreprocessConfig::default()).to_tensor()?)
}

/// Mean cross-entropy of one batch and the gradient of every parameter, in
/// parameter-map order.
pub fn batch_loss_and_grads(weights: &ModelWeights, images: &[Tensor], labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>), TrainError> {
    let config = weights.config().clone();
    let mut tape = Tape::new();
    let params = weights.register(&mut tape, true);
    let mut rows = Vec::with_capacity(images.len());
    for image in images {
        let x = tape.constant(image.clone());
        rows.push(forward_on_tape(&mut tape, &config, &params, x)?);
    }
    let logits = tape.concat(&rows, 0)?;
    let loss = tape.cross_entropy(logits, labels)?;
    let value = tape.value(loss).data()[0];
    let grads = tape.backward(loss)?;
    let per_param = params
        .iter()
        .map(|(name, &v)| {
            grads
                .get(v)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| TrainError::Input(format!("no gradient for {name}")))
        })
        .collect::<Result<_, _>>()?;
    Ok((value, per_param))
}

fn diverged(epoch: usize, step: usize, err: TrainError) -> TrainError {
    match err {
        TrainError::Tensor(TensorError::NonFinite { op }) | TrainError::Swin(SwinError::Tensor(TensorError::NonFinite { op })) => {
            TrainError::Diverged {
                epoch,
                step,
                reason: format!("non-finite value in {op}"),
            }
        }
        other => other,
    }
}

/// Trains with `config`, evaluating on `eval` after each epoch.
pub fn train(
    weights: ModelWeights,
    train_set: &[Sample],
    eval: &[Sample],
    config: &TrainConfig,
) -> Result<(ModelWeights, Vec<EpochMetrics>), TrainError> {
    train_with_observer(weights, train_set, eval, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_observer(
    mut weights: ModelWeights,
    train_set: &[Sample],
    eval: &[Sample],
    config: &TrainConfig,
    mut observe: impl FnMut(&EpochMetrics),
) -> Result<(ModelWeights, Vec<EpochMetrics>), TrainError> {
    config.validate()?;
    if train_set.is_empty() || eval.is_empty() {
        return Err(TrainError::Input("training and evaluation sets must be nonempty".into()));
    }
    let classes = weights.config().num_classes;
    if let Some(s) = train_set.iter().chain(eval).find(|s| s.task.num_classes() != classes) {
        return Err(TrainError::Input(format!(
            "{} is a {} sample but the model has {classes} classes",
            s.source_path, s.task
        )));
    }
    let mut optimizer = AdamW::new(config, &weights);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut global_step = 0usize;
    for epoch in 0..config.epochs {
        let epoch_set: Vec<Sample> = if config.augment {
            train_set
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let stream = (epoch * train_set.len() + i) as u64;
                    augment(s, &mut ChaCha8Rng::seed_from_u64(sample_seed(config.seed, stream)))
                })
                .collect()
        } else {
            train_set.to_vec()
        };
        let batches = make_batches(&epoch_set, config.batch_size, &mut shuffle_rng)?;
        let mut loss_sum = 0.0;
        for batch in &batches {
            global_step += 1;
            let images = (0..batch.len())
                .map(|i| normalize_tensor(&batch.image(i)))
                .collect::<Vec<_>>();
            let (loss, grads) =
                batch_loss_and_grads(&weights, &images, &batch.labels).map_err(|e| diverged(epoch, global_step, e))?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    step: global_step,
                    reason: format!("loss is {loss}"),
                });
            }
            loss_sum += loss * batch.len() as f64;
            optimizer.update(&mut weights, &grads);
        }
        let (_, report) = evaluate(&weights, eval)?;
        let m = EpochMetrics {
            epoch: epoch + 1,
            steps: batches.len(),
            mean_loss: loss_sum / train_set.len() as f64,
            accuracy: report.accuracy.unwrap_or(0.0),
            precision: report.ppv.unwrap_or(0.0),
            recall: report.sensitivity.unwrap_or(0.0),
            f1: report.f1.unwrap_or(0.0),
        };
        observe(&m);
        let done = config.stop_at_accuracy.is_some_and(|target| m.accuracy >= target);
        history.push(m);
        if done {
            break;
        }
    }
    Ok((weights, history))
}

fn normalize_tensor(image: &Tensor) -> Tensor {
    let cfg = PreprocessConfig::default();
    let plane = image.numel() / 3;
    let mut out = image.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let c = i / plane;
        *v = (*v - cfg.image_mean[c]) / cfg.image_std[c];
    }
    out
}

/// Argmax prediction per sample.
pub fn predict_labels(weights: &ModelWeights, samples: &[Sample]) -> Result<Vec<usize>, TrainError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(samples.len().max(1));
    let chunk = samples.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| Ok(forward_classify(&model_input(s)?, weights.config(), weights)?.argmax()))
                        .collect::<Result<Vec<usize>, TrainError>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(samples.len());
        for h in handles {
            out.extend(h.join().expect("evaluation worker panicked")?);
        }
        Ok(out)
    })
}

pub fn evaluate(weights: &ModelWeights, samples: &[Sample]) -> Result<(ConfusionMatrix, MetricsReport), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Input("cannot evaluate on an empty set".into()));
    }
    let predicted = predict_labels(weights, samples)?;
    let actual: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let cm = ConfusionMatrix::from_predictions(&actual, &predicted, weights.config().num_classes)?;
    let report = MetricsReport::from_matrix(&cm)?;
    Ok((cm, report))
}

pub const METRICS_HEADER: [&str; 7] = ["epoch", "steps", "mean_loss", "accuracy", "precision", "recall", "f1"];

/// CSV text with 12 decimal places for every real.
pub fn epoch_metrics_csv(history: &[EpochMetrics]) -> Result<String, TrainError> {
    if history.is_empty() {
        return Err(TrainError::Input("empty metrics history".into()));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for m in history {
        w.write_record([
            m.epoch.to_string(),
            m.steps.to_string(),
            format!("{:.12}", m.mean_loss),
            format!("{:.12}", m.accuracy),
            format!("{:.12}", m.precision),
            format!("{:.12}", m.recall),
            format!("{:.12}", m.f1),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| TrainError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn log_epoch_metrics(history: &[EpochMetrics], path: impl AsRef<Path>) -> Result<(), TrainError> {
    std::fs::write(path, epoch_metrics_csv(history)?)?;
    Ok(())
}

pub fn parse_epoch_metrics(text: &str) -> Result<Vec<EpochMetrics>, TrainError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().ne(METRICS_HEADER) {
        return Err(TrainError::Input(format!("unexpected metrics header {:?}", r.headers()?)));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
