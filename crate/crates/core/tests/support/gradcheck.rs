//! Central finite differences against the tape's analytic gradients.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swinscan_core::swin::{
    build_shift_mask, forward_on_tape, merge_concat_on_tape, window_attention, AttentionParams, ModelWeights, SwinConfig,
};
use swinscan_core::tensor::{Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;
pub const MAX_REL_ERR: f64 = 1e-4;
/// Denominator floor: gradients below it are compared absolutely (to
/// `1e-9`). A central difference at step 1e-5 carries round-off near
/// `1e-16 · |loss| / 1e-5`, about 1e-10 for the losses here, so exact zeros
/// such as the key-bias gradient (softmax is shift-invariant) come out as
/// ±1e-10 noise.
pub const REL_FLOOR: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

impl CheckReport {
    fn record(&mut self, what: impl FnOnce() -> String, analytic: f64, numeric: f64) {
        self.checked += 1;
        let e = rel_err(analytic, numeric);
        if e > self.max_rel_err || self.worst.is_empty() {
            self.max_rel_err = e;
            self.worst = format!("{} analytic {analytic:e} numeric {numeric:e}", what());
        }
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.checked += other.checked;
        if other.max_rel_err > self.max_rel_err {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst;
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_err < MAX_REL_ERR
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
}

/// Reduces any output to a scalar with fixed pseudo-random weights so every
/// output element contributes a distinct amount.
fn project(tape: &mut Tape, out: Var) -> Var {
    let n = tape.value(out).numel();
    let flat = tape.gather(out, (0..n).collect(), vec![1, n]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let w = tape.constant(random_tensor(&mut rng, vec![n, 1]));
    let dot = tape.matmul(flat, w).unwrap();
    tape.sum(dot).unwrap()
}

fn scalar_loss(inputs: &[Tensor], build: &impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let loss = project(&mut tape, out);
    tape.value(loss).data()[0]
}

/// Checks every element of every input of `build`.
pub fn check_op(name: &str, inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) -> CheckReport {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone().with_grad())).collect();
    let out = build(&mut tape, &vars);
    let loss = project(&mut tape, out);
    let grads = tape.backward(loss).unwrap();
    let mut report = CheckReport::default();
    for (k, v) in vars.iter().enumerate() {
        let g = grads.get(*v).expect("leaf requires grad").to_vec();
        for i in 0..inputs[k].numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= FD_STEP;
            let numeric = (scalar_loss(&plus, &build) - scalar_loss(&minus, &build)) / (2.0 * FD_STEP);
            report.record(|| format!("{name} input {k} element {i}"), g[i], numeric);
        }
    }
    report
}

fn model_loss(weights: &ModelWeights, image: &Tensor, label: usize) -> f64 {
    let mut tape = Tape::new();
    let params = weights.register(&mut tape, false);
    let x = tape.constant(image.clone());
    let logits = forward_on_tape(&mut tape, weights.config(), &params, x).unwrap();
    let loss = tape.cross_entropy(logits, &[label]).unwrap();
    tape.value(loss).data()[0]
}

/// Full-model check: `coords` sampled entries of every parameter tensor plus
/// of the input image, under cross-entropy against `label`.
pub fn check_model(config: &SwinConfig, seed: u64, coords: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = ModelWeights::init(config, seed).unwrap();
    // Nonzero biases and non-unit gains so their gradients are exercised
    // away from the initial point.
    let names: Vec<String> = weights.iter().map(|(n, _)| n.clone()).collect();
    for name in &names {
        let t = weights.get_mut(name).unwrap();
        for v in t.data_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
    }
    let image = random_tensor(&mut rng, vec![config.in_channels, config.image_size, config.image_size]);
    let label = rng.random_range(0..config.num_classes);

    let mut tape = Tape::new();
    let params = weights.register(&mut tape, true);
    let x = tape.leaf(image.clone().with_grad());
    let logits = forward_on_tape(&mut tape, config, &params, x).unwrap();
    let loss = tape.cross_entropy(logits, &[label]).unwrap();
    let grads = tape.backward(loss).unwrap();

    let mut report = CheckReport::default();
    for name in &names {
        let g = grads.get(params.get(name).unwrap()).unwrap().to_vec();
        let n = g.len();
        for _ in 0..coords.min(n) {
            let i = rng.random_range(0..n);
            let mut w = weights.clone();
            w.get_mut(name).unwrap().data_mut()[i] += FD_STEP;
            let lp = model_loss(&w, &image, label);
            w.get_mut(name).unwrap().data_mut()[i] -= 2.0 * FD_STEP;
            let lm = model_loss(&w, &image, label);
            report.record(|| format!("{name}[{i}]"), g[i], (lp - lm) / (2.0 * FD_STEP));
        }
    }
    let g = grads.get(x).unwrap().to_vec();
    for _ in 0..coords {
        let i = rng.random_range(0..g.len());
        let (mut p, mut m) = (image.clone(), image.clone());
        p.data_mut()[i] += FD_STEP;
        m.data_mut()[i] -= FD_STEP;
        let numeric = (model_loss(&weights, &p, label) - model_loss(&weights, &m, label)) / (2.0 * FD_STEP);
        report.record(|| format!("image[{i}]"), g[i], numeric);
    }
    report
}

/// Three model configurations of different extents, the first being the
/// desk-scale detector.
pub fn model_configs() -> Vec<SwinConfig> {
    let desk = SwinConfig::detection();
    let mut small = SwinConfig::classification();
    small.image_size = 32;
    small.embed_dim = 16;
    let mut narrow = SwinConfig::detection();
    narrow.image_size = 32;
    narrow.embed_dim = 8;
    narrow.num_heads = vec![1, 2];
    vec![desk, small, narrow]
}

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

fn attention_case(rng: &mut ChaCha8Rng, window: usize, grid: usize, channels: usize, heads: usize, shift: usize) -> (Vec<Tensor>, Build) {
    let rel = (2 * window - 1) * (2 * window - 1);
    let inputs = vec![
        random_tensor(rng, vec![grid * grid, channels]),
        random_tensor(rng, vec![channels, 3 * channels]),
        random_tensor(rng, vec![3 * channels]),
        random_tensor(rng, vec![channels, channels]),
        random_tensor(rng, vec![channels]),
        random_tensor(rng, vec![rel, heads]),
    ];
    let masks = build_shift_mask(grid, grid, window, shift).unwrap();
    let build: Build = Box::new(move |tape: &mut Tape, v: &[Var]| {
        let params = AttentionParams {
            qkv_weight: v[1],
            qkv_bias: v[2],
            proj_weight: v[3],
            proj_bias: v[4],
            bias_table: v[5],
        };
        let m = (shift > 0).then_some(masks.as_slice());
        window_attention(tape, v[0], window, heads, &params, m, false).unwrap().output
    });
    (inputs, build)
}

/// Every differentiable tape operation at three random shapes each, plus
/// windowed attention with and without a shift mask and the patch-merge
/// gather.
pub fn op_cases(seed: u64) -> Vec<(String, Vec<Tensor>, Build)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases: Vec<(String, Vec<Tensor>, Build)> = Vec::new();
    for round in 0..3 {
        let m = rng.random_range(1..5);
        let k = rng.random_range(1..5);
        let n = rng.random_range(2..6);
        let mut r = |shape: Vec<usize>| random_tensor(&mut rng, shape);
        let tag = |op: &str| format!("{op} #{round} ({m}x{k}x{n})");
        cases.push((tag("matmul"), vec![r(vec![m, k]), r(vec![k, n])], Box::new(|t, v| t.matmul(v[0], v[1]).unwrap())));
        cases.push((tag("transpose"), vec![r(vec![m, n])], Box::new(|t, v| t.transpose(v[0]).unwrap())));
        cases.push((tag("add"), vec![r(vec![m, n]), r(vec![m, n])], Box::new(|t, v| t.add(v[0], v[1]).unwrap())));
        cases.push((tag("add_row"), vec![r(vec![m, n]), r(vec![n])], Box::new(|t, v| t.add_row(v[0], v[1]).unwrap())));
        cases.push((tag("scale"), vec![r(vec![m, n])], Box::new(|t, v| t.scale(v[0], -1.7).unwrap())));
        cases.push((tag("gelu"), vec![r(vec![m, n]).clone()], Box::new(|t, v| {
            let s = t.scale(v[0], 3.0).unwrap();
            t.gelu(s).unwrap()
        })));
        cases.push((tag("softmax"), vec![r(vec![m, n])], Box::new(|t, v| {
            let s = t.scale(v[0], 2.0).unwrap();
            t.softmax_lastdim(s).unwrap()
        })));
        cases.push((
            tag("layer_norm"),
            vec![r(vec![m, n]), r(vec![n]), r(vec![n])],
            Box::new(|t, v| t.layer_norm(v[0], v[1], v[2], 1e-5).unwrap()),
        ));
        let labels: Vec<usize> = (0..m).map(|i| (i * 7 + round) % n).collect();
        cases.push((tag("cross_entropy"), vec![r(vec![m, n])], Box::new(move |t, v| t.cross_entropy(v[0], &labels).unwrap())));
        // Repeated indices exercise gradient accumulation.
        let index: Vec<usize> = (0..m * n + 3).map(|i| (i * 5 + round) % (m * n)).collect();
        let len = index.len();
        cases.push((tag("gather"), vec![r(vec![m, n])], Box::new(move |t, v| t.gather(v[0], index.clone(), vec![len]).unwrap())));
        cases.push((tag("concat_rows"), vec![r(vec![m, n]), r(vec![k, n])], Box::new(|t, v| t.concat(&[v[0], v[1]], 0).unwrap())));
        cases.push((tag("concat_cols"), vec![r(vec![m, n]), r(vec![m, k])], Box::new(|t, v| t.concat(&[v[0], v[1]], 1).unwrap())));
        cases.push((tag("mean_rows"), vec![r(vec![m, n])], Box::new(|t, v| t.mean_rows(v[0]).unwrap())));
        cases.push((tag("sum"), vec![r(vec![m, n])], Box::new(|t, v| t.sum(v[0]).unwrap())));
    }
    for (i, (window, grid, channels, heads, shift)) in [(2, 4, 4, 2, 1), (2, 2, 6, 3, 0), (4, 8, 4, 1, 2)].into_iter().enumerate() {
        let (inputs, build) = attention_case(&mut rng, window, grid, channels, heads, shift);
        cases.push((format!("window_attention #{i} (grid {grid}, window {window}, shift {shift})"), inputs, build));
    }
    for (i, (side, c)) in [(2, 3), (4, 2), (6, 1)].into_iter().enumerate() {
        let x = random_tensor(&mut rng, vec![side * side, c]);
        cases.push((
            format!("patch_merge #{i} ({side}x{side}x{c})"),
            vec![x],
            Box::new(move |t, v| merge_concat_on_tape(t, v[0], side, side).unwrap()),
        ));
    }
    cases
}

pub fn check_all_ops(seed: u64) -> Vec<(String, CheckReport)> {
    op_cases(seed)
        .into_iter()
        .map(|(name, inputs, build)| {
            let report = check_op(&name, &inputs, build);
            (name, report)
        })
        .collect()
}
