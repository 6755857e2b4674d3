use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{Tape, Tensor, Var};

use super::attention::{window_attention, AttentionParams};
use super::config::{SwinConfig, LAYER_NORM_EPS};
use super::window::{build_shift_mask, expand_rows, invert_order, partition_order, shift_order};
use super::SwinError;

const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    TruncNormal,
    Zeros,
    Ones,
}

fn push_linear(specs: &mut Vec<(String, Vec<usize>, Init)>, prefix: &str, input: usize, output: usize, bias: bool) {
    specs.push((format!("{prefix}.weight"), vec![input, output], Init::TruncNormal));
    if bias {
        specs.push((format!("{prefix}.bias"), vec![output], Init::Zeros));
    }
}

fn push_norm(specs: &mut Vec<(String, Vec<usize>, Init)>, prefix: &str, dim: usize) {
    specs.push((format!("{prefix}.weight"), vec![dim], Init::Ones));
    specs.push((format!("{prefix}.bias"), vec![dim], Init::Zeros));
}

fn block_prefix(stage: usize, block: usize) -> String {
    format!("stages.{stage}.blocks.{block}")
}

fn param_specs(config: &SwinConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut specs = Vec::new();
    push_linear(&mut specs, "patch_embed.proj", config.patch_dim(), config.embed_dim, true);
    push_norm(&mut specs, "patch_embed.norm", config.embed_dim);
    let table = (2 * config.window_size - 1).pow(2);
    for stage in 0..config.num_stages() {
        let dim = config.stage_dim(stage);
        for block in 0..config.depths[stage] {
            let p = block_prefix(stage, block);
            push_norm(&mut specs, &format!("{p}.norm1"), dim);
            push_linear(&mut specs, &format!("{p}.attn.qkv"), dim, 3 * dim, true);
            push_linear(&mut specs, &format!("{p}.attn.proj"), dim, dim, true);
            specs.push((
                format!("{p}.attn.relative_position_bias_table"),
                vec![table, config.num_heads[stage]],
                Init::TruncNormal,
            ));
            push_norm(&mut specs, &format!("{p}.norm2"), dim);
            push_linear(&mut specs, &format!("{p}.mlp.fc1"), dim, dim * config.mlp_ratio, true);
            push_linear(&mut specs, &format!("{p}.mlp.fc2"), dim * config.mlp_ratio, dim, true);
        }
        if stage + 1 < config.num_stages() {
            push_norm(&mut specs, &format!("stages.{stage}.downsample.norm"), 4 * dim);
            push_linear(&mut specs, &format!("stages.{stage}.downsample.reduction"), 4 * dim, 2 * dim, false);
        }
    }
    let last = config.stage_dim(config.num_stages() - 1);
    push_norm(&mut specs, "norm", last);
    push_linear(&mut specs, "head", last, config.num_classes, true);
    specs
}

/// Every parameter path the config declares, with its shape, in a fixed order.
pub fn parameter_shapes(config: &SwinConfig) -> Vec<(String, Vec<usize>)> {
    param_specs(config).into_iter().map(|(n, s, _)| (n, s)).collect()
}

/// Named parameter store for one task head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    config: SwinConfig,
    params: BTreeMap<String, Tensor>,
}

impl ModelWeights {
    /// Fresh weights: truncated normal (std 0.02, cut at two std) for
    /// matrices and bias tables, zeros for biases, ones for norm gains.
    pub fn init(config: &SwinConfig, seed: u64) -> Result<Self, SwinError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut params = BTreeMap::new();
        for (name, shape, init) in param_specs(config) {
            let tensor = Tensor::from_fn(shape, |_| match init {
                Init::Zeros => 0.0,
                Init::Ones => 1.0,
                Init::TruncNormal => loop {
                    let v: f64 = normal.sample(&mut rng);
                    if v.abs() <= 2.0 * INIT_STD {
                        break v;
                    }
                },
            })?;
            params.insert(name, tensor);
        }
        Ok(Self {
            config: config.clone(),
            params,
        })
    }

    /// Assembles weights from an explicit map, checking it against `config`.
    pub fn from_parts(config: SwinConfig, params: BTreeMap<String, Tensor>) -> Result<Self, SwinError> {
        let w = Self { config, params };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), SwinError> {
        self.config.validate()?;
        let specs = parameter_shapes(&self.config);
        if specs.len() != self.params.len() {
            return Err(SwinError::Config(format!(
                "config declares {} parameters, weights hold {}",
                specs.len(),
                self.params.len()
            )));
        }
        for (name, shape) in specs {
            match self.params.get(&name) {
                None => return Err(SwinError::Config(format!("missing parameter {name}"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(SwinError::Config(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                Some(t) if t.data().iter().any(|v| !v.is_finite()) => {
                    return Err(SwinError::Config(format!("parameter {name} is not finite")))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &SwinConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    /// Records every parameter on `tape` as a leaf.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let vars = self
            .params
            .iter()
            .map(|(name, t)| {
                let mut t = t.clone();
                t.zero_grad();
                t.set_requires_grad(trainable);
                (name.clone(), tape.leaf(t))
            })
            .collect();
        ParamVars(vars)
    }
}

/// Tape handles for a registered [`ModelWeights`].
#[derive(Debug, Clone)]
pub struct ParamVars(BTreeMap<String, Var>);

impl ParamVars {
    pub fn get(&self, name: &str) -> Result<Var, SwinError> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| SwinError::Config(format!("parameter {name} is not registered")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.0.iter()
    }
}

/// Class scores for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Prediction {
    /// Index of the largest logit; ties go to the lower class id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.logits.iter().enumerate() {
            if v > self.logits[best] {
                best = i;
            }
        }
        best
    }
}

fn check_image(config: &SwinConfig, image: &Tensor) -> Result<(), SwinError> {
    let want = [config.in_channels, config.image_size, config.image_size];
    if image.shape() != want {
        return Err(SwinError::Input(format!(
            "expected a {}x{}x{} image, got {:?}",
            want[0],
            want[1],
            want[2],
            image.shape()
        )));
    }
    Ok(())
}

/// Flat index map turning a `C×H×W` image into `(H/p · W/p) × (C·p·p)` patch
/// rows; patch features are ordered channel, row, column.
pub fn patch_index(channels: usize, size: usize, patch: usize) -> Vec<usize> {
    let side = size / patch;
    let mut index = Vec::with_capacity(channels * size * size);
    for py in 0..side {
        for px in 0..side {
            for c in 0..channels {
                for dy in 0..patch {
                    for dx in 0..patch {
                        index.push(c * size * size + (py * patch + dy) * size + px * patch + dx);
                    }
                }
            }
        }
    }
    index
}

/// Patch flattening plus linear projection (no normalization).
pub fn patch_embed_on_tape(tape: &mut Tape, config: &SwinConfig, params: &ParamVars, image: Var) -> Result<Var, SwinError> {
    let side = config.image_size / config.patch_size;
    let index = patch_index(config.in_channels, config.image_size, config.patch_size);
    let patches = tape.gather(image, index, vec![side * side, config.patch_dim()])?;
    let proj = tape.matmul(patches, params.get("patch_embed.proj.weight")?)?;
    Ok(tape.add_row(proj, params.get("patch_embed.proj.bias")?)?)
}

/// Token matrix `(image/patch)² × embed_dim` from the patch projection.
pub fn patch_embed(image: &Tensor, weights: &ModelWeights) -> Result<Tensor, SwinError> {
    let config = weights.config();
    check_image(config, image)?;
    let mut tape = Tape::new();
    let params = weights.register(&mut tape, false);
    let img = tape.constant(image.clone());
    let out = patch_embed_on_tape(&mut tape, config, &params, img)?;
    Ok(tape.value(out).clone())
}

/// Concatenates each 2×2 neighborhood of an `h×w×c` raster token matrix into
/// a `4c` row, in the order top-left, bottom-left, top-right, bottom-right.
pub fn merge_concat_on_tape(tape: &mut Tape, tokens: Var, height: usize, width: usize) -> Result<Var, SwinError> {
    let shape = tape.value(tokens).shape().to_vec();
    let [rows, c] = shape[..] else {
        return Err(SwinError::Shape(format!("merge input must be 2-D, got {shape:?}")));
    };
    if rows != height * width {
        return Err(SwinError::Shape(format!("{rows} tokens do not form a {height}x{width} grid")));
    }
    if height % 2 != 0 || width % 2 != 0 {
        return Err(SwinError::Config(format!("cannot merge an odd {height}x{width} grid")));
    }
    const SLOTS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let (oh, ow) = (height / 2, width / 2);
    let mut index = Vec::with_capacity(rows * c);
    for i in 0..oh {
        for j in 0..ow {
            for (dy, dx) in SLOTS {
                let src = (2 * i + dy) * width + 2 * j + dx;
                index.extend(src * c..(src + 1) * c);
            }
        }
    }
    Ok(tape.gather(tokens, index, vec![oh * ow, 4 * c])?)
}

/// `h×w×c` → `(h/2)×(w/2)×2c`: neighborhood concat, norm, then a bias-free
/// linear reduction.
pub fn patch_merging_on_tape(
    tape: &mut Tape,
    params: &ParamVars,
    prefix: &str,
    tokens: Var,
    height: usize,
    width: usize,
) -> Result<Var, SwinError> {
    let merged = merge_concat_on_tape(tape, tokens, height, width)?;
    let normed = tape.layer_norm(
        merged,
        params.get(&format!("{prefix}.norm.weight"))?,
        params.get(&format!("{prefix}.norm.bias"))?,
        LAYER_NORM_EPS,
    )?;
    Ok(tape.matmul(normed, params.get(&format!("{prefix}.reduction.weight"))?)?)
}

fn linear(tape: &mut Tape, params: &ParamVars, prefix: &str, x: Var) -> Result<Var, SwinError> {
    let y = tape.matmul(x, params.get(&format!("{prefix}.weight"))?)?;
    Ok(tape.add_row(y, params.get(&format!("{prefix}.bias"))?)?)
}

fn norm(tape: &mut Tape, params: &ParamVars, prefix: &str, x: Var) -> Result<Var, SwinError> {
    Ok(tape.layer_norm(
        x,
        params.get(&format!("{prefix}.weight"))?,
        params.get(&format!("{prefix}.bias"))?,
        LAYER_NORM_EPS,
    )?)
}

/// Attention parameters of the block at `prefix`.
pub fn attention_params(params: &ParamVars, prefix: &str) -> Result<AttentionParams, SwinError> {
    Ok(AttentionParams {
        qkv_weight: params.get(&format!("{prefix}.attn.qkv.weight"))?,
        qkv_bias: params.get(&format!("{prefix}.attn.qkv.bias"))?,
        proj_weight: params.get(&format!("{prefix}.attn.proj.weight"))?,
        proj_bias: params.get(&format!("{prefix}.attn.proj.bias"))?,
        bias_table: params.get(&format!("{prefix}.attn.relative_position_bias_table"))?,
    })
}

/// One transformer block on a raster-ordered `side×side` token matrix.
#[allow(clippy::too_many_arguments)]
pub fn block_on_tape(
    tape: &mut Tape,
    params: &ParamVars,
    prefix: &str,
    x: Var,
    side: usize,
    window: usize,
    shift: usize,
    heads: usize,
) -> Result<Var, SwinError> {
    let channels = tape.value(x).shape()[1];
    let normed = norm(tape, params, &format!("{prefix}.norm1"), x)?;

    let partition = partition_order(side, side, window)?;
    let order: Vec<usize> = if shift == 0 {
        partition
    } else {
        let rolled = shift_order(side, side, shift as isize, shift as isize);
        partition.iter().map(|&p| rolled[p]).collect()
    };
    let inverse = invert_order(&order);
    let windows = tape.gather(normed, expand_rows(&order, channels), vec![side * side, channels])?;
    let masks = if shift > 0 {
        Some(build_shift_mask(side, side, window, shift)?)
    } else {
        None
    };
    let attn = window_attention(
        tape,
        windows,
        window,
        heads,
        &attention_params(params, prefix)?,
        masks.as_deref(),
        false,
    )?;
    let restored = tape.gather(attn.output, expand_rows(&inverse, channels), vec![side * side, channels])?;
    let x = tape.add(x, restored)?;

    let h = norm(tape, params, &format!("{prefix}.norm2"), x)?;
    let h = linear(tape, params, &format!("{prefix}.mlp.fc1"), h)?;
    let h = tape.gelu(h)?;
    let h = linear(tape, params, &format!("{prefix}.mlp.fc2"), h)?;
    Ok(tape.add(x, h)?)
}

/// Full forward pass for one `C×H×W` image already on the tape; returns
/// `1 × num_classes` logits.
pub fn forward_on_tape(tape: &mut Tape, config: &SwinConfig, params: &ParamVars, image: Var) -> Result<Var, SwinError> {
    check_image(config, tape.value(image))?;
    let tokens = patch_embed_on_tape(tape, config, params, image)?;
    let mut x = norm(tape, params, "patch_embed.norm", tokens)?;
    for stage in 0..config.num_stages() {
        let side = config.grid_side(stage);
        for block in 0..config.depths[stage] {
            x = block_on_tape(
                tape,
                params,
                &block_prefix(stage, block),
                x,
                side,
                config.window_size,
                config.block_shift(block),
                config.num_heads[stage],
            )?;
        }
        if stage + 1 < config.num_stages() {
            x = patch_merging_on_tape(tape, params, &format!("stages.{stage}.downsample"), x, side, side)?;
        }
    }
    let x = norm(tape, params, "norm", x)?;
    let pooled = tape.mean_rows(x)?;
    linear(tape, params, "head", pooled)
}

/// Logits and softmax probabilities for one normalized image.
pub fn forward_classify(image: &Tensor, config: &SwinConfig, weights: &ModelWeights) -> Result<Prediction, SwinError> {
    if config != weights.config() {
        return Err(SwinError::Config("weights were built for a different config".into()));
    }
    let mut tape = Tape::new();
    let params = weights.register(&mut tape, false);
    let img = tape.constant(image.clone());
    let logits = forward_on_tape(&mut tape, config, &params, img)?;
    let probs = tape.softmax_lastdim(logits)?;
    Ok(Prediction {
        logits: tape.value(logits).data().to_vec(),
        probabilities: tape.value(probs).data().to_vec(),
    })
}

/// Random image tensor with values in `[-1, 1)`, for tests and benchmarks.
pub fn random_image(config: &SwinConfig, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(
        vec![config.in_channels, config.image_size, config.image_size],
        |_| rng.random_range(-1.0..1.0),
    )
    .expect("non-empty image")
}
