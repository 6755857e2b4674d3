//! Plain-loop reference attention and the windowing properties built on it.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swinscan_core::swin::{build_shift_mask, partition_order, shift_region_ids, window_attention, AttentionParams};
use swinscan_core::tensor::{Tape, Tensor};

pub struct DenseParams {
    pub channels: usize,
    pub heads: usize,
    pub qkv_w: Vec<f64>,
    pub qkv_b: Vec<f64>,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

impl DenseParams {
    pub fn random(rng: &mut ChaCha8Rng, channels: usize, heads: usize) -> Self {
        let mut r = |n: usize| (0..n).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<f64>>();
        Self {
            channels,
            heads,
            qkv_w: r(channels * 3 * channels),
            qkv_b: r(3 * channels),
            proj_w: r(channels * channels),
            proj_b: r(channels),
        }
    }
}

/// Global multi-head self-attention over all `n` tokens, written directly
/// from the definition.
pub fn dense_attention(x: &[f64], n: usize, p: &DenseParams) -> Vec<f64> {
    let c = p.channels;
    let d = c / p.heads;
    let mut qkv = vec![0.0; n * 3 * c];
    for t in 0..n {
        for j in 0..3 * c {
            let mut s = p.qkv_b[j];
            for i in 0..c {
                s += x[t * c + i] * p.qkv_w[i * 3 * c + j];
            }
            qkv[t * 3 * c + j] = s;
        }
    }
    let at = |t: usize, part: usize, h: usize, e: usize| qkv[t * 3 * c + part * c + h * d + e];
    let mut heads_out = vec![0.0; n * c];
    for h in 0..p.heads {
        for i in 0..n {
            let scores: Vec<f64> = (0..n)
                .map(|j| (0..d).map(|e| at(i, 0, h, e) * at(j, 1, h, e)).sum::<f64>() / (d as f64).sqrt())
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for e in 0..d {
                heads_out[i * c + h * d + e] = (0..n).map(|j| exps[j] / z * at(j, 2, h, e)).sum();
            }
        }
    }
    let mut out = vec![0.0; n * c];
    for t in 0..n {
        for j in 0..c {
            let mut s = p.proj_b[j];
            for i in 0..c {
                s += heads_out[t * c + i] * p.proj_w[i * c + j];
            }
            out[t * c + j] = s;
        }
    }
    out
}

fn tensor(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
    Tensor::new(shape, data).unwrap()
}

/// Windowed attention on the tape; `tokens` must already be in window
/// (partition) order.
pub fn tape_attention(
    tokens: &[f64],
    n: usize,
    window: usize,
    p: &DenseParams,
    bias_table: Vec<f64>,
    shift_masks: Option<(usize, usize)>,
) -> (Vec<f64>, u64) {
    let c = p.channels;
    let mut tape = Tape::new();
    let x = tape.constant(tensor(vec![n, c], tokens.to_vec()));
    let rel = (2 * window - 1) * (2 * window - 1);
    let params = AttentionParams {
        qkv_weight: tape.constant(tensor(vec![c, 3 * c], p.qkv_w.clone())),
        qkv_bias: tape.constant(tensor(vec![3 * c], p.qkv_b.clone())),
        proj_weight: tape.constant(tensor(vec![c, c], p.proj_w.clone())),
        proj_bias: tape.constant(tensor(vec![c], p.proj_b.clone())),
        bias_table: tape.constant(tensor(vec![rel, p.heads], bias_table)),
    };
    let masks = shift_masks.map(|(side, shift)| build_shift_mask(side, side, window, shift).unwrap());
    let out = window_attention(&mut tape, x, window, p.heads, &params, masks.as_deref(), false).unwrap();
    (tape.value(out.output).data().to_vec(), tape.matmul_macs())
}

/// Max |windowed − dense| with one window covering the whole `side×side`
/// grid, no shift and a zero bias table.
pub fn full_window_vs_dense(seed: u64, side: usize, channels: usize, heads: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = side * side;
    let p = DenseParams::random(&mut rng, channels, heads);
    let x: Vec<f64> = (0..n * channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rel = (2 * side - 1) * (2 * side - 1);
    let (windowed, _) = tape_attention(&x, n, side, &p, vec![0.0; rel * heads], None);
    let dense = dense_attention(&x, n, &p);
    windowed.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Feeds a shifted-frame grid whose tokens are constant per shift region
/// through masked windowed attention (random relative bias) and returns the
/// largest spread of outputs within any region.
pub fn region_constant_spread(seed: u64, side: usize, window: usize, shift: usize, channels: usize, heads: usize, masked: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = DenseParams::random(&mut rng, channels, heads);
    let ids = shift_region_ids(side, side, window, shift);
    let regions = ids.iter().max().unwrap() + 1;
    let values: Vec<Vec<f64>> = (0..regions)
        .map(|_| (0..channels).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let order = partition_order(side, side, window).unwrap();
    let tokens: Vec<f64> = order.iter().flat_map(|&pos| values[ids[pos]].clone()).collect();
    let rel = (2 * window - 1) * (2 * window - 1);
    let table: Vec<f64> = (0..rel * heads).map(|_| rng.random_range(-2.0..2.0)).collect();
    let masks = masked.then_some((side, shift));
    let (out, _) = tape_attention(&tokens, side * side, window, &p, table, masks);
    let mut spread: f64 = 0.0;
    for r in 0..regions {
        let rows: Vec<&[f64]> = order
            .iter()
            .enumerate()
            .filter(|(_, &pos)| ids[pos] == r)
            .map(|(k, _)| &out[k * channels..(k + 1) * channels])
            .collect();
        for row in &rows[1..] {
            for (a, b) in row.iter().zip(rows[0]) {
                spread = spread.max((a - b).abs());
            }
        }
    }
    spread
}

/// Multiply-accumulates of one windowed-attention layer on a `side×side`
/// token grid.
pub fn attention_macs(side: usize, window: usize, channels: usize, heads: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(side as u64);
    let p = DenseParams::random(&mut rng, channels, heads);
    let n = side * side;
    let x = vec![0.1; n * channels];
    let rel = (2 * window - 1) * (2 * window - 1);
    tape_attention(&x, n, window, &p, vec![0.0; rel * heads], None).1
}
