use crate::tensor::{Tape, Tensor, Var};

use super::window::{relative_bias_index, AttentionMask};
use super::SwinError;

/// Tape handles for one attention layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    /// `C × 3C`, columns ordered q | k | v, heads contiguous inside each.
    pub qkv_weight: Var,
    pub qkv_bias: Var,
    pub proj_weight: Var,
    pub proj_bias: Var,
    /// `(2w-1)² × heads`.
    pub bias_table: Var,
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// Same layout as the input: windows stacked row-wise.
    pub output: Var,
    /// Attention probabilities per `(window, head)`, window-major. Empty
    /// unless requested.
    pub weights: Vec<Var>,
}

/// Multi-head self-attention restricted to each window.
///
/// `tokens` is `(num_windows · w²) × C` with windows stacked in partition
/// order. `masks`, when given, holds one additive mask per window.
pub fn window_attention(
    tape: &mut Tape,
    tokens: Var,
    window_size: usize,
    num_heads: usize,
    params: &AttentionParams,
    masks: Option<&[AttentionMask]>,
    keep_weights: bool,
) -> Result<AttentionOutput, SwinError> {
    let shape = tape.value(tokens).shape().to_vec();
    let [rows, channels] = shape[..] else {
        return Err(SwinError::Shape(format!("attention input must be 2-D, got {shape:?}")));
    };
    if num_heads == 0 || channels % num_heads != 0 {
        return Err(SwinError::Config(format!(
            "{channels} channels are not divisible by {num_heads} heads"
        )));
    }
    let per = window_size * window_size;
    if per == 0 || rows % per != 0 {
        return Err(SwinError::Shape(format!(
            "{rows} tokens do not form whole {window_size}x{window_size} windows"
        )));
    }
    let num_windows = rows / per;
    if let Some(m) = masks {
        if m.len() != num_windows || m.iter().any(|m| m.tokens != per) {
            return Err(SwinError::Shape(format!(
                "expected {num_windows} masks of {per} tokens, got {}",
                m.len()
            )));
        }
    }
    let head_dim = channels / num_heads;
    let table_len = (2 * window_size - 1) * (2 * window_size - 1);
    let table_shape = tape.value(params.bias_table).shape().to_vec();
    if table_shape != [table_len, num_heads] {
        return Err(SwinError::Shape(format!(
            "bias table {table_shape:?} does not match [{table_len}, {num_heads}]"
        )));
    }

    let projected = tape.matmul(tokens, params.qkv_weight)?;
    let qkv = tape.add_row(projected, params.qkv_bias)?;

    let rel = relative_bias_index(window_size);
    let mut head_bias = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let index = rel.iter().map(|&k| k * num_heads + h).collect();
        head_bias.push(tape.gather(params.bias_table, index, vec![per, per])?);
    }

    let mask_vars = match masks {
        Some(ms) => ms
            .iter()
            .map(|m| {
                if m.is_zero() {
                    Ok(None)
                } else {
                    Tensor::new(vec![per, per], m.data.clone()).map(|t| Some(tape.constant(t)))
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![None; num_windows],
    };

    let scale = 1.0 / (head_dim as f64).sqrt();
    let width = 3 * channels;
    let slice = |win: usize, col0: usize| -> Vec<usize> {
        let mut idx = Vec::with_capacity(per * head_dim);
        for t in 0..per {
            let row = (win * per + t) * width;
            idx.extend(row + col0..row + col0 + head_dim);
        }
        idx
    };

    let mut window_outputs = Vec::with_capacity(num_windows);
    let mut weights = Vec::new();
    for win in 0..num_windows {
        let mut heads = Vec::with_capacity(num_heads);
        for h in 0..num_heads {
            let q = tape.gather(qkv, slice(win, h * head_dim), vec![per, head_dim])?;
            let k = tape.gather(qkv, slice(win, channels + h * head_dim), vec![per, head_dim])?;
            let v = tape.gather(qkv, slice(win, 2 * channels + h * head_dim), vec![per, head_dim])?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(q, kt)?;
            let scores = tape.scale(scores, scale)?;
            let mut scores = tape.add(scores, head_bias[h])?;
            if let Some(mask) = mask_vars[win] {
                scores = tape.add(scores, mask)?;
            }
            let attn = tape.softmax_lastdim(scores)?;
            if keep_weights {
                weights.push(attn);
            }
            heads.push(tape.matmul(attn, v)?);
        }
        window_outputs.push(if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat(&heads, 1)?
        });
    }
    let merged = if window_outputs.len() == 1 {
        window_outputs[0]
    } else {
        tape.concat(&window_outputs, 0)?
    };
    let projected = tape.matmul(merged, params.proj_weight)?;
    let output = tape.add_row(projected, params.proj_bias)?;
    Ok(AttentionOutput { output, weights })
}
