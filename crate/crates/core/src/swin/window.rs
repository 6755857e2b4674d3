//! Token-grid bookkeeping for windowed attention.
//!
//! Grids are stored row-major as `(row, col, channel)`. Every rearrangement
//! here is a permutation of token rows; the `*_order` functions return the
//! permutation as "source row for each output row" so the same maps drive
//! both the plain-array helpers and the differentiable gathers in the model.

use super::SwinError;

/// Additive attention mask value for token pairs that must not interact.
pub const MASK_NEG: f64 = -1e9;

/// An `h × w × c` grid of token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl TokenGrid {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self, SwinError> {
        if data.len() != height * width * channels {
            return Err(SwinError::Shape(format!(
                "{height}x{width}x{channels} grid needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn token(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    fn permuted(&self, order: &[usize], height: usize, width: usize) -> TokenGrid {
        let c = self.channels;
        let data = order
            .iter()
            .flat_map(|&src| self.data[src * c..(src + 1) * c].iter().copied())
            .collect();
        TokenGrid {
            height,
            width,
            channels: c,
            data,
        }
    }
}

/// Row-major windows, row-major tokens inside each window.
pub fn partition_order(height: usize, width: usize, window: usize) -> Result<Vec<usize>, SwinError> {
    if window == 0 || height % window != 0 || width % window != 0 {
        return Err(SwinError::Config(format!(
            "{height}x{width} grid is not divisible by window {window}"
        )));
    }
    let mut order = Vec::with_capacity(height * width);
    for wy in 0..height / window {
        for wx in 0..width / window {
            for y in 0..window {
                for x in 0..window {
                    order.push((wy * window + y) * width + wx * window + x);
                }
            }
        }
    }
    Ok(order)
}

/// Toroidal roll by `(-dy, -dx)`: output `(y, x)` reads input
/// `((y + dy) mod h, (x + dx) mod w)`.
pub fn shift_order(height: usize, width: usize, dy: isize, dx: isize) -> Vec<usize> {
    let (h, w) = (height as isize, width as isize);
    let mut order = Vec::with_capacity(height * width);
    for y in 0..h {
        for x in 0..w {
            let sy = (y + dy).rem_euclid(h);
            let sx = (x + dx).rem_euclid(w);
            order.push((sy * w + sx) as usize);
        }
    }
    order
}

pub fn invert_order(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (dst, &src) in order.iter().enumerate() {
        inv[src] = dst;
    }
    inv
}

/// Expands a token-row permutation into a flat element index for `channels`.
pub fn expand_rows(order: &[usize], channels: usize) -> Vec<usize> {
    order
        .iter()
        .flat_map(|&r| r * channels..(r + 1) * channels)
        .collect()
}

pub fn cyclic_shift(grid: &TokenGrid, dy: isize, dx: isize) -> TokenGrid {
    grid.permuted(&shift_order(grid.height, grid.width, dy, dx), grid.height, grid.width)
}

pub fn window_partition(grid: &TokenGrid, window: usize) -> Result<Vec<TokenGrid>, SwinError> {
    let order = partition_order(grid.height, grid.width, window)?;
    let per = window * window;
    Ok(order
        .chunks(per)
        .map(|chunk| grid.permuted(chunk, window, window))
        .collect())
}

pub fn window_reverse(
    windows: &[TokenGrid],
    height: usize,
    width: usize,
    window: usize,
) -> Result<TokenGrid, SwinError> {
    let order = partition_order(height, width, window)?;
    let expected = (height / window) * (width / window);
    if windows.len() != expected {
        return Err(SwinError::Shape(format!(
            "{height}x{width} grid with window {window} needs {expected} windows, got {}",
            windows.len()
        )));
    }
    let channels = windows[0].channels;
    if let Some(bad) = windows
        .iter()
        .find(|w| w.height != window || w.width != window || w.channels != channels)
    {
        return Err(SwinError::Shape(format!(
            "window of {}x{}x{} does not match {window}x{window}x{channels}",
            bad.height, bad.width, bad.channels
        )));
    }
    let mut data = vec![0.0; height * width * channels];
    let per = window * window;
    for (k, &dst) in order.iter().enumerate() {
        let src = &windows[k / per].data[(k % per) * channels..(k % per + 1) * channels];
        data[dst * channels..(dst + 1) * channels].copy_from_slice(src);
    }
    TokenGrid::new(height, width, channels, data)
}

/// Additive `(w²)×(w²)` mask for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMask {
    pub tokens: usize,
    pub data: Vec<f64>,
}

impl AttentionMask {
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.tokens + j]
    }
}

/// Region id of each position in the shifted frame: rows and columns are
/// each cut at `size - window` and `size - shift` into three bands.
pub fn shift_region_ids(height: usize, width: usize, window: usize, shift: usize) -> Vec<usize> {
    let band = |v: usize, size: usize| {
        if v < size.saturating_sub(window) {
            0
        } else if v < size - shift {
            1
        } else {
            2
        }
    };
    let mut ids = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            ids.push(band(y, height) * 3 + band(x, width));
        }
    }
    ids
}

/// One mask per window in partition order; all zeros when `shift == 0`.
pub fn build_shift_mask(
    height: usize,
    width: usize,
    window: usize,
    shift: usize,
) -> Result<Vec<AttentionMask>, SwinError> {
    if shift >= window {
        return Err(SwinError::Config(format!(
            "shift {shift} must be smaller than window {window}"
        )));
    }
    let order = partition_order(height, width, window)?;
    let per = window * window;
    let ids = shift_region_ids(height, width, window, shift);
    Ok(order
        .chunks(per)
        .map(|chunk| {
            let mut data = vec![0.0; per * per];
            if shift > 0 {
                for i in 0..per {
                    for j in 0..per {
                        if ids[chunk[i]] != ids[chunk[j]] {
                            data[i * per + j] = MASK_NEG;
                        }
                    }
                }
            }
            AttentionMask { tokens: per, data }
        })
        .collect())
}

/// Index into the `(2w-1)²` relative-position table for every token pair of
/// a `w×w` window.
pub fn relative_bias_index(window: usize) -> Vec<usize> {
    let per = window * window;
    let side = 2 * window - 1;
    let mut index = Vec::with_capacity(per * per);
    for i in 0..per {
        let (yi, xi) = (i / window, i % window);
        for j in 0..per {
            let (yj, xj) = (j / window, j % window);
            let dy = yi + window - 1 - yj;
            let dx = xi + window - 1 - xj;
            index.push(dy * side + dx);
        }
    }
    index
}
