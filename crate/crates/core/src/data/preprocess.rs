use serde::{Deserialize, Serialize};

use super::{DataError, Image};

/// Model input side length in pixels.
pub const TARGET_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resample {
    Bilinear,
}

/// Feature-extractor settings: resampling, then per-channel normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub resample: Resample,
    pub image_mean: [f64; 3],
    pub image_std: [f64; 3],
    pub target_size: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            resample: Resample::Bilinear,
            image_mean: [0.5; 3],
            image_std: [0.5; 3],
            target_size: TARGET_SIZE,
        }
    }
}

impl PreprocessConfig {
    pub fn new(image_mean: [f64; 3], image_std: [f64; 3]) -> Result<Self, DataError> {
        let cfg = Self {
            image_mean,
            image_std,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.image_std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(DataError::Input(format!("image_std must be positive, got {:?}", self.image_std)));
        }
        if self.image_mean.iter().any(|m| !m.is_finite()) {
            return Err(DataError::Input("image_mean must be finite".into()));
        }
        if self.target_size != TARGET_SIZE {
            return Err(DataError::Input(format!(
                "target_size must be {TARGET_SIZE}, got {}",
                self.target_size
            )));
        }
        Ok(())
    }
}

/// Separable bilinear resampling with half-pixel centers (align-corners
/// false): output pixel `d` samples source coordinate `(d + 0.5)·in/out − 0.5`,
/// clamped to the valid range.
pub fn resize_bilinear(image: &Image, out_h: usize, out_w: usize) -> Result<Image, DataError> {
    if image.height == 0 || image.width == 0 || out_h == 0 || out_w == 0 {
        return Err(DataError::Input(format!(
            "cannot resize {}x{} to {out_h}x{out_w}",
            image.height, image.width
        )));
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|d| {
                let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let ys = taps(out_h, image.height);
    let xs = taps(out_w, image.width);
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let mut data = Vec::with_capacity(3 * out_h * out_w);
    for c in 0..3 {
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = lerp(image.get(c, y0, x0), image.get(c, y0, x1), fx);
                let bottom = lerp(image.get(c, y1, x0), image.get(c, y1, x1), fx);
                data.push(lerp(top, bottom, fy));
            }
        }
    }
    Image::new(out_h, out_w, data)
}

/// Per channel `(x − mean) / std`.
pub fn normalize(image: &Image, config: &PreprocessConfig) -> Image {
    let plane = image.height * image.width;
    let data = image
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = i / plane;
            (v - config.image_mean[c]) / config.image_std[c]
        })
        .collect();
    Image {
        data,
        ..image.clone()
    }
}

pub fn denormalize(image: &Image, config: &PreprocessConfig) -> Image {
    let plane = image.height * image.width;
    let data = image
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = i / plane;
            v * config.image_std[c] + config.image_mean[c]
        })
        .collect();
    Image {
        data,
        ..image.clone()
    }
}

/// Resize to the target size (if needed) and normalize.
pub fn preprocess(image: &Image, config: &PreprocessConfig) -> Result<Image, DataError> {
    config.validate()?;
    let sized = if image.height == config.target_size && image.width == config.target_size {
        image.clone()
    } else {
        resize_bilinear(image, config.target_size, config.target_size)?
    };
    Ok(normalize(&sized, config))
}
