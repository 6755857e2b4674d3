use serde::{Deserialize, Serialize};

use super::SwinError;

/// Architecture hyperparameters shared by the detection and classification
/// models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwinConfig {
    pub image_size: usize,
    pub in_channels: usize,
    pub patch_size: usize,
    pub embed_dim: usize,
    /// Blocks per stage.
    pub depths: Vec<usize>,
    /// Attention heads per stage.
    pub num_heads: Vec<usize>,
    pub window_size: usize,
    pub shift_size: usize,
    pub mlp_ratio: usize,
    pub num_classes: usize,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl SwinConfig {
    /// Desk-scale model: 64px input, 4px patches, two stages on 16×16 and
    /// 8×8 token grids.
    pub fn desk(num_classes: usize) -> Self {
        Self {
            image_size: 64,
            in_channels: 3,
            patch_size: 4,
            embed_dim: 32,
            depths: vec![2, 2],
            num_heads: vec![2, 4],
            window_size: 4,
            shift_size: 2,
            mlp_ratio: 4,
            num_classes,
        }
    }

    pub fn detection() -> Self {
        Self::desk(2)
    }

    pub fn classification() -> Self {
        Self::desk(3)
    }

    pub fn num_stages(&self) -> usize {
        self.depths.len()
    }

    /// Token grid side length entering `stage`.
    pub fn grid_side(&self, stage: usize) -> usize {
        (self.image_size / self.patch_size) >> stage
    }

    pub fn stage_dim(&self, stage: usize) -> usize {
        self.embed_dim << stage
    }

    pub fn patch_dim(&self) -> usize {
        self.in_channels * self.patch_size * self.patch_size
    }

    /// Shift used by `block` within a stage: even blocks are unshifted.
    pub fn block_shift(&self, block: usize) -> usize {
        if block % 2 == 0 {
            0
        } else {
            self.shift_size
        }
    }

    pub fn validate(&self) -> Result<(), SwinError> {
        let fail = |msg: String| Err(SwinError::Config(msg));
        if self.image_size == 0 || self.patch_size == 0 || self.embed_dim == 0 || self.in_channels == 0 {
            return fail("image_size, patch_size, embed_dim and in_channels must be positive".into());
        }
        if self.image_size % self.patch_size != 0 {
            return fail(format!(
                "image_size {} is not divisible by patch_size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.depths.is_empty() || self.depths.len() != self.num_heads.len() {
            return fail(format!(
                "depths {:?} and num_heads {:?} must be non-empty and equally long",
                self.depths, self.num_heads
            ));
        }
        if self.window_size == 0 || self.shift_size >= self.window_size {
            return fail(format!(
                "need 0 <= shift_size ({}) < window_size ({})",
                self.shift_size, self.window_size
            ));
        }
        if !(2..=3).contains(&self.num_classes) {
            return fail(format!("num_classes must be 2 or 3, got {}", self.num_classes));
        }
        if self.mlp_ratio == 0 {
            return fail("mlp_ratio must be positive".into());
        }
        for stage in 0..self.num_stages() {
            let side = self.grid_side(stage);
            if side == 0 || side % self.window_size != 0 {
                return fail(format!(
                    "stage {stage} token grid {side} is not divisible by window_size {}",
                    self.window_size
                ));
            }
            if stage + 1 < self.num_stages() && side % 2 != 0 {
                return fail(format!("stage {stage} token grid {side} cannot be merged (odd)"));
            }
            let (dim, heads) = (self.stage_dim(stage), self.num_heads[stage]);
            if heads == 0 || dim % heads != 0 {
                return fail(format!("stage {stage} dim {dim} is not divisible by {heads} heads"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_configs_are_valid() {
        SwinConfig::detection().validate().unwrap();
        SwinConfig::classification().validate().unwrap();
        let c = SwinConfig::detection();
        assert_eq!((c.grid_side(0), c.grid_side(1)), (16, 8));
        assert_eq!((c.stage_dim(0), c.stage_dim(1)), (32, 64));
        assert_eq!(c.patch_dim(), 48);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = SwinConfig::detection();
        c.patch_size = 5;
        assert!(c.validate().is_err());

        let mut c = SwinConfig::detection();
        c.shift_size = 4;
        assert!(c.validate().is_err());

        let mut c = SwinConfig::detection();
        c.window_size = 3;
        c.shift_size = 1;
        assert!(c.validate().is_err());

        let mut c = SwinConfig::detection();
        c.num_classes = 4;
        assert!(c.validate().is_err());

        let mut c = SwinConfig::detection();
        c.num_heads = vec![3, 4];
        assert!(c.validate().is_err());
    }
}
