use rand::seq::SliceRandom;
use rand::Rng;

use crate::tensor::Tensor;

use super::{DataError, Sample};

/// Up to `batch_size` images stacked as `b × 3 × H × W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The `i`-th image as a `3 × H × W` tensor.
    pub fn image(&self, i: usize) -> Tensor {
        let shape = &self.images.shape()[1..];
        let per: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), self.images.data()[i * per..(i + 1) * per].to_vec())
            .expect("slice of a valid batch")
    }
}

/// Seeded shuffle, then consecutive chunks of `batch_size`; only the last
/// batch may be short. All samples must share one image size.
pub fn make_batches<R: Rng + ?Sized>(samples: &[Sample], batch_size: usize, rng: &mut R) -> Result<Vec<Batch>, DataError> {
    if batch_size == 0 {
        return Err(DataError::Input("batch_size must be at least 1".into()));
    }
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let (h, w) = (first.image.height, first.image.width);
    if let Some(bad) = samples.iter().find(|s| s.image.height != h || s.image.width != w) {
        return Err(DataError::Input(format!(
            "{} is {}x{}, expected {h}x{w}",
            bad.source_path, bad.image.height, bad.image.width
        )));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .map(|chunk| {
            let mut data = Vec::with_capacity(chunk.len() * 3 * h * w);
            for &i in chunk {
                data.extend_from_slice(&samples[i].image.data);
            }
            Ok(Batch {
                images: Tensor::new(vec![chunk.len(), 3, h, w], data)?,
                labels: chunk.iter().map(|&i| samples[i].label).collect(),
            })
        })
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-sample stream seed derived from a global seed.
pub fn sample_seed(global: u64, index: u64) -> u64 {
    splitmix64(global ^ splitmix64(index))
}
