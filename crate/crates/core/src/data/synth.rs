//! Synthetic stand-in datasets: noisy dark scans with or without a bright
//! disk. Class is encoded by where the disk sits and how large it is.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{encode_p5, DataError, DatasetManifest, Image, ManifestEntry, Rgb8Image, Sample, Task, TARGET_SIZE};

const BACKGROUND: f64 = 25.0;
const BACKGROUND_NOISE: f64 = 15.0;
const DISK: f64 = 200.0;
const DISK_NOISE: f64 = 20.0;

/// A drawn disk and the number of pixels it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskImage {
    pub image: Rgb8Image,
    pub disk_pixels: usize,
}

/// Gray `size×size` scan with uniform background noise and an optional
/// disk. A pixel is inside when its center lies within `radius`.
pub fn disk_image<R: Rng + ?Sized>(size: usize, disk: Option<(f64, f64, f64)>, rng: &mut R) -> DiskImage {
    let mut pixels = Vec::with_capacity(size * size);
    let mut disk_pixels = 0;
    for y in 0..size {
        for x in 0..size {
            let inside = disk.is_some_and(|(cy, cx, r)| {
                let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                dy * dy + dx * dx <= r * r
            });
            let v = if inside {
                disk_pixels += 1;
                DISK + rng.random_range(-DISK_NOISE..=DISK_NOISE)
            } else {
                BACKGROUND + rng.random_range(-BACKGROUND_NOISE..=BACKGROUND_NOISE)
            };
            let g = v.round().clamp(0.0, 255.0) as u8;
            pixels.push([g, g, g]);
        }
    }
    DiskImage {
        image: Rgb8Image {
            width: size,
            height: size,
            pixels,
        },
        disk_pixels,
    }
}

/// Label 1 ("Yes"): bright disk near the center; label 0: background only.
pub fn detection_image<R: Rng + ?Sized>(label: usize, rng: &mut R) -> DiskImage {
    let mid = TARGET_SIZE as f64 / 2.0;
    let disk = (label == 1).then(|| {
        (
            mid + rng.random_range(-2.0..=2.0),
            mid + rng.random_range(-2.0..=2.0),
            rng.random_range(8.0..=14.0),
        )
    });
    disk_image(TARGET_SIZE, disk, rng)
}

/// 0: small disk high in the frame; 1: large central disk; 2: tiny disk
/// low in the frame.
pub fn classification_image<R: Rng + ?Sized>(label: usize, rng: &mut R) -> DiskImage {
    let mid = TARGET_SIZE as f64 / 2.0;
    let jitter = |rng: &mut R, a: f64| rng.random_range(-a..=a);
    let disk = match label {
        0 => (14.0 + jitter(rng, 1.0), mid + jitter(rng, 4.0), rng.random_range(7.0..=9.0)),
        1 => (mid + jitter(rng, 2.0), mid + jitter(rng, 2.0), rng.random_range(13.0..=16.0)),
        _ => (47.0 + jitter(rng, 1.0), mid + jitter(rng, 2.0), rng.random_range(4.0..=6.0)),
    };
    disk_image(TARGET_SIZE, Some(disk), rng)
}

fn generate(task: Task, count: usize, seed: u64) -> Vec<(usize, Rgb8Image)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = task.num_classes();
    (0..count)
        .map(|i| {
            let label = i % k;
            let img = match task {
                Task::Detection => detection_image(label, &mut rng),
                Task::Classification => classification_image(label, &mut rng),
            };
            (label, img.image)
        })
        .collect()
}

/// Class-balanced in-memory dataset (labels cycle through the classes).
pub fn synthetic_samples(task: Task, count: usize, seed: u64) -> Vec<Sample> {
    generate(task, count, seed)
        .into_iter()
        .enumerate()
        .map(|(i, (label, img))| Sample {
            image: Image::from_rgb8(&img),
            label,
            source_path: format!("synthetic/{task}/{i:05}.pgm"),
            task,
        })
        .collect()
}

/// Writes `count` P5 images plus `manifest.csv` into `dir`.
pub fn write_synthetic_dataset(dir: &Path, task: Task, count: usize, seed: u64) -> Result<DatasetManifest, DataError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(count);
    for (i, (label, img)) in generate(task, count, seed).into_iter().enumerate() {
        let name = format!("{}_{i:05}.pgm", task.as_str());
        let gray: Vec<u8> = img.pixels.iter().map(|p| p[0]).collect();
        std::fs::write(dir.join(&name), encode_p5(img.width, img.height, &gray))?;
        entries.push(ManifestEntry {
            path: name,
            task,
            class_name: task.classes()[label].to_owned(),
        });
    }
    let manifest = DatasetManifest::new(entries, dir)?;
    std::fs::write(dir.join("manifest.csv"), manifest.to_csv()?)?;
    Ok(manifest)
}
