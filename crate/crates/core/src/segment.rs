//! Tumor-region extraction: luma grayscale, Otsu threshold, 4-connected
//! components, largest-region size estimate and a yellow overlay.
//!
//! All intensity rounding is half away from zero (`f64::round`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{encode_p5, encode_p6, Rgb8Image};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("segmentation input error: {0}")]
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, SegmentError> {
        if data.len() != width * height {
            return Err(SegmentError::Input(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn to_p5(&self) -> Vec<u8> {
        encode_p5(self.width, self.height, &self.data)
    }
}

/// `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(rgb: &Rgb8Image) -> GrayImage {
    let data = rgb
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width: rgb.width,
        height: rgb.height,
        data,
    }
}

pub fn histogram(gray: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in &gray.data {
        h[v as usize] += 1;
    }
    h
}

/// Between-class variance (up to the constant `1/N²`) for a split where
/// the lower class holds `w0` pixels with intensity sum `s0`.
pub fn between_class_variance(w0: u64, s0: u64, total: u64, sum: u64) -> f64 {
    let w1 = total - w0;
    if w0 == 0 || w1 == 0 {
        return 0.0;
    }
    let (w0, w1) = (w0 as f64, w1 as f64);
    let m0 = s0 as f64 / w0;
    let m1 = (sum - s0) as f64 / w1;
    w0 * w1 * (m0 - m1) * (m0 - m1)
}

/// Otsu level: pixels `> level` form the foreground. Ties go to the lower
/// level. A constant image returns its own value, so its mask is empty.
pub fn otsu_threshold(gray: &GrayImage) -> Result<u8, SegmentError> {
    if gray.data.is_empty() {
        return Err(SegmentError::Input("empty image".into()));
    }
    let hist = histogram(gray);
    let total: u64 = hist.iter().sum();
    let sum: u64 = hist.iter().enumerate().map(|(v, &n)| v as u64 * n).sum();
    let (mut w0, mut s0) = (0u64, 0u64);
    let mut best: Option<(u8, f64)> = None;
    for level in 0..256usize {
        w0 += hist[level];
        s0 += level as u64 * hist[level];
        let var = between_class_variance(w0, s0, total, sum);
        if w0 == 0 || w0 == total {
            continue;
        }
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((level as u8, var));
        }
    }
    Ok(match best {
        Some((level, _)) => level,
        None => gray.data[0],
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TumorMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl TumorMask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    /// White-on-black P5 rendering.
    pub fn to_p5(&self) -> Vec<u8> {
        let gray: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        encode_p5(self.width, self.height, &gray)
    }
}

/// `intensity > level`; levels outside `0..=255` are rejected.
pub fn threshold_mask(gray: &GrayImage, level: i32) -> Result<TumorMask, SegmentError> {
    if !(0..=255).contains(&level) {
        return Err(SegmentError::Input(format!("threshold level {level} outside 0..=255")));
    }
    Ok(TumorMask {
        width: gray.width,
        height: gray.height,
        data: gray.data.iter().map(|&v| i32::from(v) > level).collect(),
    })
}

/// Component labels per pixel (0 = background, regions dense from 1 in
/// raster order of first pixel) and the area of each region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
    /// `areas[l - 1]` is the pixel count of label `l`.
    pub areas: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.areas.len()
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Two-pass union-find labeling with 4-connectivity.
pub fn connected_components(mask: &TumorMask) -> Components {
    let (w, h) = (mask.width, mask.height);
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !mask.data[i] {
                continue;
            }
            for j in [(x > 0).then(|| i - 1), (y > 0).then(|| i - w)].into_iter().flatten() {
                if mask.data[j] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    // Roots are the smallest index in each set, so visiting in raster order
    // meets every root before its members.
    let mut labels = vec![0; w * h];
    let mut root_label = vec![0; w * h];
    let mut areas = Vec::new();
    for i in 0..w * h {
        if !mask.data[i] {
            continue;
        }
        let r = find(&mut parent, i);
        if root_label[r] == 0 {
            areas.push(0);
            root_label[r] = areas.len();
        }
        labels[i] = root_label[r];
        areas[root_label[r] - 1] += 1;
    }
    Components {
        width: w,
        height: h,
        labels,
        areas,
    }
}

/// Size of the largest region. `bbox` is `(row0, col0, row1, col1)`
/// inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub area_px: usize,
    pub area_mm2: Option<f64>,
    pub bbox: Option<(usize, usize, usize, usize)>,
    pub centroid: Option<(f64, f64)>,
    pub region_found: bool,
}

/// Picks the largest region (ties to the smallest label). With no region
/// the result has area 0 and `region_found == false`.
pub fn estimate_size(components: &Components, pixel_spacing_mm: Option<f64>) -> SizeEstimate {
    let best = components
        .areas
        .iter()
        .enumerate()
        .fold(None::<(usize, usize)>, |acc, (i, &a)| match acc {
            Some((_, best)) if best >= a => acc,
            _ => Some((i + 1, a)),
        });
    let Some((label, area)) = best else {
        return SizeEstimate {
            area_px: 0,
            area_mm2: pixel_spacing_mm.map(|_| 0.0),
            bbox: None,
            centroid: None,
            region_found: false,
        };
    };
    let w = components.width;
    let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
    let (mut sy, mut sx) = (0usize, 0usize);
    for (i, _) in components.labels.iter().enumerate().filter(|(_, &l)| l == label) {
        let (y, x) = (i / w, i % w);
        r0 = r0.min(y);
        c0 = c0.min(x);
        r1 = r1.max(y);
        c1 = c1.max(x);
        sy += y;
        sx += x;
    }
    SizeEstimate {
        area_px: area,
        area_mm2: pixel_spacing_mm.map(|s| area as f64 * s * s),
        bbox: Some((r0, c0, r1, c1)),
        centroid: Some((sy as f64 / area as f64, sx as f64 / area as f64)),
        region_found: true,
    }
}

/// Blends masked pixels toward (255, 255, 0); others are copied unchanged.
pub fn highlight_yellow(rgb: &Rgb8Image, mask: &TumorMask, alpha: f64) -> Result<Rgb8Image, SegmentError> {
    if (rgb.width, rgb.height) != (mask.width, mask.height) {
        return Err(SegmentError::Input(format!(
            "mask is {}x{} but image is {}x{}",
            mask.width, mask.height, rgb.width, rgb.height
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SegmentError::Input(format!("alpha {alpha} outside [0, 1]")));
    }
    let blend = |src: u8, target: f64| ((1.0 - alpha) * f64::from(src) + alpha * target).round().clamp(0.0, 255.0) as u8;
    let pixels = rgb
        .pixels
        .iter()
        .zip(&mask.data)
        .map(|(&[r, g, b], &m)| if m { [blend(r, 255.0), blend(g, 255.0), blend(b, 0.0)] } else { [r, g, b] })
        .collect();
    Ok(Rgb8Image {
        width: rgb.width,
        height: rgb.height,
        pixels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub threshold: u8,
    pub mask: TumorMask,
    pub size: SizeEstimate,
    pub highlighted: Rgb8Image,
}

impl SegmentationResult {
    pub fn highlighted_p6(&self) -> Vec<u8> {
        encode_p6(&self.highlighted)
    }
}

pub const DEFAULT_ALPHA: f64 = 0.5;

/// Full chain: grayscale, Otsu, largest 4-connected region, overlay of
/// that region.
pub fn segment(rgb: &Rgb8Image, pixel_spacing_mm: Option<f64>) -> Result<SegmentationResult, SegmentError> {
    let gray = to_grayscale(rgb);
    let threshold = otsu_threshold(&gray)?;
    let mask = threshold_mask(&gray, i32::from(threshold))?;
    let comps = connected_components(&mask);
    let size = estimate_size(&comps, pixel_spacing_mm);
    let largest = largest_label(&comps);
    let region = TumorMask {
        width: mask.width,
        height: mask.height,
        data: comps.labels.iter().map(|&l| l != 0 && Some(l) == largest).collect(),
    };
    let highlighted = highlight_yellow(rgb, &region, DEFAULT_ALPHA)?;
    Ok(SegmentationResult {
        threshold,
        mask: region,
        size,
        highlighted,
    })
}

fn largest_label(c: &Components) -> Option<usize> {
    let max = *c.areas.iter().max()?;
    c.areas.iter().position(|&a| a == max).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Rgb8Image {
        Rgb8Image { width, height, pixels }
    }

    fn mask_from(rows: &[&str]) -> TumorMask {
        let width = rows[0].len();
        TumorMask {
            width,
            height: rows.len(),
            data: rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect(),
        }
    }

    #[test]
    fn grayscale_examples() {
        let g = to_grayscale(&rgb(3, 1, vec![[255, 255, 255], [255, 0, 0], [37, 37, 37]]));
        assert_eq!(g.data, vec![255, 76, 37]);
        let all_gray = rgb(256, 1, (0..=255u8).map(|v| [v, v, v]).collect());
        assert_eq!(to_grayscale(&all_gray).data, (0..=255u8).collect::<Vec<_>>());
    }

    #[test]
    fn otsu_constant_image_gives_empty_mask() {
        let g = GrayImage::new(4, 4, vec![90; 16]).unwrap();
        let level = otsu_threshold(&g).unwrap();
        assert_eq!(level, 90);
        assert_eq!(threshold_mask(&g, level.into()).unwrap().count(), 0);
        assert!(otsu_threshold(&GrayImage::new(0, 0, vec![]).unwrap()).is_err());
    }

    #[test]
    fn otsu_separates_two_levels() {
        let g = GrayImage::new(4, 2, vec![0, 255, 0, 255, 0, 255, 0, 255]).unwrap();
        let level = otsu_threshold(&g).unwrap();
        let m = threshold_mask(&g, level.into()).unwrap();
        assert_eq!(m.data, g.data.iter().map(|&v| v == 255).collect::<Vec<_>>());
        let g = GrayImage::new(3, 3, vec![10, 10, 200, 10, 200, 200, 10, 10, 10]).unwrap();
        let level = otsu_threshold(&g).unwrap();
        assert!((10..200).contains(&level));
    }

    #[test]
    fn threshold_examples() {
        let g = GrayImage::new(2, 2, vec![0, 255, 255, 0]).unwrap();
        assert_eq!(threshold_mask(&g, 255).unwrap().count(), 0);
        assert!(threshold_mask(&g, -1).is_err());
        assert_eq!(threshold_mask(&g, 0).unwrap().data, vec![false, true, true, false]);
    }

    #[test]
    fn components_examples() {
        let block = mask_from(&["###", "###", "###"]);
        let c = connected_components(&block);
        assert_eq!(c.areas, vec![9]);
        let diag = mask_from(&["#.", ".#"]);
        assert_eq!(connected_components(&diag).count(), 2);
        // A U shape merges late in the raster scan.
        let u = mask_from(&["#.#", "#.#", "###"]);
        let c = connected_components(&u);
        assert_eq!(c.areas, vec![7]);
        assert!(c.labels.iter().zip(&u.data).all(|(&l, &m)| (l == 1) == m));
    }

    #[test]
    fn estimate_size_examples() {
        let mut rows = vec!["..........".to_owned(); 8];
        for row in rows.iter_mut().take(5).skip(2) {
            row.replace_range(5..8, "###");
        }
        let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
        let c = connected_components(&mask_from(&rows));
        let s = estimate_size(&c, Some(0.5));
        assert_eq!(s.area_px, 9);
        assert_eq!(s.bbox, Some((2, 5, 4, 7)));
        assert_eq!(s.centroid, Some((3.0, 6.0)));
        assert_eq!(s.area_mm2, Some(2.25));

        let two = mask_from(&["##...", "##.##", "#..##", "....#", "....#"]);
        let c = connected_components(&two);
        assert_eq!(c.areas, vec![5, 6]);
        assert_eq!(estimate_size(&c, None).area_px, 6);

        let tie = mask_from(&["#.#"]);
        assert_eq!(estimate_size(&connected_components(&tie), None).bbox, Some((0, 0, 0, 0)));

        let empty = estimate_size(&connected_components(&mask_from(&["..."])), None);
        assert!(!empty.region_found);
        assert_eq!((empty.area_px, empty.bbox), (0, None));
    }

    #[test]
    fn highlight_examples() {
        let img = rgb(2, 1, vec![[0, 0, 0], [10, 20, 30]]);
        let m = TumorMask { width: 2, height: 1, data: vec![true, false] };
        let h = highlight_yellow(&img, &m, 0.5).unwrap();
        assert_eq!(h.pixels, vec![[128, 128, 0], [10, 20, 30]]);
        assert_eq!(highlight_yellow(&img, &m, 1.0).unwrap().pixels[0], [255, 255, 0]);
        let wrong = TumorMask { width: 1, height: 1, data: vec![true] };
        assert!(highlight_yellow(&img, &wrong, 0.5).is_err());
    }

    #[test]
    fn segment_finds_synthetic_disk() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let d = crate::data::synth::disk_image(64, Some((30.0, 34.0, 10.0)), &mut rng);
        let r = segment(&d.image, None).unwrap();
        assert_eq!(r.size.area_px, d.disk_pixels);
        let (cy, cx) = r.size.centroid.unwrap();
        assert!((cy - 29.5).abs() < 0.5 && (cx - 33.5).abs() < 0.5);
        assert!(r.highlighted_p6().starts_with(b"P6\n64 64\n255\n"));
    }
}
