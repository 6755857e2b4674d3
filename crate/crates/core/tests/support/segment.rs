//! Independent references for the segmentation chain.

#![allow(dead_code)]

use std::collections::VecDeque;

use swinscan_core::segment::{GrayImage, TumorMask};

/// Breadth-first 4-connected flood fill; labels dense from 1 in raster
/// order of each region's first pixel.
pub fn flood_fill_labels(mask: &TumorMask) -> (Vec<usize>, Vec<usize>) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0; w * h];
    let mut areas = Vec::new();
    for start in 0..w * h {
        if !mask.data[start] || labels[start] != 0 {
            continue;
        }
        areas.push(0);
        let label = areas.len();
        labels[start] = label;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            areas[label - 1] += 1;
            let (y, x) = (i / w, i % w);
            let mut visit = |j: usize| {
                if mask.data[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            };
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
        }
    }
    (labels, areas)
}

/// Tries all 256 levels by counting pixels directly; returns the lowest
/// level with the largest between-class variance, or `None` when no level
/// splits the image.
pub fn exhaustive_otsu(gray: &GrayImage) -> Option<u8> {
    let total = gray.data.len() as u64;
    let sum: u64 = gray.data.iter().map(|&v| u64::from(v)).sum();
    let mut best: Option<(u8, f64)> = None;
    for level in 0..=255u8 {
        let below: Vec<u64> = gray.data.iter().filter(|&&v| v <= level).map(|&v| u64::from(v)).collect();
        let w0 = below.len() as u64;
        if w0 == 0 || w0 == total {
            continue;
        }
        let s0: u64 = below.iter().sum();
        let (a, b) = (w0 as f64, (total - w0) as f64);
        let m0 = s0 as f64 / a;
        let m1 = (sum - s0) as f64 / b;
        let var = a * b * (m0 - m1) * (m0 - m1);
        if best.is_none_or(|(_, v)| var > v) {
            best = Some((level, var));
        }
    }
    best.map(|(l, _)| l)
}
