//! Brute-force metric recomputation from raw label sequences.

#![allow(dead_code)]

use swinscan_core::metrics::{complement_rates, ConfusionMatrix, MetricsReport};

/// The nine measures counted straight from `(actual, predicted)` pairs,
/// positive class 1.
pub fn brute_force(actual: &[usize], predicted: &[usize]) -> [Option<f64>; 9] {
    let count = |a: usize, p: usize| actual.iter().zip(predicted).filter(|&(&x, &y)| x == a && y == p).count() as u64;
    let (tp, tn, fp, fn_) = (count(1, 1), count(0, 0), count(0, 1), count(1, 0));
    let div = |n: u64, d: u64| (d > 0).then(|| n as f64 / d as f64);
    let n = actual.len() as u64;
    [
        div(tp, tp + fn_),
        div(tn, tn + fp),
        div(fp, fp + tn),
        div(fn_, fn_ + tp),
        div(tp, tp + fp),
        div(tn, tn + fn_),
        (tp + fp + fn_ > 0).then(|| tp as f64 / (tp as f64 + 0.5 * (fp + fn_) as f64)),
        div(tp + tn, n),
        div(fp + fn_, n),
    ]
}

/// Every binary matrix with total ≤ `max_total`, realized as label
/// sequences. Returns `(matrices checked, mismatches)`.
pub fn exhaustive_binary(max_total: u64) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for tp in 0..=max_total {
        for tn in 0..=max_total - tp {
            for fp in 0..=max_total - tp - tn {
                for fn_ in 0..=max_total - tp - tn - fp {
                    let mut actual = Vec::new();
                    let mut predicted = Vec::new();
                    for (a, p, k) in [(1, 1, tp), (0, 0, tn), (0, 1, fp), (1, 0, fn_)] {
                        actual.extend(std::iter::repeat_n(a, k as usize));
                        predicted.extend(std::iter::repeat_n(p, k as usize));
                    }
                    let cm = ConfusionMatrix::from_predictions(&actual, &predicted, 2).unwrap();
                    let report = MetricsReport::from_matrix(&cm).unwrap();
                    let got: Vec<Option<f64>> = report.measures().iter().map(|m| m.1).collect();
                    let want = brute_force(&actual, &predicted);
                    if got != want {
                        bad.push(format!("tp {tp} tn {tn} fp {fp} fn {fn_}: {got:?} vs {want:?}"));
                    }
                    checked += 1;
                }
            }
        }
    }
    (checked, bad)
}

/// Largest gap between the `1 − x` complements and the direct count
/// formulas over `n` pseudo-random matrices.
pub fn complement_gap(n: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let mut c = || rng.random_range(0..10_000u64);
        let cm = ConfusionMatrix::binary(c() + 1, c() + 1, c(), c());
        let r = MetricsReport::from_matrix(&cm).unwrap();
        let (fo, mr, er) = complement_rates(&r);
        for (a, b) in [(fo, r.fall_out), (mr, r.miss_rate), (er, r.error_rate)] {
            worst = worst.max((a.unwrap() - b.unwrap()).abs());
        }
    }
    worst
}
