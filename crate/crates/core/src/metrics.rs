//! Confusion matrices and the nine rate measures derived from them.
//!
//! For the detection task the positive class is label 1 ("Yes", tumor
//! present). A rate whose denominator is zero is undefined (`None`) and
//! renders as `-`.
//!
//! F1 uses the count form `TP / (TP + ½(FP + FN))`, which equals the
//! harmonic mean `2PR / (P + R)`. The product-over-sum form without the
//! factor 2 is half the harmonic mean and is not used.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("metrics input error: {0}")]
    Input(String),
}

/// A rate in `[0, 1]`, or `None` when its denominator is zero.
pub type Rate = Option<f64>;

fn ratio(num: u64, den: u64) -> Rate {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `k × k` counts; rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self, MetricsError> {
        if counts.len() != classes * classes {
            return Err(MetricsError::Input(format!(
                "{classes} classes need {} counts, got {}",
                classes * classes,
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn from_predictions(actual: &[usize], predicted: &[usize], classes: usize) -> Result<Self, MetricsError> {
        if actual.len() != predicted.len() {
            return Err(MetricsError::Input(format!(
                "{} actual labels but {} predictions",
                actual.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::new(classes);
        for (i, (&a, &p)) in actual.iter().zip(predicted).enumerate() {
            if a >= classes || p >= classes {
                return Err(MetricsError::Input(format!(
                    "pair {i} ({a}, {p}) has a class id outside 0..{classes}"
                )));
            }
            cm.counts[a * classes + p] += 1;
        }
        Ok(cm)
    }

    /// Binary matrix from the four cell counts.
    pub fn binary(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self {
            classes: 2,
            counts: vec![tn, fp, fn_, tp],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual * self.classes + predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    /// Adds another matrix's counts; associative and commutative.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if other.classes != self.classes {
            return Err(MetricsError::Input(format!(
                "cannot merge {}-class and {}-class matrices",
                self.classes, other.classes
            )));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    /// Cell counts of a 2-class matrix.
    pub fn binary_counts(&self) -> Result<BinaryCounts, MetricsError> {
        if self.classes != 2 {
            return Err(MetricsError::Input(format!(
                "binary measures need a 2-class matrix, got {}",
                self.classes
            )));
        }
        Ok(self.one_vs_rest(1))
    }

    /// Treats `class` as positive and every other class as negative.
    pub fn one_vs_rest(&self, class: usize) -> BinaryCounts {
        let mut c = BinaryCounts::default();
        for a in 0..self.classes {
            for p in 0..self.classes {
                let n = self.get(a, p);
                match (a == class, p == class) {
                    (true, true) => c.tp += n,
                    (true, false) => c.fn_ += n,
                    (false, true) => c.fp += n,
                    (false, false) => c.tn += n,
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// True positive rate, `TP / (TP + FN)`.
pub fn sensitivity(c: &BinaryCounts) -> Rate {
    ratio(c.tp, c.tp + c.fn_)
}

/// True negative rate, `TN / (TN + FP)`.
pub fn specificity(c: &BinaryCounts) -> Rate {
    ratio(c.tn, c.tn + c.fp)
}

/// `(TP / (TP + FP), TN / (TN + FN))`.
pub fn predictive_values(c: &BinaryCounts) -> (Rate, Rate) {
    (ratio(c.tp, c.tp + c.fp), ratio(c.tn, c.tn + c.fn_))
}

pub fn f1(c: &BinaryCounts) -> Rate {
    let den = c.tp as f64 + 0.5 * (c.fp + c.fn_) as f64;
    (c.tp + c.fp + c.fn_ > 0).then(|| c.tp as f64 / den)
}

/// Harmonic mean of precision and recall.
pub fn f1_from_rates(precision: f64, recall: f64) -> Rate {
    (precision + recall > 0.0).then(|| 2.0 * precision * recall / (precision + recall))
}

/// Fraction of samples on the diagonal.
pub fn accuracy(cm: &ConfusionMatrix) -> Rate {
    ratio(cm.trace(), cm.total())
}

/// `(fall_out, miss_rate, error_rate)` as `1 −` specificity, sensitivity
/// and accuracy.
pub fn complement_rates(report: &MetricsReport) -> (Rate, Rate, Rate) {
    let c = |r: Rate| r.map(|v| 1.0 - v);
    (c(report.specificity), c(report.sensitivity), c(report.accuracy))
}

/// The nine measures, keyed after the performance-table row labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Rate,
    pub specificity: Rate,
    pub fall_out: Rate,
    pub miss_rate: Rate,
    pub ppv: Rate,
    pub npv: Rate,
    #[serde(rename = "f1_score")]
    pub f1: Rate,
    pub accuracy: Rate,
    pub error_rate: Rate,
    /// One-vs-rest reports per class, filled for `k > 2`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<MetricsReport>,
}

impl MetricsReport {
    /// All nine measures from binary counts, each from its own count
    /// formula.
    pub fn from_binary(c: &BinaryCounts) -> Self {
        let (ppv, npv) = predictive_values(c);
        let total = c.total();
        Self {
            sensitivity: sensitivity(c),
            specificity: specificity(c),
            fall_out: ratio(c.fp, c.tn + c.fp),
            miss_rate: ratio(c.fn_, c.fn_ + c.tp),
            ppv,
            npv,
            f1: f1(c),
            accuracy: ratio(c.tp + c.tn, total),
            error_rate: ratio(c.fp + c.fn_, total),
            per_class: Vec::new(),
        }
    }

    /// Binary report for `k == 2`, macro report otherwise.
    pub fn from_matrix(cm: &ConfusionMatrix) -> Result<Self, MetricsError> {
        match cm.classes() {
            2 => Ok(Self::from_binary(&cm.binary_counts()?)),
            k if k > 2 => macro_multiclass(cm),
            k => Err(MetricsError::Input(format!("need at least 2 classes, got {k}"))),
        }
    }

    /// `(name, value)` in table order.
    pub fn measures(&self) -> [(&'static str, Rate); 9] {
        [
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
            ("fall_out", self.fall_out),
            ("miss_rate", self.miss_rate),
            ("ppv", self.ppv),
            ("npv", self.npv),
            ("f1_score", self.f1),
            ("accuracy", self.accuracy),
            ("error_rate", self.error_rate),
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json_like(self)
    }
}

/// Deterministic JSON without pulling a JSON crate into the core library:
/// fixed key order, shortest round-trip float formatting, `null` for
/// undefined.
fn serde_json_like(r: &MetricsReport) -> String {
    fn body(r: &MetricsReport, out: &mut String) {
        out.push('{');
        for (i, (name, v)) in r.measures().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("\"{name}\":"));
            match v {
                Some(x) => out.push_str(&format!("{x:?}")),
                None => out.push_str("null"),
            }
        }
        if !r.per_class.is_empty() {
            out.push_str(",\"per_class\":[");
            for (i, c) in r.per_class.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                body(c, out);
            }
            out.push(']');
        }
        out.push('}');
    }
    let mut out = String::new();
    body(r, &mut out);
    out
}

/// One-vs-rest per class, then the unweighted mean of each measure. A
/// measure undefined for any class is undefined in the mean. Accuracy and
/// error rate are taken over the whole matrix (`trace / total`).
pub fn macro_multiclass(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    if cm.classes() < 3 {
        return Err(MetricsError::Input(format!(
            "macro averaging needs at least 3 classes, got {}",
            cm.classes()
        )));
    }
    let per_class: Vec<MetricsReport> = (0..cm.classes())
        .map(|k| MetricsReport::from_binary(&cm.one_vs_rest(k)))
        .collect();
    let mean = |f: fn(&MetricsReport) -> Rate| -> Rate {
        let vals: Option<Vec<f64>> = per_class.iter().map(f).collect();
        vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let acc = accuracy(cm);
    Ok(MetricsReport {
        sensitivity: mean(|r| r.sensitivity),
        specificity: mean(|r| r.specificity),
        fall_out: mean(|r| r.fall_out),
        miss_rate: mean(|r| r.miss_rate),
        ppv: mean(|r| r.ppv),
        npv: mean(|r| r.npv),
        f1: mean(|r| r.f1),
        accuracy: acc,
        error_rate: ratio(cm.total() - cm.trace(), cm.total()),
        per_class,
    })
}

/// Percentage text for a rate: two decimals, or three when the value needs
/// them to be exact (e.g. `99.786`). Undefined renders as `-`.
pub fn format_percent(rate: Rate) -> String {
    let Some(r) = rate else { return "-".into() };
    let pct = r * 100.0;
    for decimals in [2usize, 3] {
        let scale = 10f64.powi(decimals as i32);
        if ((pct * scale).round() / scale - pct).abs() < 1e-9 {
            return format!("{pct:.decimals$}");
        }
    }
    format!("{pct:.2}")
}

/// Reported measures of the published detection model.
pub fn table2_detection() -> MetricsReport {
    MetricsReport {
        sensitivity: Some(0.9990),
        specificity: Some(0.9962),
        fall_out: Some(0.0038),
        miss_rate: Some(0.0010),
        ppv: Some(0.9980),
        npv: Some(0.9981),
        f1: Some(0.9985),
        accuracy: Some(0.9981),
        error_rate: Some(0.0019),
        per_class: Vec::new(),
    }
}

/// Reported measures of the published classification model.
pub fn table2_classification() -> MetricsReport {
    MetricsReport {
        sensitivity: Some(0.9949),
        specificity: Some(0.99786),
        fall_out: Some(0.00214),
        miss_rate: Some(0.0051),
        ppv: Some(0.9961),
        npv: Some(0.9972),
        f1: Some(0.9955),
        accuracy: Some(0.9951),
        error_rate: Some(0.0049),
        per_class: Vec::new(),
    }
}

pub const TABLE2_ROW_LABELS: [&str; 9] = [
    "Sensitivity / Recall / TPR",
    "Specificity / TNR",
    "Fall-Out / FPR",
    "Miss Rate / FNR",
    "PPV / Precision",
    "NPV",
    "F1 - Score",
    "Accuracy",
    "Error Rate",
];

/// Performance table with one column per report, cells as `99.90 %`.
pub fn render_performance_table(columns: &[(&str, &MetricsReport)]) -> String {
    let mut out = String::from("Sr. No.\tPerformance Measure");
    for (name, _) in columns {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for (i, label) in TABLE2_ROW_LABELS.iter().enumerate() {
        out.push_str(&format!("{}\t{label}", i + 1));
        for (_, report) in columns {
            out.push('\t');
            out.push_str(&percent_cell(report.measures()[i].1));
        }
        out.push('\n');
    }
    out
}

fn percent_cell(rate: Rate) -> String {
    match rate {
        Some(_) => format!("{} %", format_percent(rate)),
        None => "-".into(),
    }
}

/// Published comparison rows: algorithm, sensitivity, specificity,
/// accuracy, as printed.
const REFERENCE_ROWS: [(&str, Option<&str>, Option<&str>, Option<&str>); 9] = [
    ("KNN", Some("67"), Some("83"), Some("75")),
    ("ELM", Some("90"), Some("78"), Some("84")),
    ("FCM", Some("96"), Some("93.3"), Some("86.6")),
    ("U-Net", None, None, Some("91")),
    ("CapsNet", None, None, Some("92.65")),
    ("SVM", Some("90"), Some("96"), Some("93")),
    ("CDLLC", Some("94.64"), None, Some("96.39")),
    ("CNN", Some("96.4"), Some("98.3"), Some("97.8")),
    ("ANFIS", Some("96.6"), Some("95.3"), Some("98.67")),
];

pub const OUR_APPROACH: &str = "Our Approach";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub sensitivity: String,
    pub specificity: String,
    pub accuracy: String,
    /// Accuracy in percent, for charts.
    pub accuracy_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("Algorithm\tSensitivity\tSpecificity\tAccuracy\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.algorithm, r.sensitivity, r.specificity, r.accuracy));
        }
        out
    }
}

/// The nine published reference rows followed by `ours`.
pub fn render_comparison(ours: &MetricsReport) -> ComparisonTable {
    let cell = |v: Option<&str>| v.map_or_else(|| "-".to_owned(), |s| format!("{s} %"));
    let mut rows: Vec<ComparisonRow> = REFERENCE_ROWS
        .iter()
        .map(|&(name, sens, spec, acc)| ComparisonRow {
            algorithm: name.into(),
            sensitivity: cell(sens),
            specificity: cell(spec),
            accuracy: cell(acc),
            accuracy_percent: acc.map(|s| s.parse().expect("numeric reference cell")),
        })
        .collect();
    rows.push(ComparisonRow {
        algorithm: OUR_APPROACH.into(),
        sensitivity: percent_cell(ours.sensitivity),
        specificity: percent_cell(ours.specificity),
        accuracy: percent_cell(ours.accuracy),
        accuracy_percent: ours.accuracy.map(|a| a * 100.0),
    });
    ComparisonTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Rate, b: f64) -> bool {
        a.is_some_and(|v| (v - b).abs() < 1e-12)
    }

    #[test]
    fn confusion_from_predictions_examples() {
        let cm = ConfusionMatrix::from_predictions(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        for a in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.get(a, p) > 0, a == p);
            }
        }
        let actual = [1, 1, 1, 0, 0, 0, 0, 0, 0, 1];
        let predicted = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let c = ConfusionMatrix::from_predictions(&actual, &predicted, 2)
            .unwrap()
            .binary_counts()
            .unwrap();
        assert_eq!(c, BinaryCounts { tp: 3, fp: 2, tn: 4, fn_: 1 });
        let cm3 = ConfusionMatrix::from_predictions(&[0, 1, 2, 2, 1], &[1, 1, 0, 2, 2], 3).unwrap();
        assert_eq!(cm3.total(), 5);
    }

    #[test]
    fn confusion_input_errors() {
        assert!(ConfusionMatrix::from_predictions(&[0, 1], &[0], 2).is_err());
        assert!(ConfusionMatrix::from_predictions(&[0, 2], &[0, 1], 2).is_err());
        assert!(ConfusionMatrix::new(3).binary_counts().is_err());
    }

    #[test]
    fn rate_examples() {
        assert!(close(sensitivity(&BinaryCounts { tp: 999, fn_: 1, ..Default::default() }), 0.999));
        assert!(close(sensitivity(&BinaryCounts { tp: 3, fn_: 1, ..Default::default() }), 0.75));
        assert_eq!(sensitivity(&BinaryCounts { tn: 5, fp: 1, ..Default::default() }), None);
        assert!(close(specificity(&BinaryCounts { tn: 4, fp: 2, ..Default::default() }), 2.0 / 3.0));
        assert_eq!(specificity(&BinaryCounts { tn: 4, ..Default::default() }), Some(1.0));
        let (ppv, npv) = predictive_values(&BinaryCounts { tp: 2, fp: 1, tn: 3, fn_: 1 });
        assert!(close(ppv, 2.0 / 3.0) && close(npv, 0.75));
        assert_eq!(
            predictive_values(&BinaryCounts { tp: 5, tn: 2, ..Default::default() }),
            (Some(1.0), Some(1.0))
        );
        assert_eq!(f1(&BinaryCounts { tp: 1, fp: 1, fn_: 1, tn: 0 }), Some(0.5));
        assert_eq!(f1(&BinaryCounts { tn: 3, ..Default::default() }), None);
        let cm = ConfusionMatrix::binary(3, 4, 2, 1);
        assert!(close(accuracy(&cm), 0.7));
        assert_eq!(accuracy(&ConfusionMatrix::from_predictions(&[0, 1, 2], &[0, 1, 2], 3).unwrap()), Some(1.0));
        assert_eq!(accuracy(&ConfusionMatrix::new(2)), None);
    }

    #[test]
    fn f1_fixed_point_and_table_cross_check() {
        // P == R: TP=4, FP=FN=1.
        let c = BinaryCounts { tp: 4, fp: 1, fn_: 1, tn: 9 };
        assert!(close(f1(&c), predictive_values(&c).0.unwrap()));
        let v = f1_from_rates(0.9980, 0.9990).unwrap();
        assert_eq!(format!("{:.4}", v), "0.9985");
        assert_eq!(format_percent(Some(v)), "99.85");
    }

    #[test]
    fn complement_examples() {
        let mut r = table2_detection();
        let (fo, mr, er) = complement_rates(&r);
        assert!(close(fo, 0.0038) && close(mr, 0.0010));
        assert_eq!(format_percent(fo), "0.38");
        assert_eq!(format_percent(mr), "0.10");
        r.accuracy = Some(1.0);
        assert_eq!(complement_rates(&r).2, Some(0.0));
        let _ = er;
        r.sensitivity = None;
        assert_eq!(complement_rates(&r).1, None);
    }

    #[test]
    fn macro_examples() {
        // Every class has sensitivity 0.5 and specificity 0.75.
        let cm = ConfusionMatrix::from_counts(3, vec![1, 1, 0, 0, 1, 1, 1, 0, 1]).unwrap();
        let r = macro_multiclass(&cm).unwrap();
        assert!(close(r.sensitivity, 0.5));
        assert!(close(r.specificity, 0.75));
        assert_eq!(r.per_class.len(), 3);
        assert!(macro_multiclass(&ConfusionMatrix::new(2)).is_err());
    }

    #[test]
    fn macro_matches_brute_force_on_worked_example() {
        let actual = [0, 0, 0, 1, 1, 2, 2, 2, 2, 1, 0];
        let predicted = [0, 1, 0, 1, 2, 2, 2, 0, 2, 1, 0];
        let cm = ConfusionMatrix::from_predictions(&actual, &predicted, 3).unwrap();
        let r = macro_multiclass(&cm).unwrap();
        let mut sens = Vec::new();
        let mut spec = Vec::new();
        for k in 0..3 {
            let tp = actual.iter().zip(&predicted).filter(|(a, p)| **a == k && **p == k).count();
            let pos = actual.iter().filter(|a| **a == k).count();
            let tn = actual.iter().zip(&predicted).filter(|(a, p)| **a != k && **p != k).count();
            let neg = actual.len() - pos;
            sens.push(tp as f64 / pos as f64);
            spec.push(tn as f64 / neg as f64);
        }
        assert_eq!(r.sensitivity, Some(sens.iter().sum::<f64>() / 3.0));
        assert_eq!(r.specificity, Some(spec.iter().sum::<f64>() / 3.0));
        assert_eq!(r.accuracy, Some(8.0 / 11.0));
    }

    #[test]
    fn table2_fixtures_render_published_percentages() {
        let det: Vec<String> = table2_detection().measures().iter().map(|m| format_percent(m.1)).collect();
        assert_eq!(det, ["99.90", "99.62", "0.38", "0.10", "99.80", "99.81", "99.85", "99.81", "0.19"]);
        let cls: Vec<String> = table2_classification().measures().iter().map(|m| format_percent(m.1)).collect();
        assert_eq!(cls, ["99.49", "99.786", "0.214", "0.51", "99.61", "99.72", "99.55", "99.51", "0.49"]);
        let table = render_performance_table(&[
            ("Detection Model", &table2_detection()),
            ("Classification Model", &table2_classification()),
        ]);
        assert!(table.contains("2\tSpecificity / TNR\t99.62 %\t99.786 %\n"));
        assert_eq!(table.lines().count(), 10);
    }

    #[test]
    fn comparison_table_rows() {
        let t = render_comparison(&table2_detection());
        assert_eq!(t.rows.len(), 10);
        let knn = &t.rows[0];
        assert_eq!((knn.sensitivity.as_str(), knn.specificity.as_str(), knn.accuracy.as_str()), ("67 %", "83 %", "75 %"));
        let ours = t.rows.last().unwrap();
        assert_eq!(
            (ours.algorithm.as_str(), ours.sensitivity.as_str(), ours.specificity.as_str(), ours.accuracy.as_str()),
            (OUR_APPROACH, "99.90 %", "99.62 %", "99.81 %")
        );
        assert_eq!(t.rows[3].sensitivity, "-");
        assert!(t.to_tsv().contains("CDLLC\t94.64 %\t-\t96.39 %\n"));
    }

    #[test]
    fn undefined_renders_as_dash_and_json_null() {
        let r = MetricsReport::from_binary(&BinaryCounts { tn: 3, ..Default::default() });
        assert_eq!(format_percent(r.sensitivity), "-");
        assert!(r.to_json().contains("\"sensitivity\":null"));
        assert!(r.to_json().contains("\"specificity\":1.0"));
    }

    proptest! {
        #[test]
        fn identities_hold_on_random_matrices(tp in 1u64..500, tn in 1u64..500, fp in 1u64..500, fn_ in 1u64..500, scale in 1u64..20) {
            let c = BinaryCounts { tp, tn, fp, fn_ };
            let r = MetricsReport::from_binary(&c);
            let (fo, mr, er) = complement_rates(&r);
            prop_assert!((fo.unwrap() - r.fall_out.unwrap()).abs() < 1e-12);
            prop_assert!((mr.unwrap() - r.miss_rate.unwrap()).abs() < 1e-12);
            prop_assert!((er.unwrap() - r.error_rate.unwrap()).abs() < 1e-12);
            let (p, rec) = (r.ppv.unwrap(), r.sensitivity.unwrap());
            prop_assert!((r.f1.unwrap() - 2.0 * p * rec / (p + rec)).abs() < 1e-12);
            for (_, v) in r.measures() {
                let v = v.unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let scaled = MetricsReport::from_binary(&BinaryCounts { tp: tp * scale, tn: tn * scale, fp: fp * scale, fn_: fn_ * scale });
            for ((_, a), (_, b)) in r.measures().iter().zip(scaled.measures()) {
                prop_assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn merge_is_commutative(a in proptest::collection::vec(0u64..9, 9), b in proptest::collection::vec(0u64..9, 9)) {
            let (x, y) = (ConfusionMatrix::from_counts(3, a).unwrap(), ConfusionMatrix::from_counts(3, b).unwrap());
            let mut xy = x.clone();
            xy.merge(&y).unwrap();
            let mut yx = y.clone();
            yx.merge(&x).unwrap();
            prop_assert_eq!(xy.clone(), yx);
            prop_assert_eq!(xy.total(), x.total() + y.total());
        }
    }
}
