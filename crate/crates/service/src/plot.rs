//! Standalone SVG charts: per-epoch training curves and the accuracy
//! comparison across algorithms.

use std::fmt::Write as _;

use swinscan_core::metrics::ComparisonTable;
use swinscan_core::trainer::EpochMetrics;

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("nothing to plot: {0}")]
    Empty(&'static str),
    #[error("value out of range: {0}")]
    Range(String),
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const SERIES: [(&str, &str); 4] = [
    ("accuracy", "#1f77b4"),
    ("precision", "#2ca02c"),
    ("recall", "#d62728"),
    ("f1", "#9467bd"),
];

const BAR_FILL: &str = "#4c72b0";
const HIGHLIGHT_FILL: &str = "#f28e2b";

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica, Arial, sans-serif">
<title>{}</title>
<rect width="100%" height="100%" fill="#ffffff"/>
<text x="{:.2}" y="24" font-size="16" text-anchor="middle">{}</text>"##,
        xml_escape(title),
        WIDTH / 2.0,
        xml_escape(title)
    );
}

/// Horizontal grid lines and y labels for `0..=max` in `steps` intervals.
fn y_axis(out: &mut String, max: f64, steps: usize, label: impl Fn(f64) -> String) {
    let plot_h = HEIGHT - TOP - BOTTOM;
    for i in 0..=steps {
        let v = max * i as f64 / steps as f64;
        let y = TOP + plot_h * (1.0 - v / max);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            label(v)
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="#333333"/>"##,
        HEIGHT - BOTTOM
    );
}

/// Accuracy, precision, recall and F1 against epoch, one polyline each.
pub fn line_chart_svg(history: &[EpochMetrics]) -> Result<String, PlotError> {
    if history.is_empty() {
        return Err(PlotError::Empty("training history has no epochs"));
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let n = history.len();
    let x_of = |i: usize| {
        if n == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y_of = |v: f64| TOP + plot_h * (1.0 - v);

    let mut out = String::new();
    open(&mut out, "Epoch Comparison");
    y_axis(&mut out, 1.0, 4, |v| format!("{v:.2}"));
    for (i, m) in history.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            x_of(i),
            HEIGHT - BOTTOM + 16.0,
            m.epoch
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">Epoch</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );

    for (k, (name, color)) in SERIES.iter().enumerate() {
        let mut points = Vec::with_capacity(n);
        for (i, m) in history.iter().enumerate() {
            let v = match *name {
                "accuracy" => m.accuracy,
                "precision" => m.precision,
                "recall" => m.recall,
                _ => m.f1,
            };
            if !(0.0..=1.0).contains(&v) {
                return Err(PlotError::Range(format!("{name} = {v} at epoch {}", m.epoch)));
            }
            points.push(format!("{:.2},{:.2}", x_of(i), y_of(v)));
        }
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-series="{name}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 16.0 + 20.0 * k as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12">{name}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One bar per algorithm's accuracy; the last row (this work) is drawn in
/// the highlight colour. Rows without an accuracy keep their slot, unfilled.
pub fn bar_chart_svg(table: &ComparisonTable) -> Result<String, PlotError> {
    let rows = &table.rows;
    if rows.is_empty() {
        return Err(PlotError::Empty("comparison table has no rows"));
    }
    let plot_w = WIDTH - LEFT - RIGHT / 3.0;
    let plot_h = HEIGHT - TOP - BOTTOM - 30.0;
    let slot = plot_w / rows.len() as f64;
    let bar_w = slot * 0.7;

    let mut out = String::new();
    open(&mut out, "Comparison of Other Algorithms with Our Approach");
    {
        let plot_bottom = TOP + plot_h;
        for i in 0..=5 {
            let v = 20.0 * i as f64;
            let y = plot_bottom - plot_h * v / 100.0;
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.0}</text>"##,
                LEFT + plot_w,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" font-size="12" transform="rotate(-90 16 {:.2})" text-anchor="middle">Accuracy (%)</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0
        );
    }
    let last = rows.len() - 1;
    for (i, row) in rows.iter().enumerate() {
        let x = LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let cx = x + bar_w / 2.0;
        let base = TOP + plot_h;
        if let Some(v) = row.accuracy_percent {
            if !(0.0..=100.0).contains(&v) {
                return Err(PlotError::Range(format!("{} accuracy {v}", row.algorithm)));
            }
            let h = plot_h * v / 100.0;
            let (fill, class) = if i == last { (HIGHLIGHT_FILL, "bar highlight") } else { (BAR_FILL, "bar") };
            let _ = writeln!(
                out,
                r##"<rect class="{class}" data-algorithm="{}" data-value="{v:.2}" x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{fill}" stroke="#333333"/><text x="{cx:.2}" y="{:.2}" font-size="10" text-anchor="middle">{v:.2}</text>"##,
                xml_escape(&row.algorithm),
                base - h,
                base - h - 4.0
            );
        }
        let ly = base + 14.0;
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{ly:.2}" font-size="11" text-anchor="end" transform="rotate(-35 {cx:.2} {ly:.2})">{}</text>"#,
            xml_escape(&row.algorithm)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
