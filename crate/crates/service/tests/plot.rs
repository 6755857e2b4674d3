use swinscan::plot::{bar_chart_svg, line_chart_svg, PlotError};
use swinscan_core::metrics::{render_comparison, table2_detection, ComparisonTable, OUR_APPROACH};
use swinscan_core::trainer::{epoch_metrics_csv, parse_epoch_metrics, EpochMetrics};

const SVG_NS: &str = "http://www.w3.org/2000/svg";

fn history(n: usize) -> Vec<EpochMetrics> {
    (1..=n)
        .map(|e| {
            let v = e as f64 / (n as f64 + 1.0);
            EpochMetrics {
                epoch: e,
                steps: 2,
                mean_loss: 1.0 - v,
                accuracy: v,
                precision: v * 0.9,
                recall: v * 0.8,
                f1: v * 0.85,
            }
        })
        .collect()
}

#[test]
fn three_epochs_give_four_polylines_of_three_points() {
    let csv = epoch_metrics_csv(&history(3)).unwrap();
    let svg = line_chart_svg(&parse_epoch_metrics(&csv).unwrap()).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.root_element().tag_name().namespace(), Some(SVG_NS));
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 4);
    let names: Vec<_> = lines.iter().map(|l| l.attribute("data-series").unwrap()).collect();
    assert_eq!(names, ["accuracy", "precision", "recall", "f1"]);
    for l in &lines {
        let points: Vec<(f64, f64)> = l
            .attribute("points")
            .unwrap()
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect();
        assert_eq!(points.len(), 3);
        assert!(points.windows(2).all(|w| w[0].0 < w[1].0), "epochs run left to right");
    }
    // Rising accuracy means decreasing SVG y.
    let acc = lines[0].attribute("points").unwrap();
    let ys: Vec<f64> = acc.split(' ').map(|p| p.split_once(',').unwrap().1.parse().unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn comparison_chart_has_ten_bars_with_ours_highlighted() {
    let table = render_comparison(&table2_detection());
    let svg = bar_chart_svg(&table).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let bars: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("rect") && n.attribute("class").is_some_and(|c| c.starts_with("bar")))
        .collect();
    assert_eq!(bars.len(), 10);
    let last = bars.last().unwrap();
    assert_eq!(last.attribute("data-algorithm"), Some(OUR_APPROACH));
    assert_eq!(last.attribute("data-value"), Some("99.81"));
    assert_eq!(last.attribute("class"), Some("bar highlight"));
    let fills: Vec<_> = bars.iter().map(|b| b.attribute("fill").unwrap()).collect();
    assert!(fills[..9].iter().all(|f| *f == fills[0]));
    assert_ne!(fills[9], fills[0]);

    let values: Vec<&str> = bars.iter().map(|b| b.attribute("data-value").unwrap()).collect();
    assert_eq!(
        values,
        ["75.00", "84.00", "86.60", "91.00", "92.65", "93.00", "96.39", "97.80", "98.67", "99.81"]
    );
    // Taller bar for the larger value.
    let heights: Vec<f64> = bars.iter().map(|b| b.attribute("height").unwrap().parse().unwrap()).collect();
    assert!(heights.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn missing_accuracy_keeps_the_slot_without_a_bar() {
    let mut table = render_comparison(&table2_detection());
    table.rows[3].accuracy_percent = None;
    let svg = bar_chart_svg(&table).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("rect") && n.attribute("data-value").is_some()).count(), 9);
    let labels = doc.descendants().filter(|n| n.has_tag_name("text") && n.text() == Some("U-Net")).count();
    assert_eq!(labels, 1);
}

#[test]
fn empty_inputs_are_input_errors() {
    assert!(matches!(line_chart_svg(&[]), Err(PlotError::Empty(_))));
    assert!(matches!(bar_chart_svg(&ComparisonTable { rows: Vec::new() }), Err(PlotError::Empty(_))));
}

#[test]
fn names_are_escaped() {
    let mut table = render_comparison(&table2_detection());
    table.rows[0].algorithm = "K<N>N & \"friends\"".into();
    let svg = bar_chart_svg(&table).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert!(doc.descendants().any(|n| n.attribute("data-algorithm") == Some("K<N>N & \"friends\"")));
}
