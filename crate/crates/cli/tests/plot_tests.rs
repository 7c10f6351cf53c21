//! SVG chart determinism and the coordinate round-trip oracle.

use optsel_cli::plot::{
    extract_series_points, parse_summary, render_svg, transform_for, Panel, PlotError, SummaryRow,
};

fn row(scenario: &str, n: usize, a: f64, b: f64) -> SummaryRow {
    SummaryRow {
        scenario: scenario.into(),
        n,
        ratio_a: a,
        ratio_b: b,
    }
}

fn sample_csv() -> String {
    let mut out = String::from(optsel_core::metrics::SUMMARY_HEADER);
    out.push('\n');
    for (n, a, b) in [(50, 1.4, 1.3), (200, 1.2, 1.15), (1000, 1.05, 1.04)] {
        out.push_str(&format!(
            "linear,{n},10,{a},0.01,{b},0.01,2.0,1.5,0\n"
        ));
    }
    out
}

#[test]
fn summary_parser_reads_the_suite_format() {
    let rows = parse_summary(&sample_csv()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].scenario, "linear");
    assert_eq!(rows[2].n, 1000);
    assert_eq!(rows[1].ratio_a, 1.2);
    assert_eq!(rows[1].ratio_b, 1.15);
}

#[test]
fn parse_errors_carry_the_row_number() {
    let bad = sample_csv().replace("linear,200", "linear,not_a_number");
    match parse_summary(&bad).unwrap_err() {
        PlotError::Parse { row, .. } => assert_eq!(row, 3),
        other => panic!("{other:?}"),
    }
    let bad_header = "wrong,header\n";
    assert!(matches!(
        parse_summary(bad_header).unwrap_err(),
        PlotError::Parse { row: 1, .. }
    ));
}

#[test]
fn single_sample_size_is_rejected() {
    let rows = vec![row("linear", 50, 1.2, 1.1)];
    assert!(matches!(
        render_svg(&rows).unwrap_err(),
        PlotError::TooFewPoints { distinct: 1 }
    ));
}

#[test]
fn identical_input_gives_identical_bytes() {
    let rows = parse_summary(&sample_csv()).unwrap();
    let a = render_svg(&rows).unwrap();
    let b = render_svg(&rows).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("<svg"));
    assert!(a.trim_end().ends_with("</svg>"));
}

#[test]
fn two_row_input_yields_one_segment_per_panel() {
    let rows = vec![row("linear", 50, 1.3, 1.2), row("linear", 500, 1.1, 1.05)];
    let svg = render_svg(&rows).unwrap();
    let series = extract_series_points(&svg);
    // One series in each of the two panels, two points each.
    assert_eq!(series.len(), 2);
    for s in &series {
        assert_eq!(s.len(), 2);
    }
}

#[test]
fn flat_series_coincides_with_the_reference_line() {
    let rows = vec![
        row("linear", 50, 1.0, 1.0),
        row("linear", 500, 1.0, 1.0),
        row("linear", 5000, 1.0, 1.0),
    ];
    let svg = render_svg(&rows).unwrap();
    let t = transform_for(&rows, Panel::RatioA);
    let ref_y = format!("{:.6}", t.y(1.0));
    for points in extract_series_points(&svg) {
        for (_, y) in points {
            assert_eq!(format!("{y:.6}"), ref_y);
        }
    }
}

#[test]
fn emitted_coordinates_invert_to_the_input_ratios() {
    let rows = parse_summary(&sample_csv()).unwrap();
    let svg = render_svg(&rows).unwrap();
    let series = extract_series_points(&svg);
    assert_eq!(series.len(), 2);
    for (panel, points) in [(Panel::RatioA, &series[0]), (Panel::RatioB, &series[1])] {
        let t = transform_for(&rows, panel);
        for (i, &(px, py)) in points.iter().enumerate() {
            let n = t.invert_x(px);
            let ratio = t.invert_y(py);
            let expected = match panel {
                Panel::RatioA => rows[i].ratio_a,
                Panel::RatioB => rows[i].ratio_b,
            };
            assert!(
                (ratio - expected).abs() < 1e-6,
                "panel {panel:?} point {i}: {ratio} vs {expected}"
            );
            assert!((n - rows[i].n as f64).abs() / (rows[i].n as f64) < 1e-4);
        }
    }
}

#[test]
fn one_series_per_scenario_group() {
    let rows = vec![
        row("ts_linear", 50, 1.3, 1.2),
        row("ts_linear", 500, 1.1, 1.1),
        row("ts_nonlinear", 50, 1.5, 1.4),
        row("ts_nonlinear", 500, 1.2, 1.1),
    ];
    let svg = render_svg(&rows).unwrap();
    // Two scenario series in each panel.
    assert_eq!(extract_series_points(&svg).len(), 4);
    assert!(svg.contains("data-scenario=\"ts_linear\""));
    assert!(svg.contains("data-scenario=\"ts_nonlinear\""));
}
