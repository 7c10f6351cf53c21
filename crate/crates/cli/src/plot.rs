//! Deterministic two-panel SVG convergence plots from a summary CSV.

use std::fmt::Write as _;

/// One parsed summary row (only the columns the chart needs).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub n: usize,
    pub ratio_a: f64,
    pub ratio_b: f64,
}

#[derive(Debug)]
pub enum PlotError {
    /// Malformed CSV content; carries the 1-based row number.
    Parse { row: usize, detail: String },
    /// Fewer than two distinct sample sizes.
    TooFewPoints { distinct: usize },
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::Parse { row, detail } => {
                write!(f, "summary CSV row {row}: {detail}")
            }
            PlotError::TooFewPoints { distinct } => write!(
                f,
                "summary CSV holds {distinct} distinct sample size(s); need at least 2 to plot"
            ),
        }
    }
}

impl std::error::Error for PlotError {}

/// Parse the summary CSV emitted by the suite runner.
pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>, PlotError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if !line.starts_with("scenario,n,") {
                return Err(PlotError::Parse {
                    row: 1,
                    detail: format!("unexpected header '{line}'"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 7 {
            return Err(PlotError::Parse {
                row,
                detail: format!("expected at least 7 fields, found {}", fields.len()),
            });
        }
        let parse_f = |i: usize, name: &str| -> Result<f64, PlotError> {
            fields[i].parse().map_err(|_| PlotError::Parse {
                row,
                detail: format!("field '{name}' is not a real number: '{}'", fields[i]),
            })
        };
        let n: usize = fields[1].parse().map_err(|_| PlotError::Parse {
            row,
            detail: format!("field 'n' is not an integer: '{}'", fields[1]),
        })?;
        if n == 0 {
            return Err(PlotError::Parse {
                row,
                detail: "field 'n' must be positive for a log axis".into(),
            });
        }
        rows.push(SummaryRow {
            scenario: fields[0].to_string(),
            n,
            ratio_a: parse_f(3, "ratio_a")?,
            ratio_b: parse_f(5, "ratio_b")?,
        });
    }
    Ok(rows)
}

/// Affine mapping between data space (log10 n, ratio) and pixel space.
/// `y` grows downward in SVG, so the vertical map is flipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub log_n_min: f64,
    pub log_n_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub px_left: f64,
    pub px_top: f64,
    pub px_width: f64,
    pub px_height: f64,
}

impl Transform {
    pub fn x(&self, n: usize) -> f64 {
        let t = ((n as f64).log10() - self.log_n_min) / (self.log_n_max - self.log_n_min);
        self.px_left + t * self.px_width
    }

    pub fn y(&self, ratio: f64) -> f64 {
        let t = (ratio - self.y_min) / (self.y_max - self.y_min);
        self.px_top + (1.0 - t) * self.px_height
    }

    pub fn invert_x(&self, px: f64) -> f64 {
        let t = (px - self.px_left) / self.px_width;
        10f64.powf(self.log_n_min + t * (self.log_n_max - self.log_n_min))
    }

    pub fn invert_y(&self, px: f64) -> f64 {
        let t = 1.0 - (px - self.px_top) / self.px_height;
        self.y_min + t * (self.y_max - self.y_min)
    }
}

pub const PANEL_WIDTH: f64 = 360.0;
pub const PANEL_HEIGHT: f64 = 280.0;
pub const MARGIN: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    RatioA,
    RatioB,
}

fn panel_values(rows: &[SummaryRow], panel: Panel) -> Vec<f64> {
    rows.iter()
        .map(|r| match panel {
            Panel::RatioA => r.ratio_a,
            Panel::RatioB => r.ratio_b,
        })
        .collect()
}

/// The transform used for a panel; exposed so emitted coordinates can be
/// inverted back to data values.
pub fn transform_for(rows: &[SummaryRow], panel: Panel) -> Transform {
    let log_ns: Vec<f64> = rows.iter().map(|r| (r.n as f64).log10()).collect();
    let log_n_min = log_ns.iter().copied().fold(f64::INFINITY, f64::min);
    let log_n_max = log_ns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = panel_values(rows, panel);
    // Always keep the y = 1 reference line inside the frame.
    let mut y_min = values.iter().copied().fold(1.0f64, f64::min);
    let mut y_max = values.iter().copied().fold(1.0f64, f64::max);
    let span = (y_max - y_min).max(0.02);
    y_min -= 0.1 * span;
    y_max += 0.1 * span;
    let px_left = match panel {
        Panel::RatioA => MARGIN,
        Panel::RatioB => 2.0 * MARGIN + PANEL_WIDTH,
    };
    Transform {
        log_n_min,
        log_n_max,
        y_min,
        y_max,
        px_left,
        px_top: MARGIN,
        px_width: PANEL_WIDTH,
        px_height: PANEL_HEIGHT,
    }
}

/// Fixed-precision pixel coordinate: enough digits to invert ratios to
/// well under 1e-6, and stable bytes across runs.
fn px(v: f64) -> String {
    format!("{v:.6}")
}

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn render_panel(out: &mut String, rows: &[SummaryRow], panel: Panel, title: &str) {
    let t = transform_for(rows, panel);
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333333" stroke-width="1"/>"##,
        px(t.px_left),
        px(t.px_top),
        px(t.px_width),
        px(t.px_height)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle" font-family="monospace">{}</text>"#,
        px(t.px_left + t.px_width / 2.0),
        px(t.px_top - 12.0),
        title
    );
    // Reference line at ratio = 1.
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888888" stroke-width="1" stroke-dasharray="4 3"/>"##,
        px(t.px_left),
        px(t.y(1.0)),
        px(t.px_left + t.px_width),
        px(t.y(1.0))
    );
    // x tick labels at each distinct n.
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle" font-family="monospace">{}</text>"#,
            px(t.x(n)),
            px(t.px_top + t.px_height + 16.0),
            n
        );
    }
    // y tick labels at the frame edges and the reference line.
    for (v, label) in [(t.y_min, None), (1.0, Some("1")), (t.y_max, None)] {
        let text = label.map(String::from).unwrap_or_else(|| format!("{v:.3}"));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end" font-family="monospace">{}</text>"#,
            px(t.px_left - 6.0),
            px(t.y(v) + 4.0),
            text
        );
    }
    // One polyline per scenario series, points ordered by n.
    let mut scenarios: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    for (si, scen) in scenarios.iter().enumerate() {
        let mut series: Vec<&SummaryRow> =
            rows.iter().filter(|r| r.scenario == *scen).collect();
        series.sort_by_key(|r| r.n);
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let points: Vec<String> = series
            .iter()
            .map(|r| {
                let v = match panel {
                    Panel::RatioA => r.ratio_a,
                    Panel::RatioB => r.ratio_b,
                };
                format!("{},{}", px(t.x(r.n)), px(t.y(v)))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-scenario="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            scen,
            color,
            points.join(" ")
        );
        for p in &points {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(
                out,
                r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#
            );
        }
    }
}

/// Render the two-panel chart. Identical input rows yield identical bytes.
pub fn render_svg(rows: &[SummaryRow]) -> Result<String, PlotError> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(PlotError::TooFewPoints { distinct: ns.len() });
    }
    let width = 3.0 * MARGIN + 2.0 * PANEL_WIDTH;
    let height = 2.0 * MARGIN + PANEL_HEIGHT;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        px(width),
        px(height),
        px(width),
        px(height)
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    render_panel(&mut out, rows, Panel::RatioA, "(a) mean per-replication ratio");
    render_panel(&mut out, rows, Panel::RatioB, "(b) ratio of mean losses");
    out.push_str("</svg>\n");
    Ok(out)
}

/// Extract the `points` attribute of every series polyline, in document
/// order, as (x, y) pixel pairs. Companion to [`transform_for`] for
/// round-trip checks.
pub fn extract_series_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    let mut all = Vec::new();
    for line in svg.lines() {
        let Some(rest) = line.trim_start().strip_prefix("<polyline class=\"series\"") else {
            continue;
        };
        let Some(start) = rest.find("points=\"") else {
            continue;
        };
        let tail = &rest[start + 8..];
        let Some(end) = tail.find('"') else { continue };
        let pts = tail[..end]
            .split_whitespace()
            .filter_map(|pair| {
                let (x, y) = pair.split_once(',')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect();
        all.push(pts);
    }
    all
}
