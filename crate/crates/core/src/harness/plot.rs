//! SVG line charts of sweep results: success rate and missed fraction
//! against the swept parameter, one series per uncertainty factor plus the
//! reference scheduler.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{read_csv, CsvRow};
use crate::error::SimError;
use crate::scheduler::SchedulerKind;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22",
];
const REFERENCE_COLOUR: &str = "#d62728";

/// Per series, per x value: (sum of success rates, sum of missed fractions, runs).
type Sums = BTreeMap<(u8, u64), BTreeMap<u64, (f64, f64, u32)>>;
type Point = (f64, f64, f64);
type Panel = (&'static str, fn(&Point) -> f64);

/// Seed-averaged points of one scheduler configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    /// (x, success rate, missed fraction of submissions)
    pub points: Vec<(f64, f64, f64)>,
}

fn axis_of(scenario: &str) -> (&'static str, fn(&CsvRow) -> f64) {
    match scenario {
        "2" => ("laxity mean [ms]", |r| r.laxity_mean_ms),
        "3" => ("latency std-dev [ms]", |r| r.latency_std_ms),
        _ => ("number of clients", |r| r.clients as f64),
    }
}

fn series_key(r: &CsvRow) -> (u8, u64) {
    match (r.scheduler, r.u_factor) {
        (SchedulerKind::Reference, _) => (1, 0),
        (_, u) => (0, u.unwrap_or(0.0).to_bits()),
    }
}

/// Group rows into seed-averaged series for one scenario.
pub fn build_series(rows: &[&CsvRow], x_of: fn(&CsvRow) -> f64) -> Vec<PlotSeries> {
    let mut acc: Sums = BTreeMap::new();
    for r in rows {
        let e = acc
            .entry(series_key(r))
            .or_default()
            .entry(x_of(r).to_bits())
            .or_insert((0.0, 0.0, 0));
        e.0 += r.metrics.success_rate;
        e.1 += r.metrics.missed_fraction_of_submitted();
        e.2 += 1;
    }
    acc.into_iter()
        .map(|((kind, u_bits), by_x)| {
            let label = if kind == 1 {
                "reference".to_string()
            } else {
                format!("U={}", f64::from_bits(u_bits))
            };
            let mut points: Vec<(f64, f64, f64)> = by_x
                .into_iter()
                .map(|(x, (s, m, n))| (f64::from_bits(x), s / n as f64, m / n as f64))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            PlotSeries { label, points }
        })
        .collect()
}

/// Read `csv_path` and write one SVG per scenario into `out_dir`.
pub fn emit_plots(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    let text = std::fs::read_to_string(csv_path)?;
    let rows = read_csv(&text)?;
    if rows.is_empty() {
        return Err(SimError::Csv {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    let mut by_scenario: BTreeMap<&str, Vec<&CsvRow>> = BTreeMap::new();
    for r in &rows {
        by_scenario.entry(r.scenario.as_str()).or_default().push(r);
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (scenario, rows) in by_scenario {
        let (x_label, x_of) = axis_of(scenario);
        let series = build_series(&rows, x_of);
        let svg = render_svg(&format!("Scenario {scenario}"), x_label, &series);
        let safe: String = scenario
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let path = out_dir.join(format!("scenario_{safe}.svg"));
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;
const GAP: f64 = 80.0;
const LEGEND_W: f64 = 140.0;

fn render_svg(title: &str, x_label: &str, series: &[PlotSeries]) -> String {
    let width = MARGIN_L + 2.0 * PANEL_W + GAP + LEGEND_W;
    let height = MARGIN_T + PANEL_H + MARGIN_B;
    let (mut x_min, mut x_max) = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    if x_min == x_max {
        x_min -= 1.0;
        x_max += 1.0;
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" font-size="16" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );

    let panels: [Panel; 2] =
        [("success rate", |p| p.1), ("missed fraction", |p| p.2)];
    for (pi, (y_label, y_of)) in panels.iter().enumerate() {
        let left = MARGIN_L + pi as f64 * (PANEL_W + GAP);
        let top = MARGIN_T;
        let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * PANEL_W;
        let sy = |y: f64| top + (1.0 - y.clamp(0.0, 1.0)) * PANEL_H;

        let _ = writeln!(
            svg,
            r##"<rect x="{left}" y="{top}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#333"/>"##
        );
        for tick in 0..=5 {
            let v = tick as f64 / 5.0;
            let y = sy(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{v:.1}</text>"##,
                left + PANEL_W,
                left - 6.0,
                y + 4.0
            );
        }
        let mut xs: Vec<f64> = series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for x in xs {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                sx(x),
                top + PANEL_H + 18.0,
                x
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + PANEL_W / 2.0,
            top + PANEL_H + 42.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
            left - 40.0,
            top + PANEL_H / 2.0,
            left - 40.0,
            top + PANEL_H / 2.0,
            y_label
        );

        for (si, s) in series.iter().enumerate() {
            let colour = colour_for(si, s);
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(y_of(p))))
                .collect();
            if pts.len() > 1 {
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                    pts.join(" ")
                );
            }
            for p in &s.points {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                    sx(p.0),
                    sy(y_of(p))
                );
            }
        }
    }

    let legend_x = MARGIN_L + 2.0 * PANEL_W + GAP + 10.0;
    for (si, s) in series.iter().enumerate() {
        let y = MARGIN_T + 10.0 + si as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{legend_x}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            y - 10.0,
            colour_for(si, s),
            legend_x + 18.0,
            y,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn colour_for(idx: usize, s: &PlotSeries) -> &'static str {
    if s.label == "reference" {
        REFERENCE_COLOUR
    } else {
        PALETTE[idx % PALETTE.len()]
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
