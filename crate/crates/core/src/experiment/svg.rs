//! Log-log line plots of the summary table as standalone SVG files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SummaryRow;
use crate::error::Result;

/// Subdirectory of the output directory holding the figures.
pub const FIGURE_DIR: &str = "figures";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_Y: f64 = 40.0;
const BOUND_COLORS: [&str; 6] = ["#1f4e9c", "#2f7fc1", "#5fa8d8", "#0b7a5a", "#6b4c9a", "#8c8c8c"];
const ERROR_COLOR: &str = "#c0392b";

struct Series {
    label: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

/// One figure per (input, SNR, ε-rule): median error and the median bound for each
/// `n_η` against N, both axes logarithmic. Returns the written paths.
pub fn write_figures(out_dir: &Path, rows: &[SummaryRow]) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join(FIGURE_DIR);
    fs::create_dir_all(&dir)?;

    let mut figures: BTreeMap<String, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        let name = format!("{}_snr{}_{}", r.input, r.snr_db, r.eps_rule).replace([':', '.'], "_");
        figures.entry(name).or_default().push(r);
    }

    let mut written = Vec::new();
    for (name, group) in figures {
        let mut etas: Vec<usize> = group.iter().map(|r| r.n_eta).collect();
        etas.sort_unstable();
        etas.dedup();
        let mut series = Vec::new();
        for (i, &eta) in etas.iter().enumerate() {
            series.push(Series {
                label: format!("bound, n_eta={eta}"),
                color: BOUND_COLORS[i % BOUND_COLORS.len()],
                dashed: false,
                points: group
                    .iter()
                    .filter(|r| r.n_eta == eta)
                    .map(|r| (r.n_samples as f64, r.bound_median))
                    .collect(),
            });
        }
        // The error does not depend on n_η; take it from the first series.
        series.push(Series {
            label: "median error".into(),
            color: ERROR_COLOR,
            dashed: true,
            points: group
                .iter()
                .filter(|r| r.n_eta == etas[0])
                .map(|r| (r.n_samples as f64, r.error_median))
                .collect(),
        });
        let first = group[0];
        let title = format!("{} input, SNR {} dB, {}", first.input, first.snr_db, first.eps_rule);
        let path = dir.join(format!("{name}.svg"));
        fs::write(&path, render(&title, &series))?;
        written.push(path);
    }
    Ok(written)
}

fn decade_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

fn render(title: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = decade_range(all().map(|p| p.0));
    let (y0, y1) = decade_range(all().map(|p| p.1));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let sx = |x: f64| MARGIN_LEFT + (x.log10() - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_Y + (y1 - y.log10()) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for d in x0 as i32..=x1 as i32 {
        let x = sx(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{x}" y1="{MARGIN_Y}" x2="{x}" y2="{}" stroke="#ddd"/>"##, MARGIN_Y + plot_h);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, MARGIN_Y + plot_h + 16.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = sy(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{MARGIN_LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, MARGIN_LEFT + plot_w);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#, MARGIN_LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">N</text>"#, MARGIN_LEFT + plot_w / 2.0, HEIGHT - 6.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">l2 error</text>"#,
        MARGIN_Y + plot_h / 2.0,
        MARGIN_Y + plot_h / 2.0
    );

    for (i, line) in series.iter().enumerate() {
        let pts: Vec<String> = line
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            pts.join(" "),
            line.color
        );
        for p in &pts {
            let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{}"/>"#, line.color);
        }
        let ly = MARGIN_Y + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/>"#,
            lx + 20.0,
            line.color
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&line.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
