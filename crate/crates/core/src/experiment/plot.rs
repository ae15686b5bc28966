//! Static SVG line charts of aggregated memory capacity.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::AggregateRecord;
use crate::error::{Error, Result};

pub const FIG2: &str = "fig2.svg";
pub const FIG3: &str = "fig3.svg";
pub const DEFAULT_FIG3_RHO: f64 = 0.9;
const RHO_MATCH: f64 = 1e-9;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Chart<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    legend_title: &'a str,
    series: Vec<Series>,
}

/// Writes `fig2.svg` and `fig3.svg` into `out_dir`.
pub fn emit_plots(
    aggregates: &[AggregateRecord],
    out_dir: &Path,
    fig3_rho: f64,
) -> Result<Vec<PathBuf>> {
    let fig2 = render_fig2(aggregates)?;
    let fig3 = render_fig3(aggregates, fig3_rho)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, svg) in [(FIG2, fig2), (FIG3, fig3)] {
        let path = out_dir.join(name);
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn rho_values(aggregates: &[AggregateRecord]) -> Vec<f64> {
    let mut rhos: Vec<f64> = Vec::new();
    for a in aggregates {
        if !rhos.iter().any(|&r| r.to_bits() == a.rho.to_bits()) {
            rhos.push(a.rho);
        }
    }
    rhos
}

fn non_empty(aggregates: &[AggregateRecord]) -> Result<()> {
    if aggregates.is_empty() {
        return Err(Error::data("no aggregates to plot"));
    }
    Ok(())
}

/// Mean MC against layer index, one line per rho.
pub fn render_fig2(aggregates: &[AggregateRecord]) -> Result<String> {
    non_empty(aggregates)?;
    let series = rho_values(aggregates)
        .into_iter()
        .map(|rho| {
            let mut points: Vec<(f64, f64)> = aggregates
                .iter()
                .filter(|a| a.rho.to_bits() == rho.to_bits())
                .map(|a| (a.layer as f64, a.mc_mean))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                label: format!("ρ = {rho}"),
                points,
            }
        })
        .collect();
    Chart {
        title: "Memory capacity by layer",
        x_label: "layer",
        y_label: "mean MC",
        legend_title: "spectral radius",
        series,
    }
    .render()
}

/// Mean forgetting curve against delay for one rho, one line per layer.
pub fn render_fig3(aggregates: &[AggregateRecord], rho: f64) -> Result<String> {
    non_empty(aggregates)?;
    let mut rows: Vec<&AggregateRecord> = aggregates
        .iter()
        .filter(|a| (a.rho - rho).abs() <= RHO_MATCH)
        .collect();
    if rows.is_empty() {
        let available: Vec<String> = rho_values(aggregates)
            .iter()
            .map(|r| r.to_string())
            .collect();
        return Err(Error::config(format!(
            "rho {rho} not in aggregates; available: {}",
            available.join(", ")
        )));
    }
    rows.sort_by_key(|a| a.layer);
    let series = rows
        .iter()
        .map(|a| Series {
            label: format!("layer {}", a.layer),
            points: a
                .curve_mean
                .iter()
                .enumerate()
                .map(|(i, &v)| ((i + 1) as f64, v))
                .collect(),
        })
        .collect();
    let title = format!("Forgetting curves at ρ = {rho}");
    Chart {
        title: &title,
        x_label: "delay k",
        y_label: "mean MC_k",
        legend_title: "layer",
        series,
    }
    .render()
}

/// Round step (1, 2 or 5 times a power of ten) giving about `target` intervals.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn axis_range(lo: f64, hi: f64) -> (f64, f64, f64) {
    let (lo, hi) = if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 {
            lo.abs() * 0.5
        } else {
            1.0
        };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    };
    let step = nice_step(hi - lo, 6);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

fn ticks(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_owned()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Chart<'_> {
    fn render(&self) -> Result<String> {
        let all = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) =
            (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
        for &(x, y) in all {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::data("non-finite value in plot data"));
            }
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        if !x_lo.is_finite() {
            return Err(Error::data("no points to plot"));
        }
        let (x_lo, x_hi, x_step) = axis_range(x_lo, x_hi);
        let (y_lo, y_hi, y_step) = axis_range(y_lo, y_hi);
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
        let sy = |y: f64| TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            svg,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(self.title)
        );

        let _ = writeln!(
            svg,
            r##"<g class="grid" stroke="#dddddd" stroke-width="1">"##
        );
        for t in ticks(x_lo, x_hi, x_step) {
            let _ = writeln!(
                svg,
                r#"<line x1="{0:.2}" y1="{TOP}" x2="{0:.2}" y2="{1:.2}"/>"#,
                sx(t),
                TOP + plot_h
            );
        }
        for t in ticks(y_lo, y_hi, y_step) {
            let _ = writeln!(
                svg,
                r#"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}"/>"#,
                sy(t),
                LEFT + plot_w
            );
        }
        let _ = writeln!(svg, "</g>");

        let _ = writeln!(
            svg,
            r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333333"/>"##
        );
        for t in ticks(x_lo, x_hi, x_step) {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                sx(t),
                TOP + plot_h + 18.0,
                tick_label(t, x_step)
            );
        }
        for t in ticks(y_lo, y_hi, y_step) {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 8.0,
                sy(t) + 4.0,
                tick_label(t, y_step)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 18.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text class="y-label" x="18" y="{0:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {0:.2})">{1}</text>"#,
            TOP + plot_h / 2.0,
            escape(self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"><title>{}</title></polyline>"#,
                pts.join(" "),
                escape(&s.label)
            );
            if s.points.len() == 1 {
                let (x, y) = s.points[0];
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            }
        }

        let lx = LEFT + plot_w + 16.0;
        let _ = writeln!(svg, r#"<g class="legend">"#);
        let _ = writeln!(
            svg,
            r#"<text x="{lx}" y="{}" font-weight="bold">{}</text>"#,
            TOP + 10.0,
            escape(self.legend_title)
        );
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let y = TOP + 28.0 + i as f64 * 18.0;
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="5" fill="{color}"/>"#,
                lx + 6.0,
                y - 4.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{y}">{}</text>"#,
                lx + 18.0,
                escape(&s.label)
            );
        }
        let _ = writeln!(svg, "</g>");
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}
