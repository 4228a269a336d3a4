use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use super::run::Bundle;
use crate::error::{Error, Result};
use crate::policy::TrainingMode;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Mean and standard error across seeds at one evaluation step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub mean: f64,
    /// Zero with a single seed.
    pub stderr: f64,
    pub seeds: usize,
}

/// Seed-aggregated evaluation curve per training mode.
pub fn curves(bundle: &Bundle) -> BTreeMap<TrainingMode, Vec<CurvePoint>> {
    let mut by_step: BTreeMap<TrainingMode, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in &bundle.rows {
        by_step.entry(row.mode).or_default().entry(row.step).or_default().push(row.eval_reward);
    }
    by_step
        .into_iter()
        .map(|(mode, steps)| {
            let points = steps
                .into_iter()
                .map(|(step, v)| {
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let stderr = if v.len() > 1 {
                        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
                    } else {
                        0.0
                    };
                    CurvePoint { step, mean, stderr, seeds: v.len() }
                })
                .collect();
            (mode, points)
        })
        .collect()
}

/// Writes `curves.svg` into the bundle: mean evaluation reward per mode with a
/// standard-error band. Fails on a bundle without evaluations.
pub fn emit_plots(bundle: &Bundle) -> Result<Vec<PathBuf>> {
    let curves = curves(bundle);
    if curves.values().all(Vec::is_empty) {
        return Err(Error::Undefined(format!("{} has no evaluation rows", bundle.dir.display())));
    }
    let path = bundle.dir.join("curves.svg");
    std::fs::write(&path, render(&bundle.summary.config.name, &curves))?;
    Ok(vec![path])
}

pub fn render(title: &str, curves: &BTreeMap<TrainingMode, Vec<CurvePoint>>) -> String {
    let points = curves.values().flatten();
    let max_step = points.clone().map(|p| p.step).max().unwrap_or(1).max(1) as f64;
    let lo = points.clone().map(|p| p.mean - p.stderr).fold(0.0, f64::min);
    let hi = points.map(|p| p.mean + p.stderr).fold(1.0, f64::max);
    let x = |s: f64| MARGIN + s / max_step * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" x2="{x1}" y1="{0:.1}" y2="{0:.1}" stroke="#ddd"/><text x="{1}" y="{2:.1}" text-anchor="end">{v:.2}</text>"##,
            y(v),
            x0 - 6.0,
            y(v) + 4.0
        );
        let s = max_step * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, x(s), y0 + 18.0, format_steps(s));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">environment steps</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">evaluation reward</text>"#,
        HEIGHT / 2.0
    );
    for (k, (mode, pts)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if pts.iter().any(|p| p.stderr > 0.0) {
            let upper = pts.iter().map(|p| format!("{:.2},{:.2}", x(p.step as f64), y(p.mean + p.stderr)));
            let lower = pts.iter().rev().map(|p| format!("{:.2},{:.2}", x(p.step as f64), y(p.mean - p.stderr)));
            let poly: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", x(p.step as f64), y(p.mean))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let seeds = pts.iter().map(|p| p.seeds).max().unwrap_or(0);
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" x2="{1}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{2}" y="{3}">{4} ({seeds} seeds)</text>"#,
            x1 - 170.0,
            x1 - 150.0,
            x1 - 145.0,
            ly + 4.0,
            mode.label()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_steps(s: f64) -> String {
    if s >= 1000.0 {
        format!("{}k", (s / 1000.0).round())
    } else {
        format!("{}", s.round())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
