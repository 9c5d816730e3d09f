//! Minimal SVG rendering of per-method histograms with density overlays.

use std::fmt::Write;

use crate::metrics::DensityCurve;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
    pub curve: Option<&'a DensityCurve>,
}

/// Histogram heights normalised to a density, bins of `width` starting at 0.
fn histogram(values: &[f64], width: f64) -> Vec<(f64, f64)> {
    let bins = (1.0 / width).round() as usize;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = ((v / width - 1e-9).ceil() as isize - 1).clamp(0, bins as isize - 1) as usize;
        counts[k] += 1;
    }
    let n = values.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k as f64 * width, c as f64 / (n * width)))
        .collect()
}

pub fn density_plot(title: &str, x_label: &str, series: &[Series<'_>], bin_width: f64) -> String {
    let all: Vec<f64> = series.iter().flat_map(|s| s.values.iter().copied()).collect();
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = ((lo - 2.0 * bin_width) / bin_width).floor().max(0.0) * bin_width;
    hi = ((hi + 2.0 * bin_width) / bin_width).ceil().min(1.0 / bin_width) * bin_width;
    if hi <= lo {
        hi = lo + bin_width;
    }
    let hists: Vec<Vec<(f64, f64)>> = series.iter().map(|s| histogram(s.values, bin_width)).collect();
    let mut y_max: f64 = 0.0;
    for h in &hists {
        y_max = h.iter().fold(y_max, |m, &(_, d)| m.max(d));
    }
    for s in series {
        if let Some(c) = s.curve {
            y_max = c.points.iter().fold(y_max, |m, &(_, d)| m.max(d));
        }
    }
    if y_max <= 0.0 {
        y_max = 1.0;
    }
    y_max *= 1.05;

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - lo) / (hi - lo) * pw;
    let sy = |y: f64| TOP + ph - y / y_max * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<title>{title}</title>"#);
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{title}</text>"#,
        LEFT + pw / 2.0
    );
    // axes and ticks
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph
    );
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="black"/>"#,
        TOP + ph
    );
    for i in 0..=5 {
        let x = lo + (hi - lo) * i as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}%</text>"#,
            sx(x),
            TOP + ph + 16.0,
            100.0 * x
        );
        let y = y_max * i as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.1}</text>"#,
            LEFT - 6.0,
            sy(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">density</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let _ = writeln!(out, r#"<g clip-path="url(#plot)">"#);
    for (i, (s, h)) in series.iter().zip(&hists).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x0, d) in h {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.25"/>"#,
                sx(x0),
                sy(d),
                sx(x0 + bin_width) - sx(x0),
                sy(0.0) - sy(d)
            );
        }
        if let Some(c) = s.curve {
            let pts: Vec<String> = c
                .points
                .iter()
                .map(|&(x, d)| format!("{:.2},{:.2}", sx(x), sy(d)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
    }
    let _ = writeln!(out, "</g>");
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = LEFT + pw + 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="14" height="10" fill="{color}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            y - 9.0,
            x + 20.0,
            s.name
        );
    }
    out.push_str("</svg>\n");
    out
}
