//! Minimal SVG charts for the CLI outputs: grouped bars with whiskers and
//! multi-series line plots. Both use an 800×500 view box.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

/// One bar: a label, its height and the half-length of its whisker.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional ± band per point, drawn as vertical error bars.
    pub errs: Option<Vec<f64>>,
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Linear map from `[lo, hi]` onto `[a, b]`, degenerate ranges mapping to
/// the midpoint.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi - lo <= 0.0 {
        (a + b) / 2.0
    } else {
        a + (v - lo) / (hi - lo) * (b - a)
    }
}

/// Padded `[lo, hi]` covering the values.
fn padded_range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if include_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.05 };
    (lo - if lo < 0.0 || !include_zero { pad } else { 0.0 }, hi + pad)
}

fn y_axis(out: &mut String, lo: f64, hi: f64, label: &str) {
    let y0 = HEIGHT - BOTTOM;
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{y0}" stroke="black"/>"#
    );
    for k in 0..=5 {
        let v = lo + (hi - lo) * k as f64 / 5.0;
        let y = scale(v, lo, hi, y0, TOP);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (TOP + y0) / 2.0,
        (TOP + y0) / 2.0,
        escape(label)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Bars grouped by category, one `<g class="bar-group">` per group. Each
/// group holds one bar per series name in `series`.
pub fn grouped_bar_chart(title: &str, y_label: &str, series: &[String], groups: &[(String, Vec<Bar>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = padded_range(
        groups
            .iter()
            .flat_map(|(_, bars)| bars.iter().flat_map(|b| [b.value - b.err, b.value + b.err])),
        true,
    );
    y_axis(&mut out, lo, hi, y_label);
    let y0 = HEIGHT - BOTTOM;
    let base = scale(0.0_f64.clamp(lo, hi), lo, hi, y0, TOP);
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{LEFT}" y1="{base:.2}" x2="{}" y2="{base:.2}" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    let plot_w = WIDTH - LEFT - RIGHT;
    let slot = plot_w / groups.len().max(1) as f64;
    for (gi, (name, bars)) in groups.iter().enumerate() {
        let _ = writeln!(out, r#"<g class="bar-group" data-group="{}">"#, escape(name));
        let inner = slot * 0.8;
        let bw = inner / bars.len().max(1) as f64;
        let gx = LEFT + slot * gi as f64 + slot * 0.1;
        for (bi, bar) in bars.iter().enumerate() {
            let color_idx = series.iter().position(|s| *s == bar.label).unwrap_or(bi);
            let color = PALETTE[color_idx % PALETTE.len()];
            let x = gx + bw * bi as f64;
            let y = scale(bar.value, lo, hi, y0, TOP);
            let (top, h) = if y < base { (y, base - y) } else { (base, y - base) };
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-series="{}" x="{x:.2}" y="{top:.2}" width="{:.2}" height="{h:.2}" fill="{color}"><title>{}: {}</title></rect>"#,
                escape(&bar.label),
                bw * 0.9,
                escape(&bar.label),
                tick(bar.value)
            );
            let cx = x + bw * 0.45;
            let ya = scale(bar.value - bar.err, lo, hi, y0, TOP);
            let yb = scale(bar.value + bar.err, lo, hi, y0, TOP);
            let cap = (bw * 0.2).min(8.0);
            let _ = writeln!(
                out,
                r#"<path class="whisker" d="M{cx:.2} {ya:.2} V{yb:.2} M{:.2} {ya:.2} H{:.2} M{:.2} {yb:.2} H{:.2}" stroke="black" fill="none"/>"#,
                cx - cap,
                cx + cap,
                cx - cap,
                cx + cap
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            gx + inner / 2.0,
            y0 + 20.0,
            escape(name)
        );
        out.push_str("</g>\n");
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

fn legend(out: &mut String, names: &[String]) {
    let _ = writeln!(out, r#"<g class="legend">"#);
    for (i, name) in names.iter().enumerate() {
        let x = LEFT + 140.0 * (i % 5) as f64;
        let y = HEIGHT - 28.0 + 14.0 * (i / 5) as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{y:.2}">{}</text>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            escape(name)
        );
    }
    out.push_str("</g>\n");
}

/// Line chart with one `<polyline class="series">` per series, plus markers
/// and optional error bars inside the same `<g>`.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let ys = series.iter().flat_map(|s| {
        s.points.iter().enumerate().flat_map(move |(i, &(_, y))| {
            let e = s.errs.as_ref().and_then(|e| e.get(i)).copied().unwrap_or(0.0);
            [y - e, y + e]
        })
    });
    let (lo, hi) = padded_range(ys, false);
    let (xlo, xhi) = {
        let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) }
    };
    y_axis(&mut out, lo, hi, y_label);
    let y0 = HEIGHT - BOTTOM;
    let (px0, px1) = (LEFT + 20.0, WIDTH - RIGHT - 20.0);
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{LEFT}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    let mut xticks: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    xticks.sort_by(f64::total_cmp);
    xticks.dedup();
    for x in xticks {
        let px = scale(x, xlo, xhi, px0, px1);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick(x)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        y0 + 36.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="series-group" data-series="{}">"#, escape(&s.name));
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", scale(x, xlo, xhi, px0, px1), scale(y, lo, hi, y0, TOP)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&s.name),
            pts.join(" ")
        );
        for (k, &(x, y)) in s.points.iter().enumerate() {
            let px = scale(x, xlo, xhi, px0, px1);
            let py = scale(y, lo, hi, y0, TOP);
            let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
            if let Some(e) = s.errs.as_ref().and_then(|e| e.get(k)) {
                let _ = writeln!(
                    out,
                    r#"<path class="whisker" d="M{px:.2} {:.2} V{:.2}" stroke="{color}"/>"#,
                    scale(y - e, lo, hi, y0, TOP),
                    scale(y + e, lo, hi, y0, TOP)
                );
            }
        }
        out.push_str("</g>\n");
    }
    let names: Vec<String> = series.iter().map(|s| s.name.clone()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}
