//! Minimal self-contained SVG line plots and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-300 * lo.abs().max(1.0) {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Five evenly spaced tick values.
fn ticks((lo, hi): (f64, f64)) -> Vec<f64> {
    (0..5).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Line plot; `reference` draws a dashed horizontal line.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], reference: Option<f64>) -> String {
    let xr = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(reference));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
    let sy = |y: f64| TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        esc(title)
    );
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in ticks(xr) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ccc"/>"##, TOP, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, label(t));
    }
    for t in ticks(yr) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ccc"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(t));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 14.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        esc(y_label)
    );
    if let Some(r) = reference {
        let y = sy(r);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-dasharray="5,4"/>"#,
            LEFT + pw
        );
    }
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if pts.len() == 1 {
            let _ = writeln!(s, r#"<circle cx="{}" r="3" fill="{color}"/>"#, pts[0].replacen(',', "\" cy=\"", 1));
        } else {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, esc(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

/// One heatmap panel: values indexed `[i][j]` at `(xs[i], ps[j])`.
pub struct Panel<'a> {
    pub title: String,
    pub nx: usize,
    pub np: usize,
    pub value: &'a dyn Fn(usize, usize) -> f64,
}

/// Diverging blue-white-red colour for `v` in `[-1, 1]`.
fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Grid of heatmaps with one colour scale, `cols` panels per row; each
/// row may carry a label on its left.
pub fn heatmaps(title: &str, panels: &[Panel<'_>], cols: usize, row_labels: &[String]) -> String {
    let size = 120.0;
    let gap = 14.0;
    let left = 120.0;
    let rows = panels.len().div_ceil(cols.max(1));
    let width = left + cols as f64 * (size + gap) + gap;
    let height = 40.0 + rows as f64 * (size + 28.0) + 10.0;
    let mut scale: f64 = 0.0;
    for p in panels {
        for i in 0..p.nx {
            for j in 0..p.np {
                scale = scale.max((p.value)(i, j).abs());
            }
        }
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{} (|W| max {})</text>"#,
        width / 2.0,
        esc(title),
        label(scale)
    );
    for (k, p) in panels.iter().enumerate() {
        let (row, col) = (k / cols, k % cols);
        let x0 = left + gap + col as f64 * (size + gap);
        let y0 = 40.0 + row as f64 * (size + 28.0) + 14.0;
        if col == 0 {
            if let Some(l) = row_labels.get(row) {
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                    left,
                    y0 + size / 2.0,
                    esc(l)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + size / 2.0,
            y0 - 4.0,
            esc(&p.title)
        );
        let (cw, ch) = (size / p.nx as f64, size / p.np as f64);
        for j in 0..p.np {
            for i in 0..p.nx {
                // p increases upwards
                let y = y0 + (p.np - 1 - j) as f64 * ch;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    x0 + i as f64 * cw,
                    y,
                    cw + 0.05,
                    ch + 0.05,
                    diverging((p.value)(i, j) / scale)
                );
            }
        }
        let _ =
            writeln!(s, r#"<rect x="{x0:.2}" y="{y0:.2}" width="{size}" height="{size}" fill="none" stroke="black"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let s =
            line_plot("t", "x", "y", &[Series { name: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 2.0)] }], Some(1.5));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a&lt;b") && s.contains("polyline") && s.contains("stroke-dasharray"));
    }

    #[test]
    fn heatmap_colours() {
        assert_eq!(diverging(0.0), "#ffffff");
        assert_eq!(diverging(1.0), "#ff0000");
        assert_eq!(diverging(-1.0), "#0000ff");
        let f = |i: usize, j: usize| (i as f64) - (j as f64);
        let s = heatmaps("w", &[Panel { title: "p".into(), nx: 3, np: 3, value: &f }], 1, &["row".into()]);
        assert_eq!(s.matches("<rect").count(), 1 + 9 + 1);
    }
}
