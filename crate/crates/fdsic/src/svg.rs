//! Bare-bones SVG rendering of result tables.

use std::fmt::Write as _;

use crate::report::Table;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

fn header(s: &mut String, title: &str) {
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));
}

fn axes(s: &mut String, x_label: &str, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="{}">{}</text>"#, H - BOTTOM + 15.0, short(x0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT + pw, H - BOTTOM + 15.0, short(x1));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 4.0, TOP + ph, short(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 4.0, TOP + 10.0, short(y1));
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per column; non-finite points split the line.
pub fn lines(table: &Table, title: &str) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let xr = range(table.x.iter().copied());
    let yr = range(table.columns.iter().flat_map(|(_, v)| v.iter().copied()));
    let (Some(xr), Some(yr)) = (xr, yr) else {
        s.push_str("</svg>\n");
        return s;
    };
    axes(&mut s, &table.x_label, xr, yr);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
    let py = |y: f64| TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
    for (i, (name, col)) in table.columns.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut segment = String::new();
        let flush = |seg: &mut String, s: &mut String| {
            if !seg.is_empty() {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, seg.trim_end());
                seg.clear();
            }
        };
        for (x, y) in table.x.iter().zip(col) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(segment, "{:.1},{:.1} ", px(*x), py(*y));
            } else {
                flush(&mut segment, &mut s);
            }
        }
        flush(&mut segment, &mut s);
        let ly = TOP + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{colour}" stroke-width="2"/>"#, W - RIGHT + 10.0, ly - 4.0, W - RIGHT + 28.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, W - RIGHT + 32.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

/// Cells coloured by `log10` of the value, rows along `x`, columns as given.
pub fn heatmap(table: &Table, title: &str) -> String {
    let mut s = String::new();
    header(&mut s, title);
    let logs: Vec<Vec<f64>> = table.columns.iter().map(|(_, v)| v.iter().map(|x| x.log10()).collect()).collect();
    let (Some(xr), Some(vr)) = (range(table.x.iter().copied()), range(logs.iter().flatten().copied())) else {
        s.push_str("</svg>\n");
        return s;
    };
    let ncol = table.columns.len().max(1) as f64;
    axes(&mut s, &table.x_label, xr, (0.0, ncol - 1.0));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let cw = pw / table.x.len().max(1) as f64;
    let ch = ph / ncol;
    for (j, col) in logs.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let t = (v - vr.0) / (vr.1 - vr.0);
            let (r, b) = ((255.0 * t) as u8, (255.0 * (1.0 - t)) as u8);
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="rgb({r},60,{b})"/>"#,
                LEFT + i as f64 * cw,
                TOP + ph - (j as f64 + 1.0) * ch,
                cw + 0.5,
                ch + 0.5
            );
        }
    }
    if let (Some((first, _)), Some((last, _))) = (table.columns.first(), table.columns.last()) {
        let _ = writeln!(s, r#"<text x="{}" y="{}">rows: {} .. {}</text>"#, W - RIGHT + 10.0, TOP + 14.0, escape(first), escape(last));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">log10 range {} .. {}</text>"#, W - RIGHT + 10.0, TOP + 30.0, short(vr.0), short(vr.1));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::PlotKind;

    #[test]
    fn line_plot_splits_on_gaps() {
        let mut t = Table::new("", "x", vec![0.0, 1.0, 2.0, 3.0]);
        t.push("a", vec![1.0, f64::NAN, 2.0, 3.0]);
        let out = lines(&t, "demo");
        assert_eq!(out.matches("<polyline").count(), 2);
        assert!(out.ends_with("</svg>\n"));
    }

    #[test]
    fn heatmap_cells() {
        let mut t = Table::new("map", "x", vec![0.0, 1.0]);
        t.kind = PlotKind::Heatmap;
        t.push("r0", vec![1.0, 10.0]);
        t.push("r1", vec![100.0, 1000.0]);
        assert_eq!(heatmap(&t, "h").matches("<rect x=").count(), 5);
    }

    #[test]
    fn empty_table_is_valid_svg() {
        let t = Table::new("", "x", vec![]);
        assert!(lines(&t, "e").contains("</svg>"));
    }
}
