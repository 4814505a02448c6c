//! Minimal SVG plotting: line charts (voltage overlays, residual traces)
//! and bar charts (RMSE vs SoH). Output is deterministic plain text.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#7f7f7f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return None;
    }
    if lo == hi {
        // widen a degenerate range so the scale stays invertible
        lo -= 0.5;
        hi += 0.5;
    }
    Some((lo, hi))
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    )
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    let _ = writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    // four ticks per axis
    for k in 0..=4 {
        let fx = frame.x_lo + (frame.x_hi - frame.x_lo) * k as f64 / 4.0;
        let fy = frame.y_lo + (frame.y_hi - frame.y_lo) * k as f64 / 4.0;
        let px = frame.sx(fx);
        let py = frame.sy(fy);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{y0}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{fx:.4}</text>\n\
             <line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{x0}\" y2=\"{py:.1}\" stroke=\"black\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{fy:.4}</text>",
            y0 + 5.0,
            y0 + 18.0,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        esc(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
}

/// Multi-series line chart; each series is (label, points).
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(&str, &[(f64, f64)])],
) -> String {
    let xb = finite_bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let yb = finite_bounds(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let mut out = header(title);
    if let (Some((x_lo, x_hi)), Some((y_lo, y_hi))) = (xb, yb) {
        let frame = Frame { x_lo, x_hi, y_lo, y_hi };
        axes(&mut out, &frame, x_label, y_label);
        for (k, (label, points)) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut path = String::new();
            for (x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = write!(path, "{:.2},{:.2} ", frame.sx(*x), frame.sy(*y));
            }
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.trim_end()
            );
            let ly = MARGIN_T + 16.0 * k as f64;
            let _ = writeln!(
                out,
                "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"3\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                WIDTH - 180.0,
                WIDTH - 160.0,
                WIDTH - 154.0,
                ly + 4.0,
                esc(label)
            );
        }
    } else {
        out.push_str("<text x=\"360\" y=\"210\" text-anchor=\"middle\">no data</text>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: one group per label, one bar per series.
pub fn bar_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    labels: &[String],
    series: &[(&str, &[f64])],
) -> String {
    let mut out = header(title);
    let yb = finite_bounds(series.iter().flat_map(|(_, v)| v.iter().copied()).chain([0.0]));
    if let (Some((y_lo, y_hi)), false) = (yb, labels.is_empty()) {
        let frame = Frame { x_lo: 0.0, x_hi: labels.len() as f64, y_lo, y_hi };
        axes(&mut out, &frame, x_label, y_label);
        let group_w = (WIDTH - MARGIN_L - MARGIN_R) / labels.len() as f64;
        let bar_w = group_w * 0.8 / series.len().max(1) as f64;
        for (g, label) in labels.iter().enumerate() {
            let gx = MARGIN_L + g as f64 * group_w;
            for (k, (_, values)) in series.iter().enumerate() {
                let v = values.get(g).copied().unwrap_or(0.0);
                let y = frame.sy(v);
                let y0 = frame.sy(y_lo.max(0.0));
                let (top, h) = if y <= y0 { (y, y0 - y) } else { (y0, y - y0) };
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.1}\" y=\"{top:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"{}\"/>",
                    gx + group_w * 0.1 + k as f64 * bar_w,
                    PALETTE[k % PALETTE.len()]
                );
            }
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                gx + group_w / 2.0,
                HEIGHT - MARGIN_B + 32.0,
                esc(label)
            );
        }
        for (k, (name, _)) in series.iter().enumerate() {
            let ly = MARGIN_T + 16.0 * k as f64;
            let _ = writeln!(
                out,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                WIDTH - 180.0,
                ly - 8.0,
                PALETTE[k % PALETTE.len()],
                WIDTH - 162.0,
                ly + 3.0,
                esc(name)
            );
        }
    } else {
        out.push_str("<text x=\"360\" y=\"210\" text-anchor=\"middle\">no data</text>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_valid_svg_with_series() {
        let pts_a: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 4.0 - 0.01 * k as f64)).collect();
        let pts_b: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 3.9 - 0.01 * k as f64)).collect();
        let svg = line_chart("v", "time [s]", "voltage [V]", &[("truth", &pts_a), ("model", &pts_b)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("truth"));
    }

    #[test]
    fn empty_chart_does_not_panic() {
        let svg = line_chart("empty", "x", "y", &[]);
        assert!(svg.contains("no data"));
    }

    #[test]
    fn bar_chart_one_rect_per_value() {
        let labels: Vec<String> = ["1.00", "0.95", "0.90"].iter().map(|s| s.to_string()).collect();
        let svg = bar_chart(
            "rmse vs soh",
            "SoH",
            "RMSE [V]",
            &labels,
            &[("plain", &[0.01, 0.02, 0.03][..]), ("aging-aware", &[0.005, 0.006, 0.007][..])],
        );
        // 6 data bars + 2 legend swatches
        assert_eq!(svg.matches("<rect").count(), 6 + 2 + 1); // +1 background
    }

    #[test]
    fn deterministic_output() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, k as f64 * 0.5)).collect();
        let a = line_chart("t", "x", "y", &[("s", &pts)]);
        let b = line_chart("t", "x", "y", &[("s", &pts)]);
        assert_eq!(a, b);
    }
}
