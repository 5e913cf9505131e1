//! Scatter CSV and a self-contained SVG of chi-plane points.

use std::fmt::Write as _;

use anyhow::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub xy: [f64; 2],
    pub label: String,
    /// `None` for points that did not take part in the fit.
    pub inlier: Option<bool>,
}

/// `x,y,label,inlier`; `inlier` is empty for context points.
pub fn points_csv(points: &[PlotPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "label", "inlier"])?;
    for p in points {
        let inlier = p.inlier.map(|b| b.to_string()).unwrap_or_default();
        w.write_record([p.xy[0].to_string(), p.xy[1].to_string(), p.label.clone(), inlier])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)?)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

/// Scatter of `points` with the line through `point` along `direction`.
pub fn scatter_svg(points: &[PlotPoint], point: [f64; 2], direction: [f64; 2], line_label: &str) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.xy[0]);
        x1 = x1.max(p.xy[0]);
        y0 = y0.min(p.xy[1]);
        y1 = y1.max(p.xy[1]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad_x = ((x1 - x0) * 0.08).max(1e-6);
    let pad_y = ((y1 - y0) * 0.08).max(1e-6);
    let (x0, x1, y0, y1) = (x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (pw, ph) = (W - 2.0 * MARGIN, H - 2.0 * MARGIN);
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}"/></clipPath></defs>"#);
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">chi 1</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">chi 2</text>"#, H / 2.0, H / 2.0);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">x {x0:.4} .. {x1:.4}, y {y0:.4} .. {y1:.4}</text>"#, MARGIN - 8.0);

    let reach = (x1 - x0).hypot(y1 - y0) * 2.0;
    let (a, b) = (
        [point[0] - reach * direction[0], point[1] - reach * direction[1]],
        [point[0] + reach * direction[0], point[1] + reach * direction[1]],
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#444" stroke-width="1.5" clip-path="url(#plot)"><title>{}</title></line>"##,
        sx(a[0]),
        sy(a[1]),
        sx(b[0]),
        sy(b[1]),
        escape(line_label)
    );
    for p in points {
        let (x, y) = (sx(p.xy[0]), sy(p.xy[1]));
        let title = escape(&p.label);
        match p.inlier {
            Some(true) => {
                let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#1f5fbf"><title>{title}</title></circle>"##);
            }
            Some(false) => {
                let _ = writeln!(
                    s,
                    r##"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="#c02020" stroke-width="2"><title>{title}</title></path>"##,
                    x - 4.0,
                    y - 4.0,
                    x + 4.0,
                    y + 4.0,
                    x - 4.0,
                    y + 4.0,
                    x + 4.0,
                    y - 4.0
                );
            }
            None => {
                let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="#999"><title>{title}</title></circle>"##);
            }
        }
    }
    let _ = writeln!(s, r##"<g transform="translate({} {})"><circle r="4" fill="#1f5fbf"/><text x="8" y="4">inlier</text><path d="M-4 16L4 24M-4 24L4 16" stroke="#c02020" stroke-width="2"/><text x="8" y="24">outlier</text><line x1="-6" y1="40" x2="6" y2="40" stroke="#444"/><text x="8" y="44">{}</text></g>"##, W - MARGIN - 110.0, MARGIN + 14.0, escape(line_label));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<PlotPoint> {
        vec![
            PlotPoint { xy: [0.0, 0.0], label: "a<b".into(), inlier: Some(true) },
            PlotPoint { xy: [1.0, 1.0], label: "c".into(), inlier: Some(false) },
            PlotPoint { xy: [0.5, 0.2], label: "d".into(), inlier: None },
        ]
    }

    #[test]
    fn csv_rows() {
        let csv = points_csv(&pts()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,label,inlier");
        assert_eq!(lines[1], "0,0,a<b,true");
        assert_eq!(lines[3], "0.5,0.2,d,");
    }

    #[test]
    fn svg_is_self_contained() {
        let svg = scatter_svg(&pts(), [0.0, 0.0], [0.6, 0.8], "fit");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("href"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
