//! Minimal static SVG line plots.

use std::fmt::Write as _;

#[derive(Clone, Debug, Default)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a polyline.
    pub scatter: bool,
}

#[derive(Clone, Debug, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = extent(pts().map(|p| p.0));
        let (y0, y1) = extent(pts().map(|p| p.1));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
        let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<path d="M{m} {b} L{r} {b} M{m} {b} L{m} {t}" stroke="black" fill="none"/>"#,
            m = MARGIN,
            b = H - MARGIN,
            r = W - MARGIN,
            t = MARGIN
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, sx(fx), H - MARGIN + 16.0, fx);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, MARGIN - 4.0, sy(fy) + 4.0, fy);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
            escape(&self.y_label),
            y = H / 2.0
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let finite: Vec<&(f64, f64)> = series.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if series.scatter {
                for p in &finite {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(p.0), sy(p.1));
                }
            } else if !finite.is_empty() {
                let d: Vec<String> = finite
                    .iter()
                    .enumerate()
                    .map(|(i, p)| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, sx(p.0), sy(p.1)))
                    .collect();
                let _ = writeln!(s, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
            }
            let ly = MARGIN + 14.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#,
                W - MARGIN + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_path_per_series() {
        let plot = LinePlot {
            title: "a < b".into(),
            series: vec![
                Series { label: "x".into(), points: vec![(0.0, 0.0), (1.0, 2.0)], scatter: false },
                Series { label: "y".into(), points: vec![(0.5, f64::NAN), (1.0, 1.0)], scatter: true },
            ],
            ..Default::default()
        };
        let svg = plot.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("a &lt; b"));
    }

    #[test]
    fn empty_plot_still_valid() {
        assert!(LinePlot::default().render().contains("</svg>"));
    }
}
