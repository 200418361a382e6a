//! Minimal SVG 1.1 line-chart writer: axes, optional log scales with decade
//! ticks, one polyline per series, and a legend. No plotting dependency and
//! bit-reproducible output for identical inputs.

use std::fmt::Write as _;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 60.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#2ca02c", "#d62728", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    series: Vec<Series>,
}

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LinePlot {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            x_log: false,
            y_log: false,
            series: Vec::new(),
        }
    }

    pub fn log_y(mut self) -> Self {
        self.y_log = true;
        self
    }

    pub fn log_x(mut self) -> Self {
        self.x_log = true;
        self
    }

    /// Add a series; on log axes, points with nonpositive coordinates on the
    /// log-scaled axis are dropped.
    pub fn add_series(&mut self, name: &str, points: &[(f64, f64)]) {
        let filtered: Vec<(f64, f64)> = points
            .iter()
            .copied()
            .filter(|(x, y)| {
                x.is_finite()
                    && y.is_finite()
                    && (!self.x_log || *x > 0.0)
                    && (!self.y_log || *y > 0.0)
            })
            .collect();
        self.series.push(Series { name: name.to_string(), points: filtered });
    }

    fn tx(&self, x: f64) -> f64 {
        if self.x_log {
            x.log10()
        } else {
            x
        }
    }

    fn ty(&self, y: f64) -> f64 {
        if self.y_log {
            y.log10()
        } else {
            y
        }
    }

    /// Render the chart to an SVG 1.1 document.
    pub fn render(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|&(x, y)| (self.tx(x), self.ty(y))))
            .collect();
        let (mut x0, mut x1) = min_max(pts.iter().map(|p| p.0));
        let (mut y0, mut y1) = min_max(pts.iter().map(|p| p.1));
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-12 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
        let py = |y: f64| MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            escape(&self.title)
        );

        // axes box
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L:.1}" y="{MARGIN_T:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black" stroke-width="1"/>"#
        );

        // ticks
        for (t, label) in ticks(x0, x1, self.x_log) {
            let x = px(t);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.1}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"#,
                MARGIN_T + plot_h,
                MARGIN_T + plot_h + 6.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>"#,
                MARGIN_T + plot_h + 20.0
            );
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{MARGIN_T:.1}" x2="{x:.2}" y2="{:.1}" stroke="#dddddd" stroke-width="0.5"/>"#,
                MARGIN_T + plot_h
            );
        }
        for (t, label) in ticks(y0, y1, self.y_log) {
            let y = py(t);
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{y:.2}" x2="{MARGIN_L:.1}" y2="{y:.2}" stroke="black"/>"#,
                MARGIN_L - 6.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"#,
                MARGIN_L - 10.0,
                y + 4.0
            );
            let _ = writeln!(
                s,
                r#"<line x1="{MARGIN_L:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="#dddddd" stroke-width="0.5"/>"#,
                MARGIN_L + plot_w
            );
        }

        // axis labels
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            HEIGHT - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            MARGIN_T + plot_h / 2.0,
            MARGIN_T + plot_h / 2.0,
            escape(&self.y_label)
        );

        // series
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut path = String::new();
            for &(x, y) in &series.points {
                let _ = write!(path, "{:.2},{:.2} ", px(self.tx(x)), py(self.ty(y)));
            }
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.trim_end()
            );
        }

        // legend
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let y = MARGIN_T + 16.0 + 16.0 * k as f64;
            let x = MARGIN_L + plot_w - 170.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/>"#,
                x + 22.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
                x + 28.0,
                y + 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Tick positions in transformed coordinates with their labels; decades on a
/// log axis, five even steps otherwise.
fn ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    if log {
        let first = lo.ceil() as i64;
        let last = hi.floor() as i64;
        if last - first <= 12 {
            for e in first..=last {
                out.push((e as f64, format!("1e{e}")));
            }
        } else {
            let step = ((last - first) / 10).max(1);
            let mut e = first;
            while e <= last {
                out.push((e as f64, format!("1e{e}")));
                e += step;
            }
        }
        if out.is_empty() {
            out.push((lo, format!("1e{lo:.1}")));
            out.push((hi, format!("1e{hi:.1}")));
        }
    } else {
        for k in 0..=5 {
            let t = lo + (hi - lo) * k as f64 / 5.0;
            out.push((t, format!("{t:.3}")));
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
