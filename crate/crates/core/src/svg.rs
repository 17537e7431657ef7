//! Minimal SVG figures: line plots with axes, ticks, labels and a legend, and
//! a grayscale heatmap for coincidence maps. Output is 800×500 px.

use std::fmt::Write as _;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;

const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Roughly five round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&a) {
        format!("{}", (v * 1e6).round() / 1e6)
    } else {
        format!("{v:.1e}")
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(out, r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#000"/>"##, x1 - x0, y0 - y1);
        for t in ticks(self.x.0, self.x.1) {
            let p = self.px(t);
            let _ = writeln!(out, r##"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{}" stroke="#000"/>"##, y0 + 5.0);
            let _ = writeln!(out, r#"<text x="{p:.2}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, y0 + 20.0, tick_label(t));
        }
        for t in ticks(self.y.0, self.y.1) {
            let p = self.py(t);
            let _ = writeln!(out, r##"<line x1="{}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="#000"/>"##, x0 - 5.0);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="12">{}</text>"#, x0 - 8.0, p + 4.0, tick_label(t));
        }
        let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, escape(x_label));
        let cy = (y0 + y1) / 2.0;
        let _ = writeln!(out, r#"<text x="20" y="{cy}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {cy})">{}</text>"#, escape(y_label));
    }
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
    )
}

impl LinePlot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    pub fn render(&self) -> String {
        let frame = Frame {
            x: range(self.series.iter().flat_map(|s| s.x.iter().copied())),
            y: range(self.series.iter().flat_map(|s| s.y.iter().copied()).chain([0.0])),
        };
        let mut out = header();
        frame.axes(&mut out, &self.title, &self.x_label, &self.y_label);
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let points: Vec<String> = s
                .x
                .iter()
                .zip(&s.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
                .collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.join(" "));
            let ly = TOP + 18.0 + 18.0 * i as f64;
            let lx = WIDTH - RIGHT - 200.0;
            let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 24.0);
            let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Grayscale heatmap of `values` (row-major, `y` outer), darker for larger values.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64], values: &[f64]) -> String {
    let frame = Frame { x: range(x.iter().copied()), y: range(y.iter().copied()) };
    let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let mut out = header();
    let half = |g: &[f64], i: usize| {
        let lo = if i == 0 { g[0] } else { 0.5 * (g[i - 1] + g[i]) };
        let hi = if i + 1 == g.len() { g[i] } else { 0.5 * (g[i] + g[i + 1]) };
        (lo, hi)
    };
    for (j, _) in y.iter().enumerate() {
        let (ylo, yhi) = half(y, j);
        for (i, _) in x.iter().enumerate() {
            let (xlo, xhi) = half(x, i);
            let v = values[j * x.len() + i];
            let shade = if max > 0.0 { (255.0 * (1.0 - (v / max).clamp(0.0, 1.0))).round() as u8 } else { 255 };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},{shade})"/>"#,
                frame.px(xlo),
                frame.py(yhi),
                (frame.px(xhi) - frame.px(xlo)).max(0.5),
                (frame.py(ylo) - frame.py(yhi)).max(0.5)
            );
        }
    }
    frame.axes(&mut out, title, x_label, y_label);
    let lx = WIDTH - RIGHT - 200.0;
    let _ = writeln!(out, r#"<text x="{lx}" y="{}" font-size="12">black = {}</text>"#, TOP + 18.0, tick_label(max));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(-2.5e-3, 2.5e-3);
        assert!(t.len() >= 4 && t.len() <= 11, "{t:?}");
        assert!(t.iter().all(|v| (-2.5e-3..=2.5e-3).contains(v)));
        assert!(t.iter().any(|v| *v == 0.0));
    }

    #[test]
    fn plot_has_size_legend_and_series() {
        let svg = LinePlot::new("t", "x (m)", "rate")
            .with(Series::new("a<b", vec![0.0, 1.0], vec![0.0, 2.0]))
            .with(Series::new("c", vec![0.0, 1.0], vec![1.0, 1.0]))
            .render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(r#"width="800" height="500""#));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn degenerate_ranges_do_not_produce_nan() {
        let svg = LinePlot::new("", "", "").with(Series::new("z", vec![1.0, 1.0], vec![0.0, 0.0])).render();
        assert!(!svg.contains("NaN"));
        let map = heatmap("m", "x", "y", &[0.0, 1.0], &[0.0, 1.0], &[0.0; 4]);
        assert!(!map.contains("NaN"));
    }
}
