//! Minimal SVG emission for line and bar charts.

use std::fmt::Write as _;

pub(crate) const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Plot rectangle inside the canvas, with a linear value axis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Frame {
    pub fn y(&self, v: f64) -> f64 {
        self.top + self.height * (1.0 - (v - self.y_min) / (self.y_max - self.y_min))
    }

    /// x for slot `i` of `n` evenly spaced positions.
    pub fn x(&self, i: usize, n: usize) -> f64 {
        if n <= 1 {
            self.left + self.width / 2.0
        } else {
            self.left + self.width * i as f64 / (n - 1) as f64
        }
    }
}

/// Upper axis bound a little above `max`, at least `floor`.
pub(crate) fn nice_max(max: f64, floor: f64) -> f64 {
    let m = max.max(floor);
    let step = 10f64.powf(m.log10().floor() - 1.0);
    ((m * 1.05) / step).ceil() * step
}

pub(crate) struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    pub fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub fn text(&mut self, x: f64, y: f64, anchor: &str, size: u32, class: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            escape(text)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}"/>"#
        );
    }

    /// Frame border, horizontal grid lines and value labels.
    pub fn axes(&mut self, f: &Frame, ticks: usize, y_label: &str) {
        let _ = writeln!(
            self.body,
            r##"<rect class="frame" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            f.left, f.top, f.width, f.height
        );
        for i in 0..=ticks {
            let v = f.y_min + (f.y_max - f.y_min) * i as f64 / ticks as f64;
            let y = f.y(v);
            self.line(f.left, y, f.left + f.width, y, "#ddd", "grid");
            self.text(f.left - 6.0, y + 4.0, "end", 11, "tick", &format_tick(v));
        }
        let (x, y) = (14.0, f.top + f.height / 2.0);
        let _ = writeln!(
            self.body,
            r#"<text class="axis-label" x="{x:.2}" y="{y:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
            escape(y_label)
        );
    }

    pub fn legend(&mut self, x: f64, y: f64, entries: &[(String, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let yy = y + 16.0 * i as f64;
            let _ = writeln!(
                self.body,
                r#"<g class="legend"><rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text></g>"#,
                yy - 10.0,
                x + 16.0,
                yy,
                escape(label)
            );
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_max_covers_value() {
        for m in [0.013, 0.2, 0.9, 1.57, 12.0, 480.0] {
            let n = nice_max(m, 0.0);
            assert!(n >= m * 1.05 - 1e-12 && n <= m * 1.3, "{m} -> {n}");
        }
        assert_eq!(nice_max(0.0, 0.1), nice_max(0.1, 0.0));
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
