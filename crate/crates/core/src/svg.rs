//! Minimal static SVG line charts with markers and shaded bands.

use std::fmt::Write as _;
use std::path::Path;

use crate::Result;

const PALETTE: [&str; 6] = [
    "#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#555555",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Diamond,
    Triangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
    pub marker: Option<Marker>,
    /// Palette slot; series and bands sharing a slot share a colour.
    pub colour: usize,
}

impl Series {
    pub fn line(name: impl Into<String>, points: Vec<(f64, f64)>, colour: usize) -> Self {
        Self {
            name: name.into(),
            points,
            line: true,
            marker: None,
            colour,
        }
    }

    pub fn markers(
        name: impl Into<String>,
        points: Vec<(f64, f64)>,
        marker: Marker,
        colour: usize,
    ) -> Self {
        Self {
            name: name.into(),
            points,
            line: false,
            marker: Some(marker),
            colour,
        }
    }
}

/// Region between two curves sharing x values.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub colour: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: f64,
    pub height: f64,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
    pub zero_line: bool,
}

impl Chart {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            width: 640.0,
            height: 420.0,
            series: Vec::new(),
            bands: Vec::new(),
            zero_line: true,
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            xs.extend(s.points.iter().map(|p| p.0));
            ys.extend(s.points.iter().map(|p| p.1));
        }
        for b in &self.bands {
            xs.extend(&b.x);
            ys.extend(b.lower.iter().chain(&b.upper));
        }
        if self.zero_line {
            ys.push(0.0);
        }
        let finite = |v: &Vec<f64>| -> (f64, f64) {
            let (lo, hi) = v
                .iter()
                .filter(|x| x.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                    (a.min(x), b.max(x))
                });
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = finite(&xs);
        let (y0, y1) = finite(&ys);
        let pad = 0.05 * (y1 - y0);
        (x0, x1, y0 - pad, y1 + pad)
    }

    pub fn render(&self) -> String {
        let (left, right, top, bottom) = (70.0, 20.0, 40.0, 55.0);
        let pw = self.width - left - right;
        let ph = self.height - top - bottom;
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            self.width / 2.0,
            escape(&self.title)
        );

        for b in &self.bands {
            let mut pts: Vec<String> =
                b.x.iter()
                    .zip(&b.upper)
                    .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
            pts.extend(
                b.x.iter()
                    .zip(&b.lower)
                    .rev()
                    .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))),
            );
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{}" fill-opacity="0.18" stroke="none"/>"#,
                pts.join(" "),
                PALETTE[b.colour % PALETTE.len()]
            );
        }

        // Axes and ticks.
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for t in ticks(x0, x1, 6) {
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{}</text>"#,
                fmt_tick(t),
                x = sx(t),
                b = top + ph,
                b2 = top + ph + 5.0,
                ty = top + ph + 18.0
            );
        }
        for t in ticks(y0, y1, 6) {
            let _ = writeln!(
                s,
                r#"<line x1="{l2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"#,
                fmt_tick(t),
                y = sy(t),
                l2 = left - 5.0,
                tx = left - 8.0,
                ty = sy(t) + 4.0
            );
        }
        if self.zero_line && y0 < 0.0 && y1 > 0.0 {
            let _ = writeln!(
                s,
                r##"<line x1="{left}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
                y = sy(0.0),
                r = left + pw
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + pw / 2.0,
            self.height - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            top + ph / 2.0,
            escape(&self.y_label)
        );

        for series in &self.series {
            let colour = PALETTE[series.colour % PALETTE.len()];
            if series.line && series.points.len() > 1 {
                let pts: Vec<String> = series
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
                    pts.join(" ")
                );
            }
            if let Some(m) = series.marker {
                for &(x, y) in &series.points {
                    let _ = writeln!(s, "{}", marker(m, sx(x), sy(y), colour));
                }
            }
        }

        for (i, series) in self.series.iter().enumerate() {
            let y = top + 14.0 + 16.0 * i as f64;
            let x = left + 10.0;
            let colour = PALETTE[series.colour % PALETTE.len()];
            match series.marker {
                Some(m) => {
                    let _ = writeln!(s, "{}", marker(m, x + 8.0, y - 4.0, colour));
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x}" y1="{yy}" x2="{x2}" y2="{yy}" stroke="{colour}" stroke-width="2"/>"#,
                        yy = y - 4.0,
                        x2 = x + 16.0
                    );
                }
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}">{}</text>"#,
                x + 22.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn marker(m: Marker, x: f64, y: f64, colour: &str) -> String {
    match m {
        Marker::Circle => {
            format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="none" stroke="{colour}"/>"#)
        }
        Marker::Diamond => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="{colour}"/>"#,
            x,
            y - 4.5,
            x + 4.5,
            y,
            x,
            y + 4.5,
            x - 4.5,
            y
        ),
        Marker::Triangle => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="{colour}"/>"#,
            x,
            y - 4.5,
            x + 4.0,
            y + 3.5,
            x - 4.0,
            y + 3.5
        ),
    }
}

/// Round tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(-0.93, 2.1, 6);
        assert_eq!(t, vec![0.0, 1.0, 2.0]);
        assert_eq!(ticks(-0.93, 2.1, 10), vec![-0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(ticks(0.0, 24.0, 6), vec![0.0, 5.0, 10.0, 15.0, 20.0]);
    }

    #[test]
    fn renders_all_elements() {
        let mut c = Chart::new("a < b", "h", "response");
        c.bands.push(Band {
            x: vec![0.0, 1.0, 2.0],
            lower: vec![-1.0, -1.5, -2.0],
            upper: vec![0.5, 0.2, 0.1],
            colour: 0,
        });
        c.series.push(Series::line(
            "tau=0.1",
            vec![(0.0, 0.0), (1.0, -0.5), (2.0, -1.0)],
            0,
        ));
        c.series.push(Series::markers(
            "bins",
            vec![(0.5, 0.3)],
            Marker::Diamond,
            1,
        ));
        let svg = c.render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polygon") && svg.contains("<polyline"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("tau=0.1"));
    }

    #[test]
    fn degenerate_data_still_renders() {
        let mut c = Chart::new("flat", "x", "y");
        c.series
            .push(Series::line("zero", vec![(0.0, 0.0), (1.0, 0.0)], 0));
        assert!(!c.render().contains("NaN"));
        assert!(!Chart::new("empty", "x", "y").render().contains("NaN"));
    }
}
