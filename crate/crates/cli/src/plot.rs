//! Minimal static SVG output: cumulative success with its Wilson band and
//! mean filling with a ±1 SE band, one colour per input directory.

use std::fmt::Write;

use dualarray::montecarlo::Histogram;
use dualarray::report::CurveRow;

pub struct Series {
    pub label: String,
    pub rows: Vec<CurveRow>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 900.0;
const H: f64 = 380.0;
const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 260.0;
const TOP: f64 = 50.0;

struct Panel {
    left: f64,
    x_max: f64,
}

impl Panel {
    fn x(&self, cycle: f64) -> f64 {
        self.left + PANEL_W * cycle / self.x_max
    }

    fn y(&self, v: f64) -> f64 {
        TOP + PANEL_H * (1.0 - v.clamp(0.0, 1.0))
    }

    fn frame(&self, svg: &mut String, title: &str) {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.1}" y="{TOP}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##,
            self.left
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{title}</text>"#,
            self.left + PANEL_W / 2.0,
            TOP - 12.0
        );
        for i in 0..=4 {
            let v = i as f64 / 4.0;
            let _ = writeln!(
                svg,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.2}</text>"##,
                self.left,
                self.left + PANEL_W,
                self.left - 6.0,
                self.y(v) + 4.0,
                y = self.y(v)
            );
        }
        let ticks = 5;
        for i in 0..=ticks {
            let c = self.x_max * i as f64 / ticks as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{c:.0}</text>"#,
                self.x(c),
                TOP + PANEL_H + 16.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">assembly cycle</text>"#,
            self.left + PANEL_W / 2.0,
            TOP + PANEL_H + 34.0
        );
    }

    fn band(&self, svg: &mut String, pts: &[(f64, f64, f64)], color: &str) {
        if pts.is_empty() {
            return;
        }
        let mut d = String::new();
        for (i, &(c, lo, _)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, self.x(c), self.y(lo));
        }
        for &(c, _, hi) in pts.iter().rev() {
            let _ = write!(d, "L{:.2},{:.2} ", self.x(c), self.y(hi));
        }
        let _ = writeln!(svg, r#"<path d="{}Z" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, d);
    }

    fn line(&self, svg: &mut String, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(c, v)| format!("{:.2},{:.2}", self.x(c), self.y(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            coords.join(" ")
        );
    }
}

pub fn render_svg(series: &[Series]) -> String {
    let x_max = series
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| r.cycle))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let success = Panel { left: 60.0, x_max };
    let fill = Panel { left: 60.0 + PANEL_W + 80.0, x_max };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    success.frame(&mut svg, "cumulative defect-free success");
    fill.frame(&mut svg, "target filling fraction");

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let c = |r: &CurveRow| r.cycle as f64;
        success.band(&mut svg, &s.rows.iter().map(|r| (c(r), r.ci_low, r.ci_high)).collect::<Vec<_>>(), color);
        success.line(&mut svg, &s.rows.iter().map(|r| (c(r), r.cum_success)).collect::<Vec<_>>(), color);
        fill.band(
            &mut svg,
            &s.rows.iter().map(|r| (c(r), r.mean_fill - r.se_fill, r.mean_fill + r.se_fill)).collect::<Vec<_>>(),
            color,
        );
        fill.line(&mut svg, &s.rows.iter().map(|r| (c(r), r.mean_fill)).collect::<Vec<_>>(), color);
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            success.left + 10.0,
            success.left + 30.0,
            success.left + 36.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Fixed-width text histogram, bucketing counts into at most `bins` rows.
pub fn text_histogram(h: &Histogram, width: usize, bins: usize) -> String {
    let (Some(&(lo, _)), Some(&(hi, _))) = (h.first(), h.last()) else {
        return String::new();
    };
    let span = hi - lo + 1;
    let bin = span.div_ceil(bins.max(1)).max(1);
    let mut counts = vec![0u64; span.div_ceil(bin)];
    for &(v, n) in h {
        counts[(v - lo) / bin] += n;
    }
    let peak = counts.iter().copied().max().unwrap_or(1).max(1);
    let mut out = String::new();
    for (i, &n) in counts.iter().enumerate() {
        let start = lo + i * bin;
        let bar = "#".repeat((n as usize * width).div_ceil(peak as usize));
        let _ = writeln!(out, "{:>5}-{:<5} {:>6} {bar}", start, start + bin - 1, n);
    }
    out
}
