//! Minimal SVG rendering with fixed-precision coordinates, so identical inputs
//! give identical bytes.

use std::fmt::Write;

use crate::metacognition::{Quadrant, QuadrantReport};
use crate::study_data::Arm;

const W: f64 = 480.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }

    fn open(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0}" height="{H:.0}" viewBox="0 0 {W:.0} {H:.0}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{W:.0}" height="{H:.0}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
        let (l, r, t, b) = (self.px(self.x0), self.px(self.x1), self.py(self.y1), self.py(self.y0));
        let _ = writeln!(out, r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, r - l, b - t);
        for i in 0..=4 {
            let f = f64::from(i) / 4.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#, self.px(xv), b + 16.0);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#, l - 6.0, self.py(yv) + 4.0);
        }
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 12.0, escape(x_label));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(y_label)
        );
    }
}

/// One named polyline.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Line plot on the unit square, e.g. ROC or precision–recall curves.
/// `diagonal` draws the chance line y = x.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], diagonal: bool) -> String {
    let frame = Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
    let mut out = String::new();
    frame.open(&mut out, title, x_label, y_label);
    if diagonal {
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999999" stroke-dasharray="4 4"/>"##,
            frame.px(0.0),
            frame.py(0.0),
            frame.px(1.0),
            frame.py(1.0)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let lx = W - RIGHT - 150.0;
        let _ = writeln!(out, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 24.0, ly + 4.0, escape(s.name));
    }
    out.push_str("</svg>\n");
    out
}

fn padded_range(values: impl Iterator<Item = f64>, centre: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (centre, centre);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pad = ((hi - lo) * 0.1).max(0.05);
    (lo - pad, hi + pad)
}

/// Self-awareness (x) against calibration difference (y) with median split
/// lines and the shaded ideal quadrant. Unassisted points are hollow,
/// assisted points filled.
pub fn quadrant_plot_svg(report: &QuadrantReport) -> String {
    let (mx, my) = (report.self_awareness_median, report.calibration_difference_median);
    let (x0, x1) = padded_range(report.points.iter().map(|p| p.self_awareness), mx);
    let (y0, y1) = padded_range(report.points.iter().map(|p| p.calibration_difference), my);
    let frame = Frame { x0, x1, y0, y1 };
    let mut out = String::new();
    frame.open(&mut out, "Agent self-awareness and calibration", "Self-awareness (r)", "Calibration difference");
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#2ca02c" fill-opacity="0.12"/>"##,
        frame.px(mx),
        frame.py(y1),
        frame.px(x1) - frame.px(mx),
        frame.py(my) - frame.py(y1)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#666666" stroke-dasharray="4 4"/>"##,
        frame.px(mx),
        frame.py(y0),
        frame.py(y1)
    );
    let _ = writeln!(
        out,
        r##"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}" stroke="#666666" stroke-dasharray="4 4"/>"##,
        frame.py(my),
        frame.px(x0),
        frame.px(x1)
    );
    for p in &report.points {
        let (cx, cy) = (frame.px(p.self_awareness), frame.py(p.calibration_difference));
        let fill = match p.arm {
            Arm::Unassisted => "white",
            Arm::Assisted => PALETTE[0],
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="{fill}" stroke="{}" stroke-width="1.5"><title>{} {} {}</title></circle>"#,
            PALETTE[0],
            escape(&p.agent_id),
            p.arm,
            p.quadrant.as_str()
        );
    }
    let ideal = |arm: Arm| report.counts.get(&arm).map_or(0, |c| c[&Quadrant::Ideal]);
    let total = |arm: Arm| report.counts.get(&arm).map_or(0, |c| c.values().sum::<usize>());
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">ideal: {}/{} unassisted, {}/{} assisted, Fisher p = {:.4}</text>"#,
        W - RIGHT - 4.0,
        TOP + 14.0,
        ideal(Arm::Unassisted),
        total(Arm::Unassisted),
        ideal(Arm::Assisted),
        total(Arm::Assisted),
        report.ideal_by_arm.p_value
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_deterministic_and_escaped() {
        let pts = [(0.0, 0.0), (0.25, 0.8), (1.0, 1.0)];
        let a = line_plot_svg("ROC <A&B>", "FPR", "TPR", &[Series { name: "reader", points: &pts }], true);
        let b = line_plot_svg("ROC <A&B>", "FPR", "TPR", &[Series { name: "reader", points: &pts }], true);
        assert_eq!(a, b);
        assert!(a.contains("ROC &lt;A&amp;B&gt;"));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("60.00,350.00"));
    }
}
