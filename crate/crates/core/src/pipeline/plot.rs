//! Minimal SVG plots. Coordinates are printed with two decimals so output is
//! byte-stable across runs.

use std::fmt::Write as _;

use crate::affect::{ComponentSeries, LabelSeries};
use crate::curve::CurveSample;

const W: f64 = 480.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;
const MAX_DOTS: usize = 400;

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn polyline(&self, out: &mut String, xs: &[f64], ys: &[f64], style: &str) {
        let _ = write!(out, r#"<polyline fill="none" {style} points=""#);
        for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            if !y.is_finite() {
                continue;
            }
            let y = y.clamp(self.y.0, self.y.1);
            let sep = if i == 0 { "" } else { " " };
            let _ = write!(out, "{sep}{:.2},{:.2}", self.px(x), self.py(y));
        }
        out.push_str("\"/>\n");
    }

    fn frame(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.left, self.top, self.width, self.height
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{xlabel}</text>"#,
            self.left + self.width / 2.0,
            self.top + self.height + 28.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{ylabel}</text>"#,
            self.left + 4.0,
            self.top + 12.0
        );
        for (v, anchor_x, anchor_y) in [
            (self.x.0, self.px(self.x.0), self.top + self.height + 14.0),
            (self.x.1, self.px(self.x.1), self.top + self.height + 14.0),
        ] {
            let _ = writeln!(
                out,
                r#"<text x="{anchor_x:.2}" y="{anchor_y:.2}" font-size="10" text-anchor="middle">{v:.2}</text>"#
            );
        }
        for v in [self.y.0, self.y.1] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{v:.2}</text>"#,
                self.left - 4.0,
                self.py(v) + 4.0
            );
        }
    }
}

fn open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Label points over the valence–arousal plane with the fitted mean curve
/// and a ±2σ band.
pub fn va_plot(labels: &LabelSeries, curve: &[CurveSample]) -> String {
    let ax = Axes {
        x: (-1.0, 1.0),
        y: (0.0, 1.0),
        left: PAD,
        top: PAD / 2.0,
        width: W - 1.5 * PAD,
        height: H - 1.5 * PAD,
    };
    let mut s = open(W, H);
    ax.frame(&mut s, "valence", "arousal");
    let step = labels.valence.len().div_ceil(MAX_DOTS).max(1);
    s.push_str("<g fill=\"#3a6ea5\" fill-opacity=\"0.5\">\n");
    for (v, a) in labels.valence.iter().zip(&labels.arousal).step_by(step) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#,
            ax.px(*v),
            ax.py(*a)
        );
    }
    s.push_str("</g>\n");
    if !curve.is_empty() {
        let xs: Vec<f64> = curve.iter().map(|c| c.v).collect();
        let band = |k: f64| -> Vec<f64> {
            curve
                .iter()
                .map(|c| c.mean_a + k * 2.0 * c.var_a.sqrt())
                .collect()
        };
        ax.polyline(
            &mut s,
            &xs,
            &band(1.0),
            r##"stroke="#d08c2c" stroke-dasharray="4 3""##,
        );
        ax.polyline(
            &mut s,
            &xs,
            &band(-1.0),
            r##"stroke="#d08c2c" stroke-dasharray="4 3""##,
        );
        let mean: Vec<f64> = curve.iter().map(|c| c.mean_a).collect();
        ax.polyline(&mut s, &xs, &mean, r##"stroke="#b03a2e" stroke-width="2""##);
    }
    s.push_str("</svg>\n");
    s
}

/// Stacked traces of m, log o, l, A and V over time.
pub fn components_plot(comp: &ComponentSeries, labels: &LabelSeries) -> String {
    let traces: [(&str, &[f64]); 5] = [
        ("m", &comp.m),
        ("log o", &comp.log_o),
        ("l", &comp.l),
        ("A", &labels.arousal),
        ("V", &labels.valence),
    ];
    let panel_h = 90.0;
    let height = PAD + traces.len() as f64 * (panel_h + 30.0);
    let mut s = open(W + 60.0, height);
    let t = &comp.timestamps;
    let (t0, t1) = match (t.first(), t.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let step = t.len().div_ceil(2 * MAX_DOTS).max(1);
    let ts: Vec<f64> = t.iter().step_by(step).copied().collect();
    for (k, (name, ys)) in traces.iter().enumerate() {
        let finite = ys.iter().filter(|v| v.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = finite.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let (lo, hi) = if !(lo.is_finite() && hi.is_finite()) {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        let ax = Axes {
            x: (t0, t1),
            y: (lo, hi),
            left: PAD + 20.0,
            top: PAD / 2.0 + k as f64 * (panel_h + 30.0),
            width: W - 1.5 * PAD,
            height: panel_h,
        };
        ax.frame(
            &mut s,
            if k + 1 == traces.len() { "t (s)" } else { "" },
            name,
        );
        let sampled: Vec<f64> = ys.iter().step_by(step).copied().collect();
        ax.polyline(
            &mut s,
            &ts,
            &sampled,
            r##"stroke="#3a6ea5" stroke-width="1.2""##,
        );
    }
    s.push_str("</svg>\n");
    s
}
