//! Minimal SVG plots: trajectory fans, histograms and grid heatmaps.

use std::fmt::Write as _;

use super::{Artifacts, Heatmap, Histogram, RunSummary};
use crate::dynamics::Trajectory;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Maps data coordinates onto one panel.
#[derive(Debug, Clone, Copy)]
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), top: f64, height: f64) -> Self {
        let pad = |r: (f64, f64)| if r.1 > r.0 { r } else { (r.0 - 1.0, r.0 + 1.0) };
        Self {
            x: pad(x),
            y: pad(y),
            left: MARGIN,
            top,
            width: W - 2.0 * MARGIN,
            height,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.left, self.top, self.width, self.height
        );
        let b = self.top + self.height;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{xlabel} [{:.4}, {:.4}]</text>"#,
            self.left + self.width / 2.0,
            b + 28.0,
            self.x.0,
            self.x.1
        );
        let _ = writeln!(
            out,
            r#"<text x="12" y="{:.2}" font-size="11" transform="rotate(-90 12 {:.2})" text-anchor="middle">{ylabel} [{:.4}, {:.4}]</text>"#,
            self.top + self.height / 2.0,
            self.top + self.height / 2.0,
            self.y.0,
            self.y.1
        );
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Polylines keep at most this many vertices.
const MAX_VERTICES: usize = 2000;

fn polyline(
    out: &mut String,
    pts: impl ExactSizeIterator<Item = (f64, f64)>,
    color: &str,
    dashed: bool,
) {
    let stride = pts.len().div_ceil(MAX_VERTICES).max(1);
    let mut d = String::new();
    for (x, y) in pts.step_by(stride) {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let dash = if dashed {
        r#" stroke-dasharray="4 3""#
    } else {
        ""
    };
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"{dash}/>"#,
        d.trim_end()
    );
}

/// Coordinates against time; the second coordinate dashed.
fn fan_panel(out: &mut String, trajs: &[Trajectory], top: f64, height: f64) {
    let t = range(trajs.iter().flat_map(|tr| tr.times.iter().copied()));
    let y = range(
        trajs
            .iter()
            .flat_map(|tr| tr.configs.iter().flat_map(|c| c.coords.iter().copied())),
    );
    let f = Frame::new(t, y, top, height);
    f.axes(out, "t", "y");
    for (k, tr) in trajs.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let dims = tr.configs.first().map_or(0, |c| c.coords.len());
        for i in 0..dims {
            let pts = tr
                .times
                .iter()
                .zip(&tr.configs)
                .map(|(&t, c)| (f.px(t), f.py(c.coords[i])));
            polyline(out, pts, color, i == 1);
        }
    }
}

/// Paths in the (y1, y2) plane.
fn planar_panel(out: &mut String, trajs: &[Trajectory], frame: Frame) {
    for (k, tr) in trajs.iter().enumerate() {
        let pts = tr
            .configs
            .iter()
            .map(|c| (frame.px(c.coords[0]), frame.py(c.coords[1])));
        polyline(out, pts, PALETTE[k % PALETTE.len()], false);
    }
}

fn histogram_panel(out: &mut String, h: &Histogram, top: f64, height: f64) {
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame::new((h.lo, h.hi), (0.0, peak), top, height);
    f.axes(out, &h.label, "count");
    for (i, &c) in h.counts.iter().enumerate() {
        let (lo, hi) = h.edges(i);
        let (x0, x1) = (f.px(lo), f.px(hi));
        let y = f.py(c as f64);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#7fa7d9" stroke="#335"/>"##,
            (x1 - x0).max(0.0),
            (f.py(0.0) - y).max(0.0)
        );
    }
}

/// Diverging colour for signed fields, sequential for nonnegative ones.
fn heat_color(v: f64, lo: f64, hi: f64) -> String {
    if lo < 0.0 {
        let m = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let s = (v / m).clamp(-1.0, 1.0);
        let (r, g, b) = if s >= 0.0 {
            (255.0, 255.0 * (1.0 - s), 255.0 * (1.0 - s))
        } else {
            (255.0 * (1.0 + s), 255.0 * (1.0 + s), 255.0)
        };
        format!("rgb({},{},{})", r as u8, g as u8, b as u8)
    } else {
        let s = if hi > 0.0 {
            (v / hi).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = (255.0 * (1.0 - s)) as u8;
        format!("rgb({c},{c},255)")
    }
}

fn heatmap_panel(out: &mut String, hm: &Heatmap, top: f64, height: f64) -> Frame {
    let f = Frame::new(hm.x_bounds, hm.y_bounds, top, height);
    f.axes(out, "q1", "q2");
    let (lo, hi) = range(hm.values.iter().copied());
    let n = hm.resolution;
    let dx = (hm.x_bounds.1 - hm.x_bounds.0) / n as f64;
    let dy = (hm.y_bounds.1 - hm.y_bounds.0) / n as f64;
    for iy in 0..n {
        for ix in 0..n {
            let i = iy * n + ix;
            let x0 = hm.x_bounds.0 + ix as f64 * dx;
            let y1 = hm.y_bounds.0 + (iy + 1) as f64 * dy;
            let (px, py) = (f.px(x0), f.py(y1));
            let w = f.px(x0 + dx) - px;
            let h = f.py(y1 - dy) - py;
            let fill = match &hm.overlay {
                Some(v) if v[i] => "rgb(40,40,40)".to_string(),
                _ => heat_color(hm.values[i], lo, hi),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
            );
        }
    }
    f
}

/// One SVG document for the run: a trajectory panel or heatmap, plus a histogram if present.
pub fn render(summary: &RunSummary, artifacts: &Artifacts) -> String {
    let mut body = String::new();
    let panels = 1 + usize::from(artifacts.histogram.is_some());
    let height = (H - MARGIN * (panels as f64 + 1.0)) / panels as f64;
    let mut top = MARGIN * 0.75;
    match (&artifacts.heatmap, artifacts.planar) {
        (Some(hm), planar) => {
            let frame = heatmap_panel(&mut body, hm, top, height);
            if planar {
                planar_panel(&mut body, &artifacts.trajectories, frame);
            }
        }
        (None, _) => fan_panel(&mut body, &artifacts.trajectories, top, height),
    }
    top += height + MARGIN;
    if let Some(h) = &artifacts.histogram {
        histogram_panel(&mut body, h, top, height);
    }
    let total_h = top + if panels > 1 { height + MARGIN } else { 0.0 };
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{:.0}" viewBox="0 0 {W} {:.0}">
<rect width="100%" height="100%" fill="white"/>
<text x="{MARGIN}" y="20" font-size="13">{} (seed {})</text>
{body}</svg>
"#,
        total_h.max(H / 2.0),
        total_h.max(H / 2.0),
        summary.scenario.name(),
        summary.seed.map_or("none".to_string(), |s| s.to_string()),
    )
}
