//! CSV and SVG writers.

use std::fmt::Write as _;

use crate::geom::{Point, Rect};
use crate::manifolds::ManifoldPolyline;

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `branch,idx,x,y` rows, shifted back by `shift`.
pub fn polylines_csv(branches: &[ManifoldPolyline], shift: Point) -> String {
    let mut s = String::from("branch,idx,x,y\n");
    for b in branches {
        let label = b.branch.label();
        let _ = writeln!(s, "{label},0,{},{}", num(b.fixed_point.x + shift.x), num(b.fixed_point.y + shift.y));
        for (i, p) in b.points.iter().enumerate() {
            let _ = writeln!(s, "{label},{},{},{}", i + 1, num(p.x + shift.x), num(p.y + shift.y));
        }
    }
    s
}

pub struct Marker {
    pub at: Point,
    /// Filled markers for fixed points, hollow for period-2 points.
    pub filled: bool,
    pub label: String,
}

pub struct Portrait<'a> {
    pub title: String,
    pub region: Rect,
    pub width: usize,
    pub stable: Vec<&'a [Point]>,
    pub unstable: Vec<&'a [Point]>,
    pub orbits: Vec<Vec<Point>>,
    pub markers: Vec<Marker>,
}

fn runs_inside(points: &[Point], region: Rect) -> Vec<Vec<Point>> {
    let mut runs = Vec::new();
    let mut cur: Vec<Point> = Vec::new();
    for &p in points {
        if region.contains(p) {
            cur.push(p);
        } else if !cur.is_empty() {
            // keep the first exit point so the line reaches the border
            cur.push(p);
            runs.push(std::mem::take(&mut cur));
        }
    }
    if cur.len() > 1 {
        runs.push(cur);
    }
    runs
}

impl Portrait<'_> {
    pub fn to_svg(&self) -> String {
        let r = self.region;
        let w = self.width as f64;
        let h = (w * r.height() / r.width()).clamp(100.0, 4.0 * w).round();
        let sx = |x: f64| (x - r.x0) / r.width() * w;
        let sy = |y: f64| h - (y - r.y0) / r.height() * h;
        let pt = |p: Point| format!("{:.3},{:.3}", sx(p.x.clamp(r.x0 - r.width(), r.x1 + r.width())), sy(p.y.clamp(r.y0 - r.height(), r.y1 + r.height())));
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<clipPath id="plot"><rect x="0" y="0" width="{w}" height="{h}"/></clipPath>"#);
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        if r.x0 < 0.0 && r.x1 > 0.0 {
            let _ = writeln!(s, r##"<line x1="{0:.3}" y1="0" x2="{0:.3}" y2="{h}" stroke="#cccccc" stroke-width="0.5"/>"##, sx(0.0));
        }
        if r.y0 < 0.0 && r.y1 > 0.0 {
            let _ = writeln!(s, r##"<line x1="0" y1="{0:.3}" x2="{w}" y2="{0:.3}" stroke="#cccccc" stroke-width="0.5"/>"##, sy(0.0));
        }
        for (k, orbit) in self.orbits.iter().enumerate() {
            let n = orbit.len().max(1) as f64;
            let _ = writeln!(s, r#"<g class="orbit" id="orbit{k}">"#);
            for (i, p) in orbit.iter().enumerate() {
                if !r.contains(*p) {
                    continue;
                }
                let opacity = 0.9 - 0.8 * i as f64 / n;
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.3}" cy="{:.3}" r="1.5" fill="#555555" fill-opacity="{opacity:.3}"/>"##,
                    sx(p.x),
                    sy(p.y)
                );
            }
            let _ = writeln!(s, "</g>");
        }
        let inflated = r.inflated(0.02 * r.width().max(r.height()));
        for (class, color, lines) in [("stable", "#1f77b4", &self.stable), ("unstable", "#d62728", &self.unstable)] {
            for line in lines.iter() {
                for run in runs_inside(line, inflated) {
                    let pts: Vec<String> = run.iter().map(|p| pt(*p)).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        pts.join(" ")
                    );
                }
            }
        }
        for m in &self.markers {
            let fill = if m.filled { "black" } else { "white" };
            let _ = writeln!(
                s,
                r#"<circle cx="{:.3}" cy="{:.3}" r="4" fill="{fill}" stroke="black" stroke-width="1"><title>{}</title></circle>"#,
                sx(m.at.x),
                sy(m.at.y),
                escape(&m.label)
            );
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, "</svg>");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
