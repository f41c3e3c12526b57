//! SVG pictures of two-dimensional wall structures.
//!
//! Rays of the complex are laid out at evenly spaced angles and each maximal
//! cone is mapped linearly onto the sector between its rays.

use crate::broken::BrokenLine;
use crate::error::{Error, Result};
use crate::geometry::{ConeComplex, PointInChart};
use crate::linalg::Q;
use crate::walls::WallStructure;
use num_traits::ToPrimitive;
use std::f64::consts::PI;
use std::fmt::Write;

const SIZE: f64 = 480.0;

/// Planar positions of the rays of a two-dimensional complex.
struct Layout {
    dirs: Vec<[f64; 2]>,
}

impl Layout {
    fn new(cx: &ConeComplex) -> Layout {
        let s = cx.num_divisors();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); s];
        for m in cx.maximal_cones() {
            adj[m[0]].push(m[1]);
            adj[m[1]].push(m[0]);
        }
        let start = (0..s).find(|&r| adj[r].len() == 1).unwrap_or(0);
        let closed = (0..s).all(|r| adj[r].len() == 2);
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while let Some(&next) = adj[cur].iter().filter(|&&x| x != prev).min() {
            if order.contains(&next) {
                break;
            }
            order.push(next);
            prev = cur;
            cur = next;
        }
        let cones = cx.maximal_cones().len().max(1) as f64;
        let step = if closed { 2.0 * PI / cones } else { (PI / 2.0).min(5.0 * PI / 3.0 / cones) };
        let mut dirs = vec![[0.0, 0.0]; s];
        for (k, &r) in order.iter().enumerate() {
            let a = step * k as f64;
            dirs[r] = [a.cos(), a.sin()];
        }
        Layout { dirs }
    }

    fn place(&self, global: &[Q]) -> [f64; 2] {
        let mut p = [0.0, 0.0];
        for (r, x) in global.iter().enumerate() {
            let x = x.to_f64().unwrap_or(0.0);
            p[0] += x * self.dirs[r][0];
            p[1] += x * self.dirs[r][1];
        }
        p
    }
}

fn angle(p: [f64; 2]) -> f64 {
    let a = p[1].atan2(p[0]);
    if a < -1e-12 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Planar polyline of a broken line, from far out along its incoming ray to
/// the endpoint, with the bend positions.
fn line_points(cx: &ConeComplex, line: &BrokenLine, reach: f64, layout: &Layout) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut pts = Vec::new();
    let mut bends = Vec::new();
    let first_at = match line.events.first() {
        Some(e) => cx.to_global(&PointInChart::new(e.cone, e.point.clone())),
        None => cx.to_global(&line.endpoint),
    };
    let a = layout.place(&first_at);
    let mut dir = vec![Q::from_integer(0.into()); cx.num_divisors()];
    for (k, &r) in cx.rays_of(line.segments[0].cone).iter().enumerate() {
        dir[r] = Q::from_integer(line.segments[0].exp[k].into());
    }
    let d = layout.place(&dir);
    let norm = (d[0] * d[0] + d[1] * d[1]).sqrt().max(1e-9);
    pts.push([a[0] + d[0] / norm * reach, a[1] + d[1] / norm * reach]);
    for e in &line.events {
        let p = layout.place(&cx.to_global(&PointInChart::new(e.cone, e.point.clone())));
        pts.push(p);
        if e.is_bend() {
            bends.push(p);
        }
    }
    pts.push(layout.place(&cx.to_global(&line.endpoint)));
    (pts, bends)
}

/// Renders walls, chambers and optional broken lines. Deterministic for
/// fixed input.
pub fn render_svg(s: &WallStructure, lines: &[BrokenLine]) -> Result<String> {
    let cx = &*s.complex;
    if cx.dim() != 2 {
        return Err(Error::NonPlanarSlice);
    }
    let layout = Layout::new(cx);
    let mut extent: f64 = 3.0;
    for l in lines {
        extent = extent.max(layout.place(&cx.to_global(&l.endpoint)).iter().fold(0.0f64, |m, v| m.max(v.abs())) * 1.5);
        for e in &l.events {
            let p = layout.place(&cx.to_global(&PointInChart::new(e.cone, e.point.clone())));
            extent = extent.max(p[0].abs().max(p[1].abs()) * 1.5);
        }
    }
    let scale = SIZE / 2.0 / extent;
    let reach = extent * 2.0;
    let tx = |p: [f64; 2]| (SIZE / 2.0 + p[0] * scale, SIZE / 2.0 - p[1] * scale);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(out, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    for (i, m) in cx.maximal_cones().iter().enumerate() {
        let (o, a, b) = (tx([0.0, 0.0]), tx(scaled(layout.dirs[m[0]], reach)), tx(scaled(layout.dirs[m[1]], reach)));
        let shade = if i % 2 == 0 { "#eef3fb" } else { "#f7f7f2" };
        let _ = writeln!(
            out,
            r#"<polygon class="chamber" points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="{shade}"/>"#,
            o.0, o.1, a.0, a.1, b.0, b.1
        );
    }
    for (r, d) in layout.dirs.iter().enumerate() {
        let (o, e) = (tx([0.0, 0.0]), tx(scaled(*d, reach)));
        let _ = writeln!(out, r##"<line class="axis" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#999" stroke-width="1"/>"##, o.0, o.1, e.0, e.1);
        let t = tx(scaled(*d, extent * 0.92));
        let _ = writeln!(out, r#"<text class="axis-label" x="{:.3}" y="{:.3}" font-size="11">{}</text>"#, t.0, t.1, cx.divisors()[r].name);
    }
    let mut walls: Vec<(f64, usize, [f64; 2])> = s
        .walls
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let g = cx.to_global(&PointInChart::new(w.cone, w.support[0].iter().map(|&x| Q::from_integer(x.into())).collect()));
            let p = layout.place(&g);
            (angle(p), i, p)
        })
        .collect();
    walls.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, i, p) in walls {
        let n = (p[0] * p[0] + p[1] * p[1]).sqrt().max(1e-9);
        let d = [p[0] / n, p[1] / n];
        let (o, e) = (tx([0.0, 0.0]), tx(scaled(d, reach)));
        let _ = writeln!(out, r##"<line class="wall" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#c0392b" stroke-width="2"/>"##, o.0, o.1, e.0, e.1);
        let t = tx(scaled(d, extent * 0.8));
        let _ = writeln!(out, r#"<text class="wall-label" x="{:.3}" y="{:.3}" font-size="12">w{i}</text>"#, t.0 + 4.0, t.1 - 4.0);
    }
    for l in lines {
        let (pts, bends) = line_points(cx, l, reach, &layout);
        let list: Vec<String> = pts.iter().map(|&p| {
            let (x, y) = tx(p);
            format!("{x:.3},{y:.3}")
        }).collect();
        let _ = writeln!(out, r##"<polyline class="broken-line" points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##, list.join(" "));
        for b in bends {
            let (x, y) = tx(b);
            let _ = writeln!(out, r#"<circle class="bend" cx="{x:.3}" cy="{y:.3}" r="3.5" fill="black"/>"#);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn scaled(d: [f64; 2], k: f64) -> [f64; 2] {
    [d[0] * k, d[1] * k]
}
