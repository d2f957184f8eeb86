//! Static SVG scenes of instances and solutions.
//!
//! Output depends only on the inputs: coordinates are printed with fixed
//! precision and elements are emitted in payload order.

use std::fmt::Write as _;
use std::path::Path;

use masspart_core::geom::{complement_basis, Vector};

use crate::instance::{AssignmentSpec, Instance, Problem};
use crate::report::{FlatSpec, Solution};
use crate::HarnessError;

const PANEL: f64 = 320.0;
const MARGIN: f64 = 14.0;
const HEADER: f64 = 24.0;
const FOOTER: f64 = 22.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const CUT: usize = usize::MAX;

#[derive(Clone, Debug)]
enum Item {
    Point(Vector, usize),
    Disk(Vector, f64, usize),
    /// Affine flat of dimension 1 or 2, clipped to the panel box.
    Flat(Vector, Vec<Vector>, usize),
    Segment(Vector, Vector, usize),
}

#[derive(Clone, Debug)]
struct Panel {
    title: String,
    items: Vec<Item>,
}

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

fn color(group: usize) -> &'static str {
    if group == CUT {
        "#000000"
    } else {
        PALETTE[group % PALETTE.len()]
    }
}

fn flat_item(base: Vector, basis: Vec<Vector>, group: usize) -> Item {
    if basis.is_empty() {
        Item::Point(base, group)
    } else {
        Item::Flat(base, basis, group)
    }
}

fn spec_item(f: &FlatSpec, group: usize) -> Item {
    flat_item(v(&f.base), f.basis.iter().map(|b| v(b)).collect(), group)
}

fn hyperplane_item(normal: &[f64], offset: f64, group: usize) -> Item {
    let n = v(normal);
    let len = n.norm();
    let n = n / len;
    let basis = complement_basis(std::slice::from_ref(&n), n.len());
    flat_item(&n * (offset / len), basis, group)
}

fn assignment_items(a: &AssignmentSpec, group: usize, out: &mut Vec<Item>) {
    match a {
        AssignmentSpec::Cloud { points, .. } => out.extend(points.iter().map(|p| Item::Point(v(p), group))),
        AssignmentSpec::BallSection { center, radius, .. } | AssignmentSpec::ProjectedBall { center, radius, .. } => {
            out.push(Item::Disk(v(center), *radius, group))
        }
        AssignmentSpec::Lines { lines, .. } => {
            out.extend(lines.iter().map(|l| flat_item(v(&l.point), vec![v(&l.direction).normalize()], group)))
        }
        AssignmentSpec::Hyperplanes { planes, .. } => {
            out.extend(planes.iter().map(|h| hyperplane_item(&h.normal, h.offset, group)))
        }
    }
}

fn flag_frame_items(solution: Option<&Solution>, out: &mut Vec<Item>) {
    match solution {
        Some(Solution::Flag { levels, .. }) => out.extend(levels.iter().map(|l| spec_item(&l.flat, CUT))),
        Some(Solution::Transversal { s_k, l, .. }) => {
            out.push(spec_item(s_k, CUT));
            out.push(spec_item(l, CUT));
        }
        _ => {}
    }
}

fn panels(instance: &Instance, solution: Option<&Solution>) -> Vec<Panel> {
    let d = instance.problem.dim();
    let kind = instance.problem.kind();
    let mut items = Vec::new();
    match &instance.problem {
        Problem::Fairy { levels, .. } => {
            let mut g = 0;
            for l in levels {
                assignment_items(&l.pivot, g, &mut items);
                g += 1;
                for f in &l.functionals {
                    assignment_items(f, g, &mut items);
                    g += 1;
                }
            }
            flag_frame_items(solution, &mut items);
        }
        Problem::Rotation { mu, functionals, .. } => {
            assignment_items(mu, 0, &mut items);
            for (i, f) in functionals.iter().enumerate() {
                assignment_items(f, i + 1, &mut items);
            }
            flag_frame_items(solution, &mut items);
        }
        Problem::Hamsandwich { measures: xs, .. } | Problem::Transversal { assignments: xs, .. } => {
            for (i, a) in xs.iter().enumerate() {
                assignment_items(a, i, &mut items);
            }
            flag_frame_items(solution, &mut items);
        }
        Problem::Horizontal { families } => {
            for (i, f) in families.iter().enumerate() {
                items.extend(f.lines.iter().map(|l| flat_item(v(&l.point), vec![v(&l.direction).normalize()], i)));
            }
            if let Some(Solution::HorizontalCut { s_dm1, s_dm2, .. }) = solution {
                items.push(spec_item(s_dm1, CUT));
                items.push(spec_item(s_dm2, CUT));
            }
        }
        Problem::TranslatedLine { families } => {
            for (i, f) in families.iter().enumerate() {
                items.extend(f.planes.iter().map(|h| hyperplane_item(&h.normal, h.offset, i)));
            }
            if let Some(Solution::SplitLine { shift, height, .. }) = solution {
                let mut e = Vector::zeros(d);
                e[d - 1] = 1.0;
                items.push(flat_item(v(shift), vec![e.clone()], CUT));
                items.push(Item::Point(v(shift) + e * *height, CUT));
            }
        }
        Problem::Dynamic { families } => {
            let mut times = vec![0.0, 0.5, 1.0];
            let cut = match solution {
                Some(Solution::TimedHyperplane { v: n, t, offset, .. }) => {
                    times.push(*t);
                    Some((n.clone(), *offset))
                }
                _ => None,
            };
            return times
                .into_iter()
                .enumerate()
                .map(|(p, t)| {
                    let mut items = Vec::new();
                    for (i, f) in families.iter().enumerate() {
                        for m in &f.points {
                            let a = v(&m.position);
                            let w = v(&m.velocity);
                            items.push(Item::Segment(a.clone(), &a + &w, i));
                            items.push(Item::Point(a + w * t, i));
                        }
                    }
                    if let (3, Some((n, off))) = (p, &cut) {
                        items.push(hyperplane_item(n, *off, CUT));
                    }
                    Panel { title: format!("{kind} t = {}", fmt(t)), items }
                })
                .collect();
        }
    }
    vec![Panel { title: kind.to_string(), items }]
}

fn fmt(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Orthographic projection to the drawing plane.
fn project(x: &Vector) -> (f64, f64) {
    match x.len() {
        1 => (x[0], 0.0),
        2 => (x[0], x[1]),
        _ => {
            let (sa, ca) = 35f64.to_radians().sin_cos();
            let (se, ce) = 25f64.to_radians().sin_cos();
            (-sa * x[0] + ca * x[1], -se * ca * x[0] - se * sa * x[1] + ce * x[2])
        }
    }
}

/// Part of `base + s dir` inside the box, if any.
fn clip(base: &Vector, dir: &Vector, lo: &[f64], hi: &[f64]) -> Option<(Vector, Vector)> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..base.len() {
        if dir[j].abs() < 1e-12 {
            if base[j] < lo[j] || base[j] > hi[j] {
                return None;
            }
        } else {
            let a = (lo[j] - base[j]) / dir[j];
            let b = (hi[j] - base[j]) / dir[j];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t0 < t1).then(|| (base + dir * t0, base + dir * t1))
}

fn bounds(items: &[Item], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut grow = |x: &Vector, r: f64| {
        for j in 0..d {
            lo[j] = lo[j].min(x[j] - r);
            hi[j] = hi[j].max(x[j] + r);
        }
    };
    for it in items {
        match it {
            Item::Point(x, _) => grow(x, 0.0),
            Item::Disk(c, r, _) => grow(c, *r),
            Item::Flat(b, _, _) => grow(b, 0.0),
            Item::Segment(a, b, _) => {
                grow(a, 0.0);
                grow(b, 0.0);
            }
        }
    }
    for j in 0..d {
        if !lo[j].is_finite() {
            lo[j] = -1.0;
            hi[j] = 1.0;
        }
        let pad = 0.15 * (hi[j] - lo[j]).max(1.0);
        lo[j] -= pad;
        hi[j] += pad;
    }
    (lo, hi)
}

fn render_panel(out: &mut String, panel: &Panel, d: usize, x0: f64) {
    let (lo, hi) = bounds(&panel.items, d);
    let mut segs: Vec<(Vector, Vector, usize)> = Vec::new();
    for it in &panel.items {
        match it {
            Item::Segment(a, b, g) => segs.push((a.clone(), b.clone(), *g)),
            Item::Flat(b, basis, g) if basis.len() == 1 => {
                segs.extend(clip(b, &basis[0], &lo, &hi).map(|(p, q)| (p, q, *g)));
            }
            Item::Flat(b, basis, g) => {
                let span = hi.iter().zip(&lo).map(|(h, l)| h - l).fold(0.0, f64::max);
                for i in -2..=2 {
                    let s = span * i as f64 / 4.0;
                    for (u, w) in [(&basis[0], &basis[1]), (&basis[1], &basis[0])] {
                        segs.extend(clip(&(b + w * s), u, &lo, &hi).map(|(p, q)| (p, q, *g)));
                    }
                }
            }
            _ => {}
        }
    }
    let corners: Vec<(f64, f64)> = (0..1usize << d)
        .map(|m| project(&Vector::from_iterator(d, (0..d).map(|j| if m >> j & 1 == 1 { hi[j] } else { lo[j] }))))
        .collect();
    let (mut ax, mut bx, mut ay, mut by) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &corners {
        ax = ax.min(*x);
        bx = bx.max(*x);
        ay = ay.min(*y);
        by = by.max(*y);
    }
    let inner = PANEL - 2.0 * MARGIN;
    let scale = inner / (bx - ax).max(by - ay).max(1e-12);
    let cx = x0 + PANEL / 2.0;
    let cy = HEADER + PANEL / 2.0;
    let px = |p: &Vector| -> (String, String) {
        let (x, y) = project(p);
        (fmt(cx + (x - 0.5 * (ax + bx)) * scale), fmt(cy - (y - 0.5 * (ay + by)) * scale))
    };
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#cccccc"/>"##,
        fmt(x0 + 2.0),
        fmt(HEADER),
        fmt(PANEL - 4.0),
        fmt(PANEL)
    );
    let _ = writeln!(out, r#"<text x="{}" y="16" font-size="13">{}</text>"#, fmt(x0 + MARGIN), panel.title);
    for (a, b, g) in &segs {
        let ((x1, y1), (x2, y2)) = (px(a), px(b));
        let w = if *g == CUT { "2" } else { "1" };
        let _ = writeln!(out, r#"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{}" stroke-width="{w}"/>"#, color(*g));
    }
    for it in &panel.items {
        match it {
            Item::Point(x, g) => {
                let (a, b) = px(x);
                let r = if *g == CUT { "4" } else { "2.5" };
                let _ = writeln!(out, r#"<circle cx="{a}" cy="{b}" r="{r}" fill="{}"/>"#, color(*g));
            }
            Item::Disk(c, r, g) => {
                let (a, b) = px(c);
                let _ = writeln!(
                    out,
                    r#"<circle cx="{a}" cy="{b}" r="{}" fill="{}" fill-opacity="0.15" stroke="{}"/>"#,
                    fmt(r * scale),
                    color(*g),
                    color(*g)
                );
            }
            _ => {}
        }
    }
}

/// SVG text of the scene; `note` is printed under the panels.
pub fn render_svg(instance: &Instance, solution: Option<&Solution>, note: Option<&str>) -> Result<String, HarnessError> {
    let d = instance.problem.dim();
    if d == 0 || d > 3 {
        return Err(HarnessError::UnsupportedDimension(d));
    }
    let panels = panels(instance, solution);
    let width = PANEL * panels.len() as f64;
    let height = HEADER + PANEL + FOOTER;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">"#,
        fmt(width),
        fmt(height),
        fmt(width),
        fmt(height)
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, d, PANEL * i as f64);
    }
    if let Some(n) = note {
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, fmt(MARGIN), fmt(height - 6.0), n);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes the scene to `path`.
pub fn render_plot(instance: &Instance, solution: Option<&Solution>, note: Option<&str>, path: &Path) -> Result<(), HarnessError> {
    let svg = render_svg(instance, solution, note)?;
    std::fs::write(path, svg).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}
