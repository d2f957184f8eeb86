//! Tukey depth, centerpoint regions and common λ-transversals on λ-vertical
//! linear subspaces.
//!
//! Depth and regions are computed for measures seen through a projection onto
//! a one- or two-dimensional coordinate space (a "view"). Atomic measures are
//! handled exactly through critical directions; smooth measures are sampled on
//! a fixed direction table that is closed under coordinate reflections and
//! swaps, which keeps sign flips of the view basis exact.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{MassError, Result, SolveError};
use crate::geom::{complement_basis, is_k_vertical, sub_flat, unit, Flat, Frame, HalfFlat, Vector, TOL_GEO};
use crate::masses::{assign, mollify, FlatMeasure, MassAssignment, MassKind};
use crate::search::{search_zero, SolverConfig, StiefelSpace};

/// A convex region of a one- or two-dimensional coordinate space.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    /// Vertices in counter-clockwise order; may degenerate to a segment or point.
    Polygon(Vec<[f64; 2]>),
}

/// Directions sampled for smooth measures in two dimensions.
const TABLE_OCTANT: usize = 64;

fn direction_table() -> Vec<[f64; 2]> {
    let mut first = Vec::new();
    for k in 0..=TABLE_OCTANT {
        if k == TABLE_OCTANT {
            first.push([FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
            break;
        }
        let t = (PI / 4.0) * k as f64 / TABLE_OCTANT as f64;
        let (s, c) = t.sin_cos();
        first.push([c, s]);
    }
    let mut quadrant = first.clone();
    for &[c, s] in first.iter().rev().skip(1) {
        quadrant.push([s, c]);
    }
    quadrant.pop();
    let mut out = Vec::with_capacity(4 * quadrant.len());
    for &[x, y] in &quadrant {
        out.push([x, y]);
    }
    for &[x, y] in &quadrant {
        out.push([-y, x]);
    }
    for &[x, y] in &quadrant {
        out.push([-x, -y]);
    }
    for &[x, y] in &quadrant {
        out.push([y, -x]);
    }
    out
}

/// A measure viewed through coordinates along `basis` (carrier coordinates).
struct View<'a> {
    m: &'a FlatMeasure,
    basis: Vec<Vector>,
}

impl View<'_> {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn dir(&self, u: &[f64]) -> Vector {
        let mut o = Vector::zeros(self.m.carrier().dim());
        for (b, ui) in self.basis.iter().zip(u) {
            o.axpy(*ui, b, 1.0);
        }
        o
    }

    fn total(&self) -> Result<f64> {
        match self.m.total_mass() {
            Some(w) if w > 0.0 => Ok(w),
            Some(_) => Err(MassError::ZeroMass),
            None => Err(MassError::UnsupportedKind("custom")),
        }
    }

    fn atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        let atoms = self.m.atoms()?;
        Some(
            atoms
                .into_iter()
                .map(|(c, w)| (self.basis.iter().map(|b| b.dot(&c)).collect(), w))
                .collect(),
        )
    }

    fn mass_ge(&self, u: &[f64], c: f64) -> Result<f64> {
        self.m.mass_ge_along(&self.dir(u), c)
    }

    fn quantiles(&self, u: &[f64], frac: f64) -> Result<(f64, f64)> {
        self.m.quantile_pair(&self.dir(u), frac)
    }

    fn depth(&self, y: &[f64]) -> Result<f64> {
        let w = self.total()?;
        match self.dim() {
            0 => Ok(1.0),
            1 => {
                let up = self.mass_ge(&[1.0], y[0])?;
                let down = self.mass_ge(&[-1.0], -y[0])?;
                Ok(up.min(down) / w)
            }
            2 => match self.atoms() {
                Some(atoms) => Ok(atomic_depth_2d(&atoms, y) / w),
                None => {
                    let mut best = f64::INFINITY;
                    for u in direction_table() {
                        let c = u[0] * y[0] + u[1] * y[1];
                        best = best.min(self.mass_ge(&u, c)?);
                    }
                    Ok(best / w)
                }
            },
            n => Err(MassError::Invalid(format!("depth needs dimension <= 2, got {n}"))),
        }
    }

    fn region(&self, threshold: f64) -> Result<Region> {
        self.total()?;
        match self.dim() {
            1 => {
                let (lo, hi) = self.quantiles(&[1.0], threshold)?;
                if lo > hi + TOL_GEO {
                    return Err(MassError::EmptyRegion);
                }
                Ok(Region::Interval { lo: lo.min(hi), hi: hi.max(lo) })
            }
            2 => {
                let (dirs, extent) = match self.atoms() {
                    Some(atoms) => {
                        let mut dirs: Vec<[f64; 2]> =
                            vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
                        for (i, (a, _)) in atoms.iter().enumerate() {
                            for (b, _) in &atoms[i + 1..] {
                                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                                let len = dx.hypot(dy);
                                if len > 1e-12 {
                                    dirs.push([-dy / len, dx / len]);
                                    dirs.push([dy / len, -dx / len]);
                                }
                            }
                        }
                        let extent = atoms
                            .iter()
                            .map(|(a, _)| a[0].abs().max(a[1].abs()))
                            .fold(0.0, f64::max);
                        (dirs, extent)
                    }
                    None => {
                        let dirs = direction_table();
                        let mut extent: f64 = 0.0;
                        for u in &dirs[..4] {
                            let (lo, hi) = self.quantiles(u, 1e-9)?;
                            extent = extent.max(lo.abs()).max(hi.abs());
                        }
                        (dirs, extent)
                    }
                };
                let r = extent + 1.0;
                let mut poly = vec![[-r, -r], [r, -r], [r, r], [-r, r]];
                let eps = 1e-12 * r;
                for u in &dirs {
                    let (_, q) = self.quantiles(u, threshold)?;
                    poly = clip(&poly, u, q + eps);
                    if poly.is_empty() {
                        return Err(MassError::EmptyRegion);
                    }
                }
                Ok(Region::Polygon(poly))
            }
            n => Err(MassError::Invalid(format!("regions need dimension 1 or 2, got {n}"))),
        }
    }
}

/// Minimum closed half-plane mass through `y`, evaluated on every open arc
/// between consecutive critical directions.
fn atomic_depth_2d(atoms: &[(Vec<f64>, f64)], y: &[f64]) -> f64 {
    let mut angles = Vec::new();
    for (a, _) in atoms {
        let (dx, dy) = (a[0] - y[0], a[1] - y[1]);
        if dx.hypot(dy) > 1e-12 {
            let phi = dy.atan2(dx);
            for t in [phi + PI / 2.0, phi - PI / 2.0] {
                angles.push(t.rem_euclid(2.0 * PI));
            }
        }
    }
    let count = |t: f64| -> f64 {
        let (s, c) = t.sin_cos();
        atoms
            .iter()
            .filter(|(a, _)| (a[0] - y[0]) * c + (a[1] - y[1]) * s >= -TOL_GEO)
            .map(|(_, w)| *w)
            .sum()
    };
    if angles.is_empty() {
        return count(0.0);
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut best = f64::INFINITY;
    for i in 0..angles.len() {
        let a = angles[i];
        let b = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + 2.0 * PI };
        best = best.min(count(0.5 * (a + b)));
    }
    best
}

/// Sutherland-Hodgman clip of a convex polygon by `<y, u> <= q`.
fn clip(poly: &[[f64; 2]], u: &[f64; 2], q: f64) -> Vec<[f64; 2]> {
    let f = |p: &[f64; 2]| p[0] * u[0] + p[1] * u[1] - q;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let n = poly[(i + 1) % poly.len()];
        let (fp, fnx) = (f(&p), f(&n));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fnx > 0.0) || (fp > 0.0 && fnx < 0.0) {
            let t = fp / (fp - fnx);
            out.push([p[0] + t * (n[0] - p[0]), p[1] + t * (n[1] - p[1])]);
        }
    }
    out
}

fn identity_view(m: &FlatMeasure) -> Result<View<'_>> {
    let k = m.carrier().dim();
    if k > 2 {
        return Err(MassError::Invalid(format!("depth needs dimension <= 2, got {k}")));
    }
    Ok(View { m, basis: (0..k).map(|i| unit(k, i)).collect() })
}

/// Tukey depth of `x` (carrier coordinates) in a measure on a flat of dimension <= 2.
pub fn tukey_depth(m: &FlatMeasure, x: &Vector) -> Result<f64> {
    identity_view(m)?.depth(x.as_slice())
}

/// Points of depth at least `threshold`.
pub fn centerpoint_region(m: &FlatMeasure, threshold: f64) -> Result<Region> {
    identity_view(m)?.region(threshold)
}

/// Depth of `y` in the projection of `m` onto the coordinates `basis` (carrier coordinates).
pub fn projected_depth(m: &FlatMeasure, basis: &[Vector], y: &[f64]) -> Result<f64> {
    View { m, basis: basis.to_vec() }.depth(y)
}

/// Centerpoint region of the projection of `m` onto `basis`.
pub fn projected_region(m: &FlatMeasure, basis: &[Vector], threshold: f64) -> Result<Region> {
    View { m, basis: basis.to_vec() }.region(threshold)
}

/// Midpoint of an interval, area centroid of a polygon (vertex average when degenerate).
pub fn region_barycenter(region: &Region) -> Result<Vec<f64>> {
    match region {
        Region::Interval { lo, hi } => Ok(vec![0.5 * (lo + hi)]),
        Region::Polygon(poly) => {
            if poly.is_empty() {
                return Err(MassError::EmptyRegion);
            }
            let n = poly.len();
            let o = poly[0];
            let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
            let mut diam: f64 = 0.0;
            for i in 0..n {
                let p = [poly[i][0] - o[0], poly[i][1] - o[1]];
                let q = [poly[(i + 1) % n][0] - o[0], poly[(i + 1) % n][1] - o[1]];
                diam = diam.max(p[0].hypot(p[1]));
                let cross = p[0] * q[1] - q[0] * p[1];
                a2 += cross;
                cx += (p[0] + q[0]) * cross;
                cy += (p[1] + q[1]) * cross;
            }
            if a2.abs() <= 1e-12 * diam * diam {
                let mx = poly.iter().map(|p| p[0]).sum::<f64>() / n as f64;
                let my = poly.iter().map(|p| p[1]).sum::<f64>() / n as f64;
                return Ok(vec![mx, my]);
            }
            Ok(vec![o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)])
        }
    }
}

/// Common λ-transversal problem for `d - k + λ + 1` assignments on k-flats.
#[derive(Clone, Debug)]
pub struct TransversalProblem {
    d: usize,
    k: usize,
    lambda: usize,
    assignments: Vec<MassAssignment>,
}

impl TransversalProblem {
    pub fn new(d: usize, k: usize, lambda: usize, assignments: Vec<MassAssignment>) -> Result<Self> {
        if !(lambda < k && k <= d) {
            return Err(MassError::Invalid(format!("need lambda < k <= d, got ({d}, {k}, {lambda})")));
        }
        if k - lambda > 2 {
            return Err(MassError::Invalid("only k - lambda <= 2 is supported".into()));
        }
        let want = d - k + lambda + 1;
        if assignments.len() != want {
            return Err(MassError::Invalid(format!("expected {want} assignments, got {}", assignments.len())));
        }
        for a in &assignments {
            if a.ambient_dim() != d || a.dim() != k {
                return Err(MassError::DimensionMismatch { expected: k, found: a.dim() });
            }
            if matches!(a.kind(), MassKind::Custom(_)) {
                return Err(MassError::UnsupportedKind("custom"));
            }
        }
        Ok(TransversalProblem { d, k, lambda, assignments })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn assignments(&self) -> &[MassAssignment] {
        &self.assignments
    }

    /// Frame length `d - λ`.
    pub fn frame_len(&self) -> usize {
        self.d - self.lambda
    }

    /// Block `i` (1-based label) has length `d - i`.
    pub fn block_offset(&self, label: usize) -> usize {
        (1..label).map(|i| self.d - i).sum()
    }

    pub fn residual_len(&self) -> usize {
        self.block_offset(self.frame_len() + 1)
    }

    fn mollified_for_continuity(&self) -> Result<Self> {
        let diam = self.assignments.iter().filter(|a| a.is_discrete()).map(|a| a.diameter()).fold(0.0, f64::max);
        let sigma = 1e-3 * if diam > 0.0 { diam } else { 1.0 };
        let assignments = self
            .assignments
            .iter()
            .map(|a| if a.is_discrete() && a.sigma().is_none() { mollify(a, sigma) } else { Ok(a.clone()) })
            .collect::<Result<_>>()?;
        Ok(TransversalProblem { assignments, ..self.clone() })
    }
}

/// Everything computed while evaluating the map at one frame.
#[derive(Clone, Debug)]
pub struct TransversalEval {
    /// `S_{d-1}, ..., S_k`.
    pub levels: Vec<Flat>,
    pub s_k: Flat,
    /// Basis of `M` in `S_k` coordinates.
    pub m_basis: Vec<Vector>,
    /// Barycenters `p_j` in `M` coordinates.
    pub centers: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub dropped: usize,
}

/// The τ ball sections used to force verticality: unit balls at `e_{d+1-j}`, j = 1..λ.
pub fn tau_balls(d: usize, dim: usize, lambda: usize) -> Result<Vec<MassAssignment>> {
    (1..=lambda).map(|j| MassAssignment::ball_section(dim, unit(d, d - j), 1.0)).collect()
}

fn ball_gap(a: &MassAssignment, plus: &HalfFlat, minus: &HalfFlat) -> Result<f64> {
    Ok(a.evaluate(plus)? - a.evaluate(minus)?)
}

pub fn evaluate_transversal(p: &TransversalProblem, frame: &Frame) -> Result<TransversalEval> {
    let (d, k, lambda) = (p.d, p.k, p.lambda);
    if frame.ambient_dim() != d || frame.len() != p.frame_len() {
        return Err(MassError::DimensionMismatch { expected: p.frame_len(), found: frame.len() });
    }
    let kl = k - lambda;
    let mut residual = vec![0.0; p.residual_len()];
    let mut parent = Flat::whole(d);
    let mut levels = Vec::with_capacity(d - k);
    for i in 1..=d - k {
        let v = frame.vector(kl + i - 1);
        let n = parent.direction_coords(v);
        let len = n.norm();
        if len <= 1e-8 {
            return Err(MassError::DegenerateDirection);
        }
        let (child, plus, minus) = sub_flat(&parent, &(n / len), 0.0)?;
        let off = p.block_offset(kl + i);
        for (j, ball) in tau_balls(d, parent.dim(), lambda)?.iter().enumerate() {
            residual[off + j] = ball_gap(ball, &plus, &minus)?;
        }
        levels.push(child.clone());
        parent = child;
    }
    let s_k = parent;
    let m_basis: Vec<Vector> = (0..kl).map(|i| s_k.direction_coords(frame.vector(i))).collect();
    let mut centers = Vec::with_capacity(p.assignments.len());
    let mut dropped = 0;
    for a in &p.assignments {
        let m = assign(a, &s_k)?;
        dropped += m.dropped();
        let region = projected_region(&m, &m_basis, 1.0 / (kl as f64 + 1.0))?;
        centers.push(region_barycenter(&region)?);
    }
    let last = centers.last().expect("at least one assignment").clone();
    for i in 0..kl {
        let off = p.block_offset(i + 1);
        for (j, c) in centers[..centers.len() - 1].iter().enumerate() {
            residual[off + j] = c[i] - last[i];
        }
    }
    Ok(TransversalEval { levels, s_k, m_basis, centers, residual, dropped })
}

/// The residual map `(x_1, ..., x_{d-λ})`.
pub fn evaluate_transversal_map(p: &TransversalProblem, frame: &Frame) -> Result<Vec<f64>> {
    Ok(evaluate_transversal(p, frame)?.residual)
}

/// Sign action of `signs` (one per frame vector) on a residual of the map.
pub fn transversal_sign_action(p: &TransversalProblem, signs: &[f64], residual: &[f64]) -> Vec<f64> {
    let mut out = residual.to_vec();
    for (i, s) in signs.iter().enumerate() {
        let off = p.block_offset(i + 1);
        for x in &mut out[off..off + p.d - i - 1] {
            *x *= s;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct TransversalSolution {
    pub frame: Frame,
    pub s_k: Flat,
    /// The common λ-transversal.
    pub l: Flat,
    /// Depth of `l` in each assignment's measure on `s_k`.
    pub depths: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub start: usize,
    pub evaluations: usize,
}

/// The λ-flat through the last barycenter orthogonal to the frame, and its depths.
pub fn transversal_from_frame(p: &TransversalProblem, frame: &Frame) -> Result<TransversalSolution> {
    let e = evaluate_transversal(p, frame)?;
    let last = e.centers.last().expect("assignment").clone();
    let mut base = Vector::zeros(p.d);
    for (i, y) in last.iter().enumerate() {
        base.axpy(*y, frame.vector(i), 1.0);
    }
    let l = Flat::new(base, complement_basis(frame.vectors(), p.d))?;
    let mut depths = Vec::with_capacity(p.assignments.len());
    for a in &p.assignments {
        let m = assign(a, &e.s_k)?;
        depths.push(projected_depth(&m, &e.m_basis, &last)?);
    }
    let residual_norm = e.residual.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(TransversalSolution {
        frame: frame.clone(),
        s_k: e.s_k,
        l,
        depths,
        residual: e.residual,
        residual_norm,
        start: 0,
        evaluations: 0,
    })
}

/// Searches for a λ-vertical linear k-flat with a common λ-transversal.
pub fn solve_center_transversal(
    p: &TransversalProblem,
    cfg: &SolverConfig,
) -> std::result::Result<TransversalSolution, SolveError<TransversalSolution>> {
    let problem = if cfg.requires_continuity { p.mollified_for_continuity()? } else { p.clone() };
    let space = StiefelSpace { d: problem.d, m: problem.frame_len() };
    let eval = |f: &Frame| evaluate_transversal_map(&problem, f).ok();
    let best = search_zero(&space, &eval, cfg)
        .ok_or_else(|| MassError::Invalid("no start produced a valid evaluation".into()))?;
    let mut sol = transversal_from_frame(&problem, &best.point)?;
    sol.start = best.start;
    sol.evaluations = best.evaluations;
    let threshold = 1.0 / (problem.k - problem.lambda + 1) as f64;
    let ok = sol.residual_norm <= cfg.target
        && is_k_vertical(&sol.s_k, problem.lambda, 1e-6)
        && sol.depths.iter().all(|&t| t >= threshold - 1e-6);
    if ok {
        Ok(sol)
    } else {
        let residual = sol.residual_norm;
        Err(SolveError::NotConverged { best: Box::new(sol), residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn atoms2(pts: &[[f64; 2]]) -> FlatMeasure {
        let atoms: Vec<(Vector, f64)> = pts.iter().map(|p| (v(p), 1.0)).collect();
        FlatMeasure::from_atoms(Flat::whole(2), &atoms).unwrap()
    }

    #[test]
    fn depth_examples() {
        let sq = atoms2(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]);
        assert_eq!(tukey_depth(&sq, &v(&[0.0, 0.0])).unwrap(), 0.5);
        let one = atoms2(&[[0.3, 0.7]]);
        assert_eq!(tukey_depth(&one, &v(&[0.3, 0.7])).unwrap(), 1.0);
        assert_eq!(tukey_depth(&sq, &v(&[3.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn region_examples() {
        let atoms: Vec<(Vector, f64)> = [0.0, 1.0, 2.0, 5.0].iter().map(|x| (v(&[*x]), 1.0)).collect();
        let m = FlatMeasure::from_atoms(Flat::whole(1), &atoms).unwrap();
        assert_eq!(centerpoint_region(&m, 0.5).unwrap(), Region::Interval { lo: 1.0, hi: 2.0 });
        assert_eq!(region_barycenter(&Region::Interval { lo: 1.0, hi: 2.0 }).unwrap(), vec![1.5]);

        let one = atoms2(&[[0.3, 0.7]]);
        let c = region_barycenter(&centerpoint_region(&one, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(c[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.7, epsilon = 1e-12);

        let tri = atoms2(&[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]]);
        let r = centerpoint_region(&tri, 1.0 / 3.0).unwrap();
        let Region::Polygon(poly) = &r else { panic!() };
        // the centroid satisfies every defining half-plane
        let c = [1.0, 1.0];
        let inside = poly.iter().all(|p| p[0].is_finite()) && tukey_depth(&tri, &v(&c)).unwrap() >= 1.0 / 3.0;
        assert!(inside);
        let sq = Region::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(region_barycenter(&sq).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn direction_table_is_symmetric() {
        let t = direction_table();
        assert_eq!(t.len() % 8, 0);
        for u in &t {
            assert!(t.contains(&[-u[0], u[1]]));
            assert!(t.contains(&[u[1], u[0]]));
        }
    }

    #[test]
    fn empty_region_detected() {
        let m = atoms2(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(centerpoint_region(&m, 0.9).unwrap_err(), MassError::EmptyRegion);
    }

    #[test]
    fn symmetric_balls_give_zero_residual() {
        let ball = MassAssignment::ball_section(2, Vector::zeros(3), 1.0).unwrap();
        let p = TransversalProblem::new(3, 2, 1, vec![ball.clone(), ball.clone(), ball]).unwrap();
        // S_2 = span(e_2, e_3) is 1-vertical; v_1 = e_2, v_2 = e_1
        let frame = Frame::new(vec![unit(3, 1), unit(3, 0)]).unwrap();
        let r = evaluate_transversal_map(&p, &frame).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-14), "{r:?}");
    }
}
