//! Translating cuts through families of lines, moving points and hyperplanes.
//!
//! All three solvers search a sphere times a compactified interval. Member
//! coordinates are evaluated after multiplying by `1 - |tau|`, so every
//! member law stays bounded and at `|tau| = 1` it is exactly the member's
//! speed law. Residual components are closed-side mass differences of the
//! normalized families (total mass 1 each).

use std::fmt;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{MassError, Result, SolveError};
use crate::geom::{complement_basis, leading_sign, unit, Flat, Vector, TOL_RANK};
use crate::masses::{
    mass_ge, mass_le, median_1d, mollify, Law1d, MassAssignment, WeightedHyperplane, WeightedLine,
};
use crate::search::{local_search, search_zero, SliceParam, SliceSpace, SolverConfig};

/// Parameters with `|tau|` at least this close to 1 are reported as boundary outcomes.
pub const BOUNDARY_TAU: f64 = 1.0 - 1e-6;

fn check_weight(w: f64) -> Result<()> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(MassError::Invalid(format!("weights must be positive, got {w}")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(MassError::Invalid("sigma must be positive".into()));
    }
    Ok(())
}

fn unit_or_err(v: &Vector) -> Result<Vector> {
    let n = v.norm();
    if !(n > TOL_RANK) {
        return Err(MassError::DegenerateDirection);
    }
    Ok(v / n)
}

fn check_horizontal(v: &Vector) -> Result<()> {
    let d = v.len();
    if d == 0 || v[d - 1].abs() > 1e-12 || (v.norm() - 1.0).abs() > 1e-9 {
        return Err(MassError::Invalid("direction must be a unit vector orthogonal to e_d".into()));
    }
    Ok(())
}

/// Finite weighted family of lines with an optional direction jitter.
#[derive(Clone, Debug, PartialEq)]
pub struct LineFamilyMeasure {
    lines: Vec<WeightedLine>,
    sigma: Option<f64>,
}

impl LineFamilyMeasure {
    pub fn new(lines: Vec<WeightedLine>) -> Result<Self> {
        let d = lines.first().map(|l| l.point.len()).ok_or(MassError::ZeroMass)?;
        let mut out = Vec::with_capacity(lines.len());
        for l in lines {
            check_weight(l.weight)?;
            if l.point.len() != d || l.direction.len() != d {
                return Err(MassError::DimensionMismatch { expected: d, found: l.point.len() });
            }
            out.push(WeightedLine { direction: unit_or_err(&l.direction)?, ..l });
        }
        Ok(LineFamilyMeasure { lines: out, sigma: None })
    }

    pub fn mollified(mut self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn lines(&self) -> &[WeightedLine] {
        &self.lines
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn ambient_dim(&self) -> usize {
        self.lines[0].point.len()
    }

    /// The induced assignment on hyperplanes.
    pub fn assignment(&self) -> Result<MassAssignment> {
        let a = MassAssignment::line_family(self.ambient_dim(), self.lines.clone())?;
        match self.sigma {
            Some(s) => mollify(&a, s),
            None => Ok(a),
        }
    }

    /// Laws of the scaled heights on `H_{v, tau/(1-tau)}`, and the dropped count.
    fn slice_laws(&self, v: &Vector, tau: f64) -> (Vec<(Law1d, f64)>, usize) {
        let d = self.ambient_dim();
        let s = 1.0 - tau;
        let mut out = Vec::with_capacity(self.lines.len());
        let mut dropped = 0;
        for l in &self.lines {
            let (a, n) = (&l.point, &l.direction);
            let c = n.dot(v);
            let k = tau - s * a.dot(v);
            match self.sigma {
                None => {
                    if c.abs() <= TOL_RANK {
                        dropped += 1;
                        continue;
                    }
                    out.push((Law1d::Point(s * a[d - 1] + k * n[d - 1] / c), l.weight));
                }
                Some(sg) => {
                    let s2 = sg * sg;
                    let law = Law1d::Ratio {
                        num: s * a[d - 1] * c + k * n[d - 1],
                        den: c,
                        var_num: s2 * (s * s * a[d - 1] * a[d - 1] + k * k),
                        cov: s2 * s * a[d - 1],
                        var_den: s2,
                    };
                    out.push((law, l.weight));
                }
            }
        }
        (out, dropped)
    }
}

/// A weighted point moving at constant velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingPoint {
    pub position: Vector,
    pub velocity: Vector,
    pub weight: f64,
}

/// Finite weighted family of moving points. With `sigma`, both position and
/// velocity carry independent isotropic Gaussian jitter of that scale.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingFamily {
    members: Vec<MovingPoint>,
    sigma: Option<f64>,
}

impl MovingFamily {
    pub fn new(members: Vec<MovingPoint>) -> Result<Self> {
        let d = members.first().map(|m| m.position.len()).ok_or(MassError::ZeroMass)?;
        for m in &members {
            check_weight(m.weight)?;
            if m.position.len() != d || m.velocity.len() != d {
                return Err(MassError::DimensionMismatch { expected: d, found: m.position.len() });
            }
        }
        Ok(MovingFamily { members, sigma: None })
    }

    pub fn mollified(mut self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn members(&self) -> &[MovingPoint] {
        &self.members
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn ambient_dim(&self) -> usize {
        self.members[0].position.len()
    }

    /// Largest coordinate extent of positions and velocities.
    pub fn diameter(&self) -> f64 {
        let mut r: f64 = 0.0;
        for m in &self.members {
            r = r.max(m.position.amax()).max(m.velocity.amax());
        }
        2.0 * r
    }

    /// The family frozen at time `t` as a point-cloud assignment on `R^d`.
    pub fn snapshot(&self, t: f64) -> Result<MassAssignment> {
        let d = self.ambient_dim();
        let pts = self
            .members
            .iter()
            .map(|m| crate::masses::WeightedPoint { point: &m.position + &m.velocity * t, weight: m.weight })
            .collect();
        let a = MassAssignment::projected_cloud(d, d, pts)?;
        match self.sigma {
            Some(s) => mollify(&a, s * (1.0 + t * t).sqrt()),
            None => Ok(a),
        }
    }

    fn slice_laws(&self, v: &Vector, tau: f64) -> Vec<(Law1d, f64)> {
        let s = 1.0 - tau.abs();
        self.members
            .iter()
            .map(|m| {
                let x = s * m.position.dot(v) + tau * m.velocity.dot(v);
                let law = match self.sigma {
                    None => Law1d::Point(x),
                    Some(sg) => Law1d::Gauss { mean: x, sd: sg * (s * s + tau * tau).sqrt() },
                };
                (law, m.weight)
            })
            .collect()
    }
}

/// Finite weighted family of hyperplanes `<n, x> = offset` with an optional normal jitter.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperplaneFamilyMeasure {
    planes: Vec<WeightedHyperplane>,
    sigma: Option<f64>,
}

impl HyperplaneFamilyMeasure {
    pub fn new(planes: Vec<WeightedHyperplane>) -> Result<Self> {
        let d = planes.first().map(|h| h.normal.len()).ok_or(MassError::ZeroMass)?;
        let mut out = Vec::with_capacity(planes.len());
        for h in planes {
            check_weight(h.weight)?;
            if h.normal.len() != d {
                return Err(MassError::DimensionMismatch { expected: d, found: h.normal.len() });
            }
            let len = h.normal.norm();
            let normal = unit_or_err(&h.normal)?;
            out.push(WeightedHyperplane { normal, offset: h.offset / len, weight: h.weight });
        }
        Ok(HyperplaneFamilyMeasure { planes: out, sigma: None })
    }

    pub fn mollified(mut self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn planes(&self) -> &[WeightedHyperplane] {
        &self.planes
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn ambient_dim(&self) -> usize {
        self.planes[0].normal.len()
    }

    /// The induced assignment on lines.
    pub fn assignment(&self) -> Result<MassAssignment> {
        let a = MassAssignment::hyperplane_family(self.ambient_dim(), self.planes.clone())?;
        match self.sigma {
            Some(s) => mollify(&a, s),
            None => Ok(a),
        }
    }

    /// Laws of the scaled heights on `span(e_d) + tau/(1-tau) v`, and the dropped count.
    fn slice_laws(&self, v: &Vector, tau: f64) -> (Vec<(Law1d, f64)>, usize) {
        let d = self.ambient_dim();
        let s = 1.0 - tau;
        let mut out = Vec::with_capacity(self.planes.len());
        let mut dropped = 0;
        for h in &self.planes {
            let n = &h.normal;
            match self.sigma {
                None => {
                    if n[d - 1].abs() <= TOL_RANK {
                        dropped += 1;
                        continue;
                    }
                    out.push((Law1d::Point((s * h.offset - tau * n.dot(v)) / n[d - 1]), h.weight));
                }
                Some(sg) => {
                    let q = n * (s * h.offset) - v * tau;
                    let s2 = sg * sg;
                    let law = Law1d::Ratio {
                        num: n.dot(&q),
                        den: n[d - 1],
                        var_num: s2 * q.norm_squared(),
                        cov: s2 * q[d - 1],
                        var_den: s2,
                    };
                    out.push((law, h.weight));
                }
            }
        }
        (out, dropped)
    }
}

/// Vertical speed of the hit point of `line` on `H_{v, lambda}` as `lambda` grows.
pub fn vertical_speed(line: &WeightedLine, v: &Vector) -> Result<f64> {
    check_horizontal(v)?;
    let n = unit_or_err(&line.direction)?;
    let c = n.dot(v);
    if c.abs() <= TOL_RANK {
        return Err(MassError::OrthogonalLine);
    }
    Ok(n[n.len() - 1] / c)
}

/// Vertical speed of the hit point of `h` on `span(e_d)` translated along `v`.
pub fn hyperplane_speed(h: &WeightedHyperplane, v: &Vector) -> Result<f64> {
    check_horizontal(v)?;
    let n = unit_or_err(&h.normal)?;
    let nd = n[n.len() - 1];
    if nd.abs() <= TOL_RANK {
        return Err(MassError::VerticalNormalDegenerate);
    }
    Ok(-n.dot(v) / nd)
}

/// Families whose members have a speed in every admissible direction.
pub trait SpeedFamily {
    /// Per-member speed laws in direction `v`, and the number of dropped members.
    fn speed_laws(&self, v: &Vector) -> (Vec<(Law1d, f64)>, usize);
}

impl SpeedFamily for LineFamilyMeasure {
    fn speed_laws(&self, v: &Vector) -> (Vec<(Law1d, f64)>, usize) {
        self.slice_laws(v, 1.0)
    }
}

impl SpeedFamily for MovingFamily {
    fn speed_laws(&self, v: &Vector) -> (Vec<(Law1d, f64)>, usize) {
        (self.slice_laws(v, 1.0), 0)
    }
}

impl SpeedFamily for HyperplaneFamilyMeasure {
    fn speed_laws(&self, v: &Vector) -> (Vec<(Law1d, f64)>, usize) {
        self.slice_laws(v, 1.0)
    }
}

/// Median speed by the midpoint rule; exactly antisymmetric in `v`.
pub fn median_speed<F: SpeedFamily + ?Sized>(family: &F, v: &Vector) -> Result<f64> {
    let s = leading_sign(v);
    let (laws, dropped) = family.speed_laws(&(v * s));
    if dropped > 0 {
        warn!("median speed: dropped {dropped} degenerate members");
    }
    Ok(s * median_1d(&laws)?)
}

fn total(laws: &[(Law1d, f64)]) -> Result<f64> {
    let w: f64 = laws.iter().map(|(_, w)| w).sum();
    if !(w > 0.0) {
        return Err(MassError::ZeroMass);
    }
    Ok(w)
}

/// `(mass >= c) - (mass <= c)` over total mass.
fn side_gap(laws: &[(Law1d, f64)], c: f64) -> Result<f64> {
    let w = total(laws)?;
    Ok((mass_ge(laws, c) - mass_le(laws, c)) / w)
}

/// Pivot median and normalized gaps of the others.
fn pivot_gaps(pivot: &[(Law1d, f64)], others: &[Vec<(Law1d, f64)>]) -> Result<(f64, Vec<f64>)> {
    total(pivot)?;
    let m = median_1d(pivot)?;
    let gaps = others.iter().map(|l| side_gap(l, m)).collect::<Result<_>>()?;
    Ok((m, gaps))
}

fn embed_horizontal(d: usize, v: &Vector) -> Vector {
    let mut out = Vector::zeros(d);
    out.rows_mut(0, d - 1).copy_from(v);
    out
}

fn check_tau(tau: f64, lo: f64) -> Result<()> {
    if !(lo..=1.0).contains(&tau) {
        return Err(MassError::Invalid(format!("tau {tau} outside [{lo}, 1]")));
    }
    Ok(())
}

/// Residual of the horizontal-cut map at `(v, tau)` with `v` orthogonal to `e_d`.
///
/// The last family is the pivot; the residual lists the gaps of all other families.
pub fn horizontal_map(families: &[LineFamilyMeasure], v: &Vector, tau: f64) -> Result<Vec<f64>> {
    Ok(horizontal_eval(families, v, tau)?.residual)
}

struct SliceEval {
    residual: Vec<f64>,
    /// Scaled pivot median.
    median: f64,
    dropped: usize,
}

fn horizontal_eval(families: &[LineFamilyMeasure], v: &Vector, tau: f64) -> Result<SliceEval> {
    check_horizontal(v)?;
    check_tau(tau, 0.0)?;
    let mut dropped = 0;
    let mut laws = Vec::with_capacity(families.len());
    for f in families {
        let (l, k) = f.slice_laws(v, tau);
        dropped += k;
        laws.push(l);
    }
    let (pivot, others) = laws.split_last().ok_or(MassError::ZeroMass)?;
    let (median, residual) = pivot_gaps(pivot, others)?;
    Ok(SliceEval { residual, median, dropped })
}

/// Residual of the translated-line map at `(v, tau)`; the last family is the pivot.
pub fn translated_line_map(families: &[HyperplaneFamilyMeasure], v: &Vector, tau: f64) -> Result<Vec<f64>> {
    Ok(translated_eval(families, v, tau)?.residual)
}

fn translated_eval(families: &[HyperplaneFamilyMeasure], v: &Vector, tau: f64) -> Result<SliceEval> {
    check_horizontal(v)?;
    check_tau(tau, 0.0)?;
    let mut dropped = 0;
    let mut laws = Vec::with_capacity(families.len());
    for f in families {
        let (l, k) = f.slice_laws(v, tau);
        dropped += k;
        laws.push(l);
    }
    let (pivot, others) = laws.split_last().ok_or(MassError::ZeroMass)?;
    let (median, residual) = pivot_gaps(pivot, others)?;
    Ok(SliceEval { residual, median, dropped })
}

/// Residual of the dynamic map at `(v, tau)`, `tau` in `[-1, 1]`; the first family is the pivot.
///
/// Exactly odd in `v`.
pub fn dynamic_map(families: &[MovingFamily], v: &Vector, tau: f64) -> Result<Vec<f64>> {
    Ok(dynamic_eval(families, v, tau)?.residual)
}

fn dynamic_eval(families: &[MovingFamily], v: &Vector, tau: f64) -> Result<SliceEval> {
    check_tau(tau, -1.0)?;
    let v = unit_or_err(v)?;
    let sg = leading_sign(&v);
    let vc = &v * sg;
    let laws: Vec<_> = families.iter().map(|f| f.slice_laws(&vc, tau)).collect();
    let (pivot, others) = laws.split_first().ok_or(MassError::ZeroMass)?;
    let (median, residual) = pivot_gaps(pivot, others)?;
    Ok(SliceEval {
        residual: residual.into_iter().map(|x| sg * x).collect(),
        median: sg * median,
        dropped: 0,
    })
}

/// Vertical hyperplane `<x, v> = lambda`, with a basis whose last vector is `e_d`.
pub fn vertical_hyperplane(v: &Vector, lambda: f64) -> Result<Flat> {
    let d = v.len();
    let ed = unit(d, d - 1);
    let mut basis = complement_basis(&[v.clone(), ed.clone()], d);
    basis.push(ed);
    Flat::new(v * lambda, basis)
}

#[derive(Clone, Debug, PartialEq)]
pub enum HorizontalOutcome {
    /// `S_{d-1} = H_{v, lambda}` and `S_{d-2}` its horizontal slice at `height`.
    Interior { v: Vector, tau: f64, lambda: f64, s_dm1: Flat, s_dm2: Flat, height: f64 },
    /// All families share a median vertical speed in direction `v`.
    Boundary { v: Vector, median_speeds: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct HorizontalSolution {
    pub outcome: HorizontalOutcome,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub dropped: usize,
    pub start: usize,
    pub evaluations: usize,
}

/// Pairwise median-speed gaps against the last entry.
pub fn speed_gaps(speeds: &[f64]) -> Vec<f64> {
    let last = *speeds.last().unwrap_or(&0.0);
    speeds[..speeds.len().saturating_sub(1)].iter().map(|m| m - last).collect()
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Refines a boundary direction so that the median speeds themselves agree.
fn polish_boundary<G>(n: usize, v: &Vector, speeds: &G, cfg: &SolverConfig) -> Vector
where
    G: Fn(&Vector) -> Option<Vec<f64>> + Sync,
{
    let space = SliceSpace { n: n + 1, tau_lo: 1.0, tau_hi: 1.0 };
    let eval = |p: &SliceParam| speeds(&p.v.rows(0, n).into_owned()).map(|s| speed_gaps(&s));
    let start = SliceParam { v: Vector::from_iterator(n + 1, v.iter().copied().chain([0.0])), tau: 1.0 };
    let fine = SolverConfig { target: cfg.target * 1e-3, ..cfg.clone() };
    let c = local_search(&space, &eval, start, 0, &fine);
    let out = c.point.v.rows(0, n).into_owned();
    out.normalize()
}

fn mollify_lines(families: &[LineFamilyMeasure]) -> Result<Vec<LineFamilyMeasure>> {
    families.iter().map(|f| if f.sigma.is_none() { f.clone().mollified(1e-3) } else { Ok(f.clone()) }).collect()
}

/// Searches `S^{d-2} x [0, 1]` for a vertical hyperplane and horizontal cut
/// bisecting all `d` line families, or a shared median speed.
pub fn horizontal_solve(
    families: &[LineFamilyMeasure],
    cfg: &SolverConfig,
) -> std::result::Result<HorizontalSolution, SolveError<HorizontalSolution>> {
    let d = families.first().map(|f| f.ambient_dim()).ok_or(MassError::ZeroMass)?;
    if d < 2 || families.len() != d || families.iter().any(|f| f.ambient_dim() != d) {
        return Err(MassError::Invalid(format!("need d >= 2 families of lines in R^{d}")).into());
    }
    let families = if cfg.requires_continuity { mollify_lines(families)? } else { families.to_vec() };
    let space = SliceSpace { n: d - 1, tau_lo: 0.0, tau_hi: 1.0 };
    let eval = |p: &SliceParam| horizontal_map(&families, &embed_horizontal(d, &p.v), p.tau).ok();
    let best = search_zero(&space, &eval, cfg)
        .ok_or_else(|| MassError::Invalid("no start produced a valid evaluation".into()))?;
    let v = embed_horizontal(d, &best.point.v);
    let tau = best.point.tau;
    let e = horizontal_eval(&families, &v, tau)?;
    if e.dropped > 0 {
        warn!("horizontal cut: dropped {} lines orthogonal to v", e.dropped);
    }
    let outcome = if tau >= BOUNDARY_TAU {
        let speeds = |u: &Vector| -> Option<Vec<f64>> {
            let u = embed_horizontal(d, &u.normalize());
            families.iter().map(|f| median_speed(f, &u).ok()).collect()
        };
        let v = if norm(&e.residual) <= cfg.target {
            embed_horizontal(d, &polish_boundary(d - 1, &best.point.v, &speeds, cfg))
        } else {
            v
        };
        let median_speeds = families.iter().map(|f| median_speed(f, &v)).collect::<Result<_>>()?;
        HorizontalOutcome::Boundary { v, median_speeds }
    } else {
        let lambda = tau / (1.0 - tau);
        let height = e.median / (1.0 - tau);
        let s_dm1 = vertical_hyperplane(&v, lambda)?;
        let base = &v * lambda + unit(d, d - 1) * height;
        let s_dm2 = Flat::new(base, complement_basis(&[v.clone(), unit(d, d - 1)], d))?;
        HorizontalOutcome::Interior { v, tau, lambda, s_dm1, s_dm2, height }
    };
    let residual_norm = norm(&e.residual);
    let sol = HorizontalSolution {
        outcome,
        residual: e.residual,
        residual_norm,
        dropped: e.dropped,
        start: best.start,
        evaluations: best.evaluations,
    };
    finish(sol, residual_norm, cfg)
}

fn finish<T: fmt::Debug>(sol: T, residual: f64, cfg: &SolverConfig) -> std::result::Result<T, SolveError<T>> {
    if residual <= cfg.target {
        Ok(sol)
    } else {
        Err(SolveError::NotConverged { best: Box::new(sol), residual })
    }
}

/// Raised when the dynamic solver runs in even dimension, where a zero need not exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParityWarning {
    pub d: usize,
}

impl fmt::Display for ParityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d = {} is even: a common bisecting hyperplane is not guaranteed", self.d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DynamicOutcome {
    /// At time `t` the hyperplane `<x, v> = offset` bisects every family.
    Interior { v: Vector, tau: f64, t: f64, offset: f64 },
    /// All families share a median speed in direction `v`.
    Boundary { v: Vector, median_speeds: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct DynamicSolution {
    pub outcome: DynamicOutcome,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub warnings: Vec<ParityWarning>,
    pub start: usize,
    pub evaluations: usize,
}

/// Searches `S^{d-1} x [-1, 1]` for a time and hyperplane bisecting all `d + 1`
/// moving families, or a shared median speed.
pub fn dynamic_solve(
    families: &[MovingFamily],
    cfg: &SolverConfig,
) -> std::result::Result<DynamicSolution, SolveError<DynamicSolution>> {
    let d = families.first().map(|f| f.ambient_dim()).ok_or(MassError::ZeroMass)?;
    if families.len() != d + 1 || families.iter().any(|f| f.ambient_dim() != d) {
        return Err(MassError::Invalid(format!("need {} moving families in R^{d}", d + 1)).into());
    }
    let warnings = if d % 2 == 0 {
        let w = ParityWarning { d };
        warn!("{w}");
        vec![w]
    } else {
        Vec::new()
    };
    let families: Vec<MovingFamily> = if cfg.requires_continuity {
        let diam = families.iter().map(|f| f.diameter()).fold(0.0, f64::max);
        let sigma = 1e-3 * if diam > 0.0 { diam } else { 1.0 };
        families
            .iter()
            .map(|f| if f.sigma.is_none() { f.clone().mollified(sigma) } else { Ok(f.clone()) })
            .collect::<Result<_>>()?
    } else {
        families.to_vec()
    };
    let space = SliceSpace { n: d, tau_lo: -1.0, tau_hi: 1.0 };
    let eval = |p: &SliceParam| dynamic_map(&families, &p.v, p.tau).ok();
    let best = search_zero(&space, &eval, cfg)
        .ok_or_else(|| MassError::Invalid("no start produced a valid evaluation".into()))?;
    let (mut v, tau) = (best.point.v.clone(), best.point.tau);
    let e = dynamic_eval(&families, &v, tau)?;
    let outcome = if tau.abs() >= BOUNDARY_TAU {
        let speeds = |u: &Vector| -> Option<Vec<f64>> {
            let u = u.normalize();
            let mut s: Vec<f64> = families.iter().map(|f| median_speed(f, &u).ok()).collect::<Option<_>>()?;
            s.rotate_left(1);
            Some(s)
        };
        if norm(&e.residual) <= cfg.target && d >= 2 {
            v = polish_boundary(d, &v, &speeds, cfg);
        }
        let median_speeds = families.iter().map(|f| median_speed(f, &v)).collect::<Result<_>>()?;
        DynamicOutcome::Boundary { v, median_speeds }
    } else {
        let s = 1.0 - tau.abs();
        DynamicOutcome::Interior { v, tau, t: tau / s, offset: e.median / s }
    };
    let residual_norm = norm(&e.residual);
    let sol = DynamicSolution {
        outcome,
        residual: e.residual,
        residual_norm,
        warnings,
        start: best.start,
        evaluations: best.evaluations,
    };
    finish(sol, residual_norm, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TranslatedOutcome {
    /// The line `span(e_d) + shift` is split at `height`.
    Interior { v: Vector, tau: f64, shift: Vector, line: Flat, height: f64 },
    /// All families share a median vertical speed in direction `v`.
    Boundary { v: Vector, median_speeds: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct TranslatedSolution {
    pub outcome: TranslatedOutcome,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub dropped: usize,
    pub start: usize,
    pub evaluations: usize,
}

/// Searches `S^{d-2} x [0, 1]` for a translate of `span(e_d)` and a point on it
/// bisecting all `d` hyperplane families, or a shared median speed.
pub fn translated_line_solve(
    families: &[HyperplaneFamilyMeasure],
    cfg: &SolverConfig,
) -> std::result::Result<TranslatedSolution, SolveError<TranslatedSolution>> {
    let d = families.first().map(|f| f.ambient_dim()).ok_or(MassError::ZeroMass)?;
    if d < 2 || families.len() != d || families.iter().any(|f| f.ambient_dim() != d) {
        return Err(MassError::Invalid(format!("need d >= 2 hyperplane families in R^{d}")).into());
    }
    let families: Vec<HyperplaneFamilyMeasure> = if cfg.requires_continuity {
        families
            .iter()
            .map(|f| if f.sigma.is_none() { f.clone().mollified(1e-3) } else { Ok(f.clone()) })
            .collect::<Result<_>>()?
    } else {
        families.to_vec()
    };
    let space = SliceSpace { n: d - 1, tau_lo: 0.0, tau_hi: 1.0 };
    let eval = |p: &SliceParam| translated_line_map(&families, &embed_horizontal(d, &p.v), p.tau).ok();
    let best = search_zero(&space, &eval, cfg)
        .ok_or_else(|| MassError::Invalid("no start produced a valid evaluation".into()))?;
    let v = embed_horizontal(d, &best.point.v);
    let tau = best.point.tau;
    let e = translated_eval(&families, &v, tau)?;
    if e.dropped > 0 {
        warn!("translated line: dropped {} hyperplanes with horizontal normals", e.dropped);
    }
    let outcome = if tau >= BOUNDARY_TAU {
        let speeds = |u: &Vector| -> Option<Vec<f64>> {
            let u = embed_horizontal(d, &u.normalize());
            families.iter().map(|f| median_speed(f, &u).ok()).collect()
        };
        let v = if norm(&e.residual) <= cfg.target {
            embed_horizontal(d, &polish_boundary(d - 1, &best.point.v, &speeds, cfg))
        } else {
            v
        };
        let median_speeds = families.iter().map(|f| median_speed(f, &v)).collect::<Result<_>>()?;
        TranslatedOutcome::Boundary { v, median_speeds }
    } else {
        let shift = &v * (tau / (1.0 - tau));
        let line = Flat::new(shift.clone(), vec![unit(d, d - 1)])?;
        TranslatedOutcome::Interior { v, tau, shift, line, height: e.median / (1.0 - tau) }
    };
    let residual_norm = norm(&e.residual);
    let sol = TranslatedSolution {
        outcome,
        residual: e.residual,
        residual_norm,
        dropped: e.dropped,
        start: best.start,
        evaluations: best.evaluations,
    };
    finish(sol, residual_norm, cfg)
}

/// `det(A(t))` in closed form: `(1-t)^{d+1} + (-1)^d t^{d+1}`.
pub fn parity_det_closed(d: usize, t: f64) -> f64 {
    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
    (1.0 - t).powi(d as i32 + 1) + sign * t.powi(d as i32 + 1)
}

/// The `(d+1) x (d+1)` matrix whose column `i` is the position of point `i` at time `t`.
pub fn parity_matrix(d: usize, t: f64) -> DMatrix<f64> {
    let n = d + 1;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] += 1.0 - t;
        a[((i + 1) % n, i)] += t;
    }
    a
}

/// `det(A(t))` by LU factorization.
pub fn parity_det_direct(d: usize, t: f64) -> f64 {
    parity_matrix(d, t).determinant()
}

/// Evaluates `det(A(t))` both ways for a fixed dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetChecker {
    pub d: usize,
}

impl DetChecker {
    pub fn closed(&self, t: f64) -> f64 {
        parity_det_closed(self.d, t)
    }

    pub fn direct(&self, t: f64) -> f64 {
        parity_det_direct(self.d, t)
    }

    pub fn check(&self, t: f64) -> (f64, f64) {
        (self.closed(t), self.direct(t))
    }
}

/// Orthonormal basis of `{x in R^{d+1} : sum x_i = 0}`.
fn simplex_plane_basis(d: usize) -> Vec<Vector> {
    let n = d + 1;
    let ones = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    complement_basis(&[ones], n)
}

/// Single-point moving families `(e_i, e_{i+1} - e_i)` on the hyperplane
/// `sum x_i = 1` of `R^{d+1}`, written in orthonormal coordinates of that
/// hyperplane centered at its barycenter; plus the determinant checker.
pub fn parity_counterexample(d: usize) -> Result<(Vec<MovingFamily>, DetChecker)> {
    if d % 2 == 1 {
        return Err(MassError::OddDimension(d));
    }
    if d == 0 {
        return Err(MassError::Invalid("d must be at least 2".into()));
    }
    let n = d + 1;
    let basis = simplex_plane_basis(d);
    let center = Vector::from_element(n, 1.0 / n as f64);
    let mut families = Vec::with_capacity(n);
    for i in 0..n {
        let p = unit(n, i);
        let w = unit(n, (i + 1) % n) - &p;
        let rel = &p - &center;
        let position = Vector::from_iterator(d, basis.iter().map(|b| b.dot(&rel)));
        let velocity = Vector::from_iterator(d, basis.iter().map(|b| b.dot(&w)));
        families.push(MovingFamily::new(vec![MovingPoint { position, velocity, weight: 1.0 }])?);
    }
    Ok((families, DetChecker { d }))
}

/// Three moving points in the plane that are never collinear, each blurred by `sigma`.
pub fn fig5_instance(sigma: f64) -> Result<Vec<MovingFamily>> {
    parity_counterexample(2)?.0.into_iter().map(|f| f.mollified(sigma)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::HalfFlat;
    use crate::masses::assign;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn line(p: &[f64], dir: &[f64]) -> WeightedLine {
        WeightedLine { point: v(p), direction: v(dir), weight: 1.0 }
    }

    #[test]
    fn speed_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let l = line(&[0.0, 0.0, 0.0], &[r, 0.0, r]);
        assert_abs_diff_eq!(vertical_speed(&l, &v(&[1.0, 0.0, 0.0])).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vertical_speed(&l, &v(&[-1.0, 0.0, 0.0])).unwrap(), -1.0, epsilon = 1e-15);
        let flat = line(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(vertical_speed(&flat, &v(&[1.0, 0.0, 0.0])).unwrap(), 0.0);
        let perp = line(&[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(vertical_speed(&perp, &v(&[1.0, 0.0, 0.0])).unwrap_err(), MassError::OrthogonalLine);

        let h = WeightedHyperplane { normal: v(&[r, 0.0, r]), offset: 0.0, weight: 1.0 };
        assert_abs_diff_eq!(hyperplane_speed(&h, &v(&[1.0, 0.0, 0.0])).unwrap(), -1.0, epsilon = 1e-15);
        let flat = WeightedHyperplane { normal: v(&[0.0, 0.0, 1.0]), offset: 2.0, weight: 1.0 };
        assert_eq!(hyperplane_speed(&flat, &v(&[0.0, 1.0, 0.0])).unwrap(), 0.0);
        let vert = WeightedHyperplane { normal: v(&[1.0, 0.0, 0.0]), offset: 0.0, weight: 1.0 };
        assert_eq!(
            hyperplane_speed(&vert, &v(&[1.0, 0.0, 0.0])).unwrap_err(),
            MassError::VerticalNormalDegenerate
        );
    }

    fn movers(speeds: &[f64]) -> MovingFamily {
        MovingFamily::new(
            speeds
                .iter()
                .map(|s| MovingPoint { position: v(&[0.0, 0.0]), velocity: v(&[*s, 0.0]), weight: 1.0 })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn median_speed_examples() {
        let e1 = v(&[1.0, 0.0]);
        assert_eq!(median_speed(&movers(&[-1.0, 1.0]), &e1).unwrap(), 0.0);
        assert_eq!(median_speed(&movers(&[0.0, 1.0, 2.0, 5.0]), &e1).unwrap(), 1.5);
        assert_eq!(median_speed(&movers(&[0.0, 1.0, 2.0, 5.0]), &-e1).unwrap(), -1.5);
    }

    #[test]
    fn det_identity_examples() {
        assert_abs_diff_eq!(parity_det_closed(2, 0.5), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(parity_det_direct(2, 0.5), 0.25, epsilon = 1e-14);
        for d in [2, 4, 6] {
            assert_eq!(parity_det_closed(d, 0.0), 1.0);
        }
        assert_eq!(parity_counterexample(3).unwrap_err(), MassError::OddDimension(3));
    }

    #[test]
    fn parity_points_lie_on_moving_triangle() {
        let (fams, _) = parity_counterexample(2).unwrap();
        // pairwise distances of the embedded points match those in R^3
        let p: Vec<Vector> = fams.iter().map(|f| f.members()[0].position.clone()).collect();
        for i in 0..3 {
            assert_abs_diff_eq!((&p[i] - &p[(i + 1) % 3]).norm(), 2f64.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetric_line_families_bisected_at_axis() {
        // each family is symmetric under x -> -x and z -> -z
        let fam = |a: f64, b: f64| {
            LineFamilyMeasure::new(vec![
                line(&[a, b, 0.3], &[1.0, 0.2, 0.5]),
                line(&[-a, b, -0.3], &[1.0, -0.2, 0.5]),
                line(&[a, -b, -0.3], &[-1.0, 0.2, 0.5]),
                line(&[-a, -b, 0.3], &[-1.0, -0.2, 0.5]),
            ])
            .unwrap()
        };
        let fams = vec![fam(1.0, 0.5), fam(0.4, 2.0), fam(2.0, 1.0)];
        let r = horizontal_map(&fams, &v(&[1.0, 0.0, 0.0]), 0.0).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-15), "{r:?}");
        let mol: Vec<_> = fams.iter().map(|f| f.clone().mollified(0.05).unwrap()).collect();
        let r = horizontal_map(&mol, &v(&[1.0, 0.0, 0.0]), 0.0).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn slice_laws_match_assignment_on_the_flat() {
        let fam = LineFamilyMeasure::new(vec![
            line(&[0.1, 0.3, -0.2], &[0.8, 0.1, 0.6]),
            line(&[-0.7, 0.2, 0.5], &[0.3, -0.9, 0.2]),
            line(&[0.4, -0.6, 0.1], &[0.5, 0.5, -0.7]),
        ])
        .unwrap()
        .mollified(0.1)
        .unwrap();
        let u = v(&[0.6, 0.8, 0.0]);
        for tau in [0.0, 0.3, 0.8] {
            let lambda = tau / (1.0 - tau);
            let flat = vertical_hyperplane(&u, lambda).unwrap();
            let m = assign(&fam.assignment().unwrap(), &flat).unwrap();
            let (laws, _) = fam.slice_laws(&u, tau);
            let o = flat.direction_coords(&unit(3, 2));
            for h in [-0.5, 0.0, 0.4] {
                let direct = m.mass_ge_along(&o, h - flat.base()[2]).unwrap();
                assert_abs_diff_eq!(mass_ge(&laws, (1.0 - tau) * h), direct, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn hyperplane_laws_match_assignment_on_the_line() {
        let fam = HyperplaneFamilyMeasure::new(vec![
            WeightedHyperplane { normal: v(&[0.3, 0.2, 0.9]), offset: 0.4, weight: 1.0 },
            WeightedHyperplane { normal: v(&[-0.5, 0.4, 0.7]), offset: -0.2, weight: 2.0 },
        ])
        .unwrap()
        .mollified(0.1)
        .unwrap();
        let u = v(&[0.0, 1.0, 0.0]);
        for tau in [0.0, 0.5, 0.9] {
            let shift = &u * (tau / (1.0 - tau));
            let l = Flat::new(shift, vec![unit(3, 2)]).unwrap();
            let m = assign(&fam.assignment().unwrap(), &l).unwrap();
            let (laws, _) = fam.slice_laws(&u, tau);
            let o = l.direction_coords(&unit(3, 2));
            for h in [-0.5, 0.0, 0.4] {
                let direct = m.mass_ge_along(&o, h - l.base()[2]).unwrap();
                assert_abs_diff_eq!(mass_ge(&laws, (1.0 - tau) * h), direct, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dynamic_map_is_odd_and_flips_at_the_ends() {
        let fams = fig5_instance(0.05).unwrap();
        let u = v(&[0.6, -0.8]);
        for tau in [-1.0, -0.4, 0.0, 0.7, 1.0] {
            let a = dynamic_map(&fams, &u, tau).unwrap();
            let b = dynamic_map(&fams, &-&u, tau).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(*x, -*y);
            }
        }
        let a = dynamic_map(&fams, &u, 1.0).unwrap();
        let b = dynamic_map(&fams, &u, -1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, -*y, epsilon = 1e-12);
        }
    }

    #[test]
    fn snapshot_agrees_with_slice() {
        let fams = fig5_instance(0.05).unwrap();
        let u = v(&[0.6, -0.8]);
        let tau: f64 = 0.4;
        let t = tau / (1.0 - tau);
        let e = dynamic_eval(&fams, &u, tau).unwrap();
        let offset = e.median / (1.0 - tau);
        let flat = Flat::whole(2);
        let boundary = Flat::through(&u * offset, &[v(&[0.8, 0.6])]).unwrap();
        let plus = HalfFlat::new(flat, boundary, u.clone()).unwrap();
        for (f, r) in fams[1..].iter().zip(&e.residual) {
            let a = f.snapshot(t).unwrap();
            let g = a.evaluate(&plus).unwrap() - a.evaluate(&plus.opposite()).unwrap();
            assert_abs_diff_eq!(g, *r, epsilon = 1e-9);
        }
    }
}
