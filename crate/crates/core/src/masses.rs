//! Mass assignments and the measures they induce on flats.
//!
//! A [`MassAssignment`] is a rule; [`assign`] turns it into a [`FlatMeasure`]
//! on a concrete flat. Half-flat masses are closed: atoms on the boundary count
//! on both sides. Mollified kinds replace each member by a Gaussian jitter so
//! every half-flat mass becomes a smooth function of the flat.
//!
//! Mollification models:
//! * clouds: each point is blurred by an isotropic Gaussian of scale sigma;
//! * lines: the anchor point is kept and the direction is jittered by an
//!   isotropic Gaussian of scale sigma;
//! * hyperplanes: the point nearest the origin is kept and the normal is
//!   jittered the same way.
//!
//! For lines and hyperplanes the induced coordinate along any direction is
//! then a ratio of two jointly Gaussian variables, whose tail is a sum of two
//! bivariate normal orthant probabilities.

use std::fmt;
use std::sync::Arc;

use crate::error::{MassError, Result};
use crate::geom::{leading_sign, Flat, HalfFlat, Vector, TOL_GEO, TOL_RANK};
use crate::special::{ball_volume, bvn_upper, norm_cdf};

pub use crate::special::ball_cap_volume;

/// Opaque evaluator of a half-flat functional. Must be pure.
pub type HalfspaceFn = Arc<dyn Fn(&HalfFlat) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoint {
    pub point: Vector,
    pub weight: f64,
}

/// The line `point + t * direction`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedLine {
    pub point: Vector,
    pub direction: Vector,
    pub weight: f64,
}

/// The hyperplane `{x : <normal, x> = offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedHyperplane {
    pub normal: Vector,
    pub offset: f64,
    pub weight: f64,
}

#[derive(Clone)]
pub enum MassKind {
    /// Weighted points, orthogonally projected onto the flat.
    ProjectedCloud(Vec<WeightedPoint>),
    /// Push-forward of the uniform measure on a d-ball onto the flat.
    ProjectedBall { center: Vector, radius: f64 },
    /// Volume of the intersection of the flat with a d-ball.
    BallSection { center: Vector, radius: f64 },
    /// Intersection points of lines with a hyperplane.
    LineFamily(Vec<WeightedLine>),
    /// Intersection points of hyperplanes with a line.
    HyperplaneFamily(Vec<WeightedHyperplane>),
    /// Arbitrary half-flat functional.
    Custom(HalfspaceFn),
}

impl MassKind {
    pub fn name(&self) -> &'static str {
        match self {
            MassKind::ProjectedCloud(_) => "projected cloud",
            MassKind::ProjectedBall { .. } => "projected ball",
            MassKind::BallSection { .. } => "ball section",
            MassKind::LineFamily(_) => "line family",
            MassKind::HyperplaneFamily(_) => "hyperplane family",
            MassKind::Custom(_) => "custom",
        }
    }
}

impl fmt::Debug for MassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassKind::ProjectedCloud(p) => f.debug_tuple("ProjectedCloud").field(p).finish(),
            MassKind::ProjectedBall { center, radius } => f
                .debug_struct("ProjectedBall")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            MassKind::BallSection { center, radius } => f
                .debug_struct("BallSection")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            MassKind::LineFamily(l) => f.debug_tuple("LineFamily").field(l).finish(),
            MassKind::HyperplaneFamily(h) => f.debug_tuple("HyperplaneFamily").field(h).finish(),
            MassKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A rule producing a measure (or a functional) on every flat of dimension `dim`.
#[derive(Clone, Debug)]
pub struct MassAssignment {
    ambient: usize,
    dim: usize,
    kind: MassKind,
    sigma: Option<f64>,
}

fn check_len(v: &Vector, d: usize) -> Result<()> {
    if v.len() != d {
        return Err(MassError::DimensionMismatch { expected: d, found: v.len() });
    }
    Ok(())
}

fn check_weights<'a>(weights: impl Iterator<Item = &'a f64>) -> Result<()> {
    let mut total = 0.0;
    for w in weights {
        if !(*w >= 0.0) || !w.is_finite() {
            return Err(MassError::Invalid("weights must be finite and non-negative".into()));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(MassError::ZeroMass);
    }
    Ok(())
}

fn check_unit(v: &Vector) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(MassError::Invalid("direction vectors must have unit length".into()));
    }
    Ok(())
}

impl MassAssignment {
    pub fn projected_cloud(ambient: usize, dim: usize, points: Vec<WeightedPoint>) -> Result<Self> {
        check_dims(ambient, dim)?;
        for p in &points {
            check_len(&p.point, ambient)?;
        }
        check_weights(points.iter().map(|p| &p.weight))?;
        Ok(MassAssignment { ambient, dim, kind: MassKind::ProjectedCloud(points), sigma: None })
    }

    /// Unit-weight cloud.
    pub fn cloud(ambient: usize, dim: usize, points: &[Vector]) -> Result<Self> {
        Self::projected_cloud(
            ambient,
            dim,
            points.iter().map(|p| WeightedPoint { point: p.clone(), weight: 1.0 }).collect(),
        )
    }

    pub fn projected_ball(dim: usize, center: Vector, radius: f64) -> Result<Self> {
        let ambient = center.len();
        check_dims(ambient, dim)?;
        if !(radius > 0.0) {
            return Err(MassError::Invalid("ball radius must be positive".into()));
        }
        Ok(MassAssignment { ambient, dim, kind: MassKind::ProjectedBall { center, radius }, sigma: None })
    }

    pub fn ball_section(dim: usize, center: Vector, radius: f64) -> Result<Self> {
        let ambient = center.len();
        check_dims(ambient, dim)?;
        if !(radius > 0.0) {
            return Err(MassError::Invalid("ball radius must be positive".into()));
        }
        Ok(MassAssignment { ambient, dim, kind: MassKind::BallSection { center, radius }, sigma: None })
    }

    /// Lines in R^d, evaluated on hyperplanes.
    pub fn line_family(ambient: usize, lines: Vec<WeightedLine>) -> Result<Self> {
        check_dims(ambient, ambient.saturating_sub(1))?;
        for l in &lines {
            check_len(&l.point, ambient)?;
            check_len(&l.direction, ambient)?;
            check_unit(&l.direction)?;
        }
        check_weights(lines.iter().map(|l| &l.weight))?;
        Ok(MassAssignment { ambient, dim: ambient - 1, kind: MassKind::LineFamily(lines), sigma: None })
    }

    /// Hyperplanes in R^d, evaluated on lines.
    pub fn hyperplane_family(ambient: usize, planes: Vec<WeightedHyperplane>) -> Result<Self> {
        check_dims(ambient, 1)?;
        for h in &planes {
            check_len(&h.normal, ambient)?;
            check_unit(&h.normal)?;
        }
        check_weights(planes.iter().map(|h| &h.weight))?;
        Ok(MassAssignment { ambient, dim: 1, kind: MassKind::HyperplaneFamily(planes), sigma: None })
    }

    pub fn custom(ambient: usize, dim: usize, f: HalfspaceFn) -> Result<Self> {
        check_dims(ambient, dim)?;
        Ok(MassAssignment { ambient, dim, kind: MassKind::Custom(f), sigma: None })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MassKind {
        &self.kind
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    /// Point clouds and line/hyperplane families.
    pub fn is_discrete(&self) -> bool {
        matches!(
            self.kind,
            MassKind::ProjectedCloud(_) | MassKind::LineFamily(_) | MassKind::HyperplaneFamily(_)
        )
    }

    /// Largest distance between payload anchor points (twice the radius for balls).
    pub fn diameter(&self) -> f64 {
        let anchors: Vec<Vector> = match &self.kind {
            MassKind::ProjectedCloud(p) => p.iter().map(|p| p.point.clone()).collect(),
            MassKind::LineFamily(l) => l.iter().map(|l| l.point.clone()).collect(),
            MassKind::HyperplaneFamily(h) => h.iter().map(|h| &h.normal * h.offset).collect(),
            MassKind::ProjectedBall { radius, .. } | MassKind::BallSection { radius, .. } => {
                return 2.0 * radius
            }
            MassKind::Custom(_) => return 0.0,
        };
        let mut best: f64 = 0.0;
        for (i, a) in anchors.iter().enumerate() {
            for b in &anchors[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    /// Value of the assignment on a half-flat: the functional itself for custom
    /// kinds, the closed half-flat mass otherwise.
    pub fn evaluate(&self, h: &HalfFlat) -> Result<f64> {
        if let MassKind::Custom(f) = &self.kind {
            if h.carrier.dim() != self.dim {
                return Err(MassError::DimensionMismatch { expected: self.dim, found: h.carrier.dim() });
            }
            return Ok(f(h));
        }
        let m = assign(self, &h.carrier)?;
        halfspace_mass(&m, h)
    }
}

fn check_dims(ambient: usize, dim: usize) -> Result<()> {
    if ambient == 0 || dim > ambient {
        return Err(MassError::Invalid(format!("invalid dimensions: flat {dim} in R^{ambient}")));
    }
    Ok(())
}

/// Law of a member's coordinate along a fixed direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Law1d {
    Point(f64),
    Gauss { mean: f64, sd: f64 },
    /// `num / den` with `(num, den)` jointly Gaussian.
    Ratio { num: f64, den: f64, var_num: f64, cov: f64, var_den: f64 },
}

impl Law1d {
    /// Collapses zero-variance laws to points.
    pub fn normalized(self) -> Law1d {
        match self {
            Law1d::Gauss { mean, sd } if sd <= 0.0 => Law1d::Point(mean),
            Law1d::Ratio { num, den, var_num, var_den, .. } if var_num <= 0.0 && var_den <= 0.0 => {
                Law1d::Point(num / den)
            }
            other => other,
        }
    }

    /// Law of `s * X`.
    pub fn scaled(self, s: f64) -> Law1d {
        match self {
            Law1d::Point(x) => Law1d::Point(s * x),
            Law1d::Gauss { mean, sd } => Law1d::Gauss { mean: s * mean, sd: sd * s.abs() },
            Law1d::Ratio { num, den, var_num, cov, var_den } => Law1d::Ratio {
                num: s * num,
                den,
                var_num: s * s * var_num,
                cov: s * cov,
                var_den,
            },
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self.normalized(), Law1d::Point(_))
    }

    /// Closed upper tail `P(X >= c)`; atoms within `TOL_GEO` of `c` count.
    pub fn prob_ge(&self, c: f64) -> f64 {
        match self.normalized() {
            Law1d::Point(x) => {
                if x >= c - TOL_GEO {
                    1.0
                } else {
                    0.0
                }
            }
            Law1d::Gauss { mean, sd } => norm_cdf((mean - c) / sd),
            Law1d::Ratio { num, den, var_num, cov, var_den } => {
                let mw = num - c * den;
                let vw = var_num - 2.0 * c * cov + c * c * var_den;
                ratio_nonneg(mw, vw.max(0.0), cov - c * var_den, den, var_den)
            }
        }
    }

    /// Closed lower tail `P(X <= c)`.
    pub fn prob_le(&self, c: f64) -> f64 {
        self.scaled(-1.0).prob_ge(-c)
    }

    fn center(&self) -> f64 {
        let x = match self.normalized() {
            Law1d::Point(x) => x,
            Law1d::Gauss { mean, .. } => mean,
            Law1d::Ratio { num, den, .. } => num / den,
        };
        if x.is_finite() {
            x.clamp(-1e12, 1e12)
        } else {
            0.0
        }
    }
}

/// `P(W/a >= 0)` for jointly Gaussian `(W, a)`, counting `W = 0` as inside.
fn ratio_nonneg(mw: f64, vw: f64, cwa: f64, ma: f64, va: f64) -> f64 {
    if va <= 0.0 {
        if ma == 0.0 {
            return 0.0;
        }
        let mw = mw * ma.signum();
        if vw <= 0.0 {
            return if mw >= 0.0 { 1.0 } else { 0.0 };
        }
        return norm_cdf(mw / vw.sqrt());
    }
    let sa = va.sqrt();
    if vw <= 1e-300 {
        if mw == 0.0 {
            return 1.0;
        }
        return if mw > 0.0 { norm_cdf(ma / sa) } else { norm_cdf(-ma / sa) };
    }
    let sw = vw.sqrt();
    let rho = (cwa / (sw * sa)).clamp(-1.0, 1.0);
    bvn_upper(-mw / sw, -ma / sa, rho) + bvn_upper(mw / sw, ma / sa, rho)
}

/// Total closed mass with coordinate `>= c`.
pub fn mass_ge(laws: &[(Law1d, f64)], c: f64) -> f64 {
    laws.iter().map(|(l, w)| w * l.prob_ge(c)).sum()
}

/// Total closed mass with coordinate `<= c`.
pub fn mass_le(laws: &[(Law1d, f64)], c: f64) -> f64 {
    laws.iter().map(|(l, w)| w * l.prob_le(c)).sum()
}

fn total(laws: &[(Law1d, f64)]) -> f64 {
    laws.iter().map(|(_, w)| *w).sum()
}

#[derive(PartialEq)]
enum Mix {
    Atoms,
    Smooth,
    Mixed,
}

fn classify(laws: &[(Law1d, f64)]) -> Mix {
    let atoms = laws.iter().filter(|(l, _)| l.is_atom()).count();
    if atoms == laws.len() {
        Mix::Atoms
    } else if atoms == 0 {
        Mix::Smooth
    } else {
        Mix::Mixed
    }
}

fn bracket(laws: &[(Law1d, f64)], g: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (l, _) in laws {
        let c = l.center();
        lo = lo.min(c);
        hi = hi.max(c);
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let mut width = (hi - lo).max(1.0);
    lo -= width;
    hi += width;
    for _ in 0..200 {
        if g(lo) >= 0.0 {
            break;
        }
        lo -= width;
        width *= 2.0;
    }
    width = (hi - lo).max(1.0);
    for _ in 0..200 {
        if g(hi) <= 0.0 {
            break;
        }
        hi += width;
        width *= 2.0;
    }
    (lo, hi)
}

/// Root of a non-increasing function on a sign-changing bracket (Brent's method).
fn brent(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = g(a);
    let mut fb = g(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = g(b);
    }
    b
}

/// Bisection for the boundary of a monotone predicate: `pred(lo)` false, `pred(hi)` true.
fn bisect(pred: &dyn Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn slack(laws: &[(Law1d, f64)]) -> f64 {
    1e-12 * total(laws)
}

/// `sup {c : mass_ge(c) >= target}`.
pub fn sup_ge(laws: &[(Law1d, f64)], target: f64) -> Result<f64> {
    let w = total(laws);
    if !(w > 0.0) {
        return Err(MassError::ZeroMass);
    }
    if target > w + slack(laws) {
        return Err(MassError::EmptyRegion);
    }
    match classify(laws) {
        Mix::Atoms => {
            let mut pts: Vec<(f64, f64)> = laws.iter().map(|(l, w)| (l.center(), *w)).collect();
            pts.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut cum = 0.0;
            for (x, w) in &pts {
                cum += w;
                if cum >= target - slack(laws) {
                    return Ok(*x);
                }
            }
            Ok(pts.last().map(|p| p.0).unwrap_or(0.0))
        }
        Mix::Smooth => {
            let g = |c: f64| mass_ge(laws, c) - target;
            let (lo, hi) = bracket(laws, &g);
            Ok(brent(&g, lo, hi))
        }
        Mix::Mixed => {
            let g = |c: f64| mass_ge(laws, c) - target;
            let (lo, hi) = bracket(laws, &g);
            Ok(bisect(&|c| mass_ge(laws, c) < target - slack(laws), lo, hi))
        }
    }
}

/// `inf {c : mass_le(c) >= target}`.
pub fn inf_le(laws: &[(Law1d, f64)], target: f64) -> Result<f64> {
    let flipped: Vec<(Law1d, f64)> = laws.iter().map(|(l, w)| (l.scaled(-1.0), *w)).collect();
    Ok(-sup_ge(&flipped, target)?)
}

/// Midpoint of the interval of bisecting values.
pub fn median_1d(laws: &[(Law1d, f64)]) -> Result<f64> {
    let w = total(laws);
    if !(w > 0.0) {
        return Err(MassError::ZeroMass);
    }
    if classify(laws) == Mix::Smooth {
        return sup_ge(laws, 0.5 * w);
    }
    Ok(0.5 * (inf_le(laws, 0.5 * w)? + sup_ge(laws, 0.5 * w)?))
}

#[derive(Clone, Debug)]
enum Shape {
    Point(Vector),
    Gauss { center: Vector, sd: f64 },
    /// Hit point of a jittered line on a hyperplane carrier.
    Line { anchor: Vector, dir: Vector, normal_comp: f64, lever: f64, sigma: f64 },
    /// Law of the coordinate along the carrier's single basis vector.
    Axis(Law1d),
}

#[derive(Clone, Debug)]
struct Member {
    weight: f64,
    shape: Shape,
}

impl Member {
    fn law(&self, o: &Vector) -> Law1d {
        match &self.shape {
            Shape::Point(x) => Law1d::Point(x.dot(o)),
            Shape::Gauss { center, sd } => Law1d::Gauss { mean: center.dot(o), sd: *sd },
            Shape::Line { anchor, dir, normal_comp, lever, sigma } => {
                let qo = anchor.dot(o);
                let s2 = sigma * sigma;
                Law1d::Ratio {
                    num: qo * normal_comp + lever * dir.dot(o),
                    den: *normal_comp,
                    var_num: s2 * (qo * qo + lever * lever),
                    cov: s2 * qo,
                    var_den: s2,
                }
            }
            Shape::Axis(l) => l.scaled(o[0]),
        }
    }
}

#[derive(Clone)]
enum Content {
    Members(Vec<Member>),
    /// Uniform ball of dimension `dim` seen through its projection.
    Ball { center: Vector, radius: f64, dim: usize },
    Custom(HalfspaceFn),
}

/// A measure living on a concrete flat.
#[derive(Clone)]
pub struct FlatMeasure {
    carrier: Flat,
    content: Content,
    dropped: usize,
}

impl fmt::Debug for FlatMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let content = match &self.content {
            Content::Members(m) => format!("{} members", m.len()),
            Content::Ball { radius, dim, .. } => format!("{dim}-ball of radius {radius}"),
            Content::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("FlatMeasure")
            .field("carrier", &self.carrier)
            .field("content", &content)
            .field("dropped", &self.dropped)
            .finish()
    }
}

impl FlatMeasure {
    /// Point masses given in carrier coordinates.
    pub fn from_atoms(carrier: Flat, atoms: &[(Vector, f64)]) -> Result<Self> {
        for (x, _) in atoms {
            check_len(x, carrier.dim())?;
        }
        let members = atoms
            .iter()
            .map(|(x, w)| Member { weight: *w, shape: Shape::Point(x.clone()) })
            .collect();
        Ok(FlatMeasure { carrier, content: Content::Members(members), dropped: 0 })
    }

    pub fn carrier(&self) -> &Flat {
        &self.carrier
    }

    /// Members dropped because they do not meet the carrier in a single point.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Total mass; `None` for custom functionals.
    pub fn total_mass(&self) -> Option<f64> {
        match &self.content {
            Content::Members(m) => Some(m.iter().map(|m| m.weight).sum()),
            Content::Ball { radius, dim, .. } => Some(ball_volume(*dim, *radius)),
            Content::Custom(_) => None,
        }
    }

    /// Point masses in carrier coordinates, when every member is an atom.
    pub fn atoms(&self) -> Option<Vec<(Vector, f64)>> {
        match &self.content {
            Content::Members(m) => m
                .iter()
                .map(|m| match &m.shape {
                    Shape::Point(x) => Some((x.clone(), m.weight)),
                    Shape::Axis(Law1d::Point(x)) => Some((Vector::from_element(1, *x), m.weight)),
                    _ => None,
                })
                .collect(),
            _ => None,
        }
    }

    /// Whether every member is an atom.
    pub fn is_atomic(&self) -> bool {
        self.atoms().is_some()
    }

    /// Per-member laws of the coordinate along `o` (carrier coordinates).
    pub fn laws_along(&self, o: &Vector) -> Result<Vec<(Law1d, f64)>> {
        check_len(o, self.carrier.dim())?;
        match &self.content {
            Content::Members(m) => Ok(m.iter().map(|m| (m.law(o), m.weight)).collect()),
            Content::Ball { .. } => Err(MassError::UnsupportedKind("ball")),
            Content::Custom(_) => Err(MassError::UnsupportedKind("custom")),
        }
    }

    /// Closed mass of `{y : <y, o> >= c}` in carrier coordinates.
    pub fn mass_ge_along(&self, o: &Vector, c: f64) -> Result<f64> {
        check_len(o, self.carrier.dim())?;
        match &self.content {
            Content::Members(m) => Ok(m.iter().map(|m| m.weight * m.law(o).prob_ge(c)).sum()),
            Content::Ball { center, radius, dim } => {
                Ok(ball_cap_volume(*dim, c - center.dot(o), *radius))
            }
            Content::Custom(_) => Err(MassError::UnsupportedKind("custom")),
        }
    }

    /// `(inf {c : mass_le(c) >= frac W}, sup {c : mass_ge(c) >= frac W})` along `o`.
    ///
    /// Computed for the sign-canonical orientation of `o`, so reversing `o`
    /// reverses and negates the pair exactly.
    pub fn quantile_pair(&self, o: &Vector, frac: f64) -> Result<(f64, f64)> {
        let s = leading_sign(o);
        let oc = o * s;
        let (lo, hi) = match &self.content {
            Content::Ball { center, radius, dim } => {
                let w = ball_volume(*dim, *radius);
                if !(w > 0.0) {
                    return Err(MassError::ZeroMass);
                }
                let m = center.dot(&oc);
                let target = frac * w;
                let g = |c: f64| ball_cap_volume(*dim, c - m, *radius) - target;
                let hi = brent(&g, m - radius, m + radius);
                (2.0 * m - hi, hi)
            }
            _ => {
                let laws = self.laws_along(&oc)?;
                let w = total(&laws);
                if !(w > 0.0) {
                    return Err(MassError::ZeroMass);
                }
                if classify(&laws) == Mix::Smooth && (frac - 0.5).abs() < 1e-15 {
                    let m = sup_ge(&laws, 0.5 * w)?;
                    (m, m)
                } else {
                    (inf_le(&laws, frac * w)?, sup_ge(&laws, frac * w)?)
                }
            }
        };
        if s > 0.0 {
            Ok((lo, hi))
        } else {
            Ok((-hi, -lo))
        }
    }
}

/// Evaluates an assignment on a flat of its dimension.
pub fn assign(a: &MassAssignment, flat: &Flat) -> Result<FlatMeasure> {
    if flat.ambient_dim() != a.ambient {
        return Err(MassError::DimensionMismatch { expected: a.ambient, found: flat.ambient_dim() });
    }
    if flat.dim() != a.dim {
        return Err(MassError::DimensionMismatch { expected: a.dim, found: flat.dim() });
    }
    let carrier = flat.clone();
    let mut dropped = 0;
    let content = match &a.kind {
        MassKind::ProjectedCloud(points) => Content::Members(
            points
                .iter()
                .map(|p| {
                    let c = flat.coords(&p.point);
                    let shape = match a.sigma {
                        Some(sd) => Shape::Gauss { center: c, sd },
                        None => Shape::Point(c),
                    };
                    Member { weight: p.weight, shape }
                })
                .collect(),
        ),
        MassKind::ProjectedBall { center, radius } => {
            Content::Ball { center: flat.coords(center), radius: *radius, dim: a.ambient }
        }
        MassKind::BallSection { center, radius } => {
            let dist = flat.distance(center);
            let rho = ((radius - dist) * (radius + dist)).max(0.0).sqrt();
            Content::Ball { center: flat.coords(center), radius: rho, dim: flat.dim() }
        }
        MassKind::LineFamily(lines) => {
            let u = flat.normal_space().remove(0);
            let c_h = flat.base().dot(&u);
            let mut members = Vec::with_capacity(lines.len());
            for l in lines {
                let a0 = l.direction.dot(&u);
                let lever = c_h - l.point.dot(&u);
                match a.sigma {
                    None => {
                        if a0.abs() <= TOL_RANK {
                            dropped += 1;
                            continue;
                        }
                        let hit = &l.point + &l.direction * (lever / a0);
                        members.push(Member { weight: l.weight, shape: Shape::Point(flat.coords(&hit)) });
                    }
                    Some(sigma) => members.push(Member {
                        weight: l.weight,
                        shape: Shape::Line {
                            anchor: flat.coords(&l.point),
                            dir: flat.direction_coords(&l.direction),
                            normal_comp: a0,
                            lever,
                            sigma,
                        },
                    }),
                }
            }
            Content::Members(members)
        }
        MassKind::HyperplaneFamily(planes) => {
            let p = flat.base();
            let u = &flat.basis()[0];
            let mut members = Vec::with_capacity(planes.len());
            for h in planes {
                let den = h.normal.dot(u);
                let law = match a.sigma {
                    None => {
                        if den.abs() <= TOL_RANK {
                            dropped += 1;
                            continue;
                        }
                        Law1d::Point((h.offset - h.normal.dot(p)) / den)
                    }
                    Some(sigma) => {
                        let rel = &h.normal * h.offset - p;
                        let s2 = sigma * sigma;
                        Law1d::Ratio {
                            num: h.normal.dot(&rel),
                            den,
                            var_num: s2 * rel.norm_squared(),
                            cov: s2 * rel.dot(u),
                            var_den: s2,
                        }
                    }
                };
                members.push(Member { weight: h.weight, shape: Shape::Axis(law) });
            }
            Content::Members(members)
        }
        MassKind::Custom(f) => Content::Custom(f.clone()),
    };
    Ok(FlatMeasure { carrier, content, dropped })
}

/// Closed mass of a half-flat of the measure's carrier.
pub fn halfspace_mass(m: &FlatMeasure, h: &HalfFlat) -> Result<f64> {
    if !h.carrier.approx_eq(&m.carrier, TOL_GEO) {
        return Err(MassError::CarrierMismatch);
    }
    if let Content::Custom(f) = &m.content {
        return Ok(f(h));
    }
    let o = m.carrier.direction_coords(&h.outward);
    let c = m.carrier.coords(h.boundary.base()).dot(&o);
    m.mass_ge_along(&o, c)
}

/// Offset `c` (relative to the carrier base) of the bisecting hyperplane
/// `<x, direction> = c`, by the midpoint rule.
pub fn median_offset(m: &FlatMeasure, direction: &Vector) -> Result<f64> {
    check_len(direction, m.carrier.dim())?;
    if let Some(w) = m.total_mass() {
        if !(w > 0.0) {
            return Err(MassError::ZeroMass);
        }
    }
    match &m.content {
        Content::Ball { center, .. } => Ok(center.dot(direction)),
        Content::Custom(_) => Err(MassError::UnsupportedKind("custom")),
        Content::Members(_) => {
            let s = leading_sign(direction);
            let laws = m.laws_along(&(direction * s))?;
            Ok(s * median_1d(&laws)?)
        }
    }
}

/// Replaces every discrete member by a Gaussian jitter of scale `sigma`.
pub fn mollify(a: &MassAssignment, sigma: f64) -> Result<MassAssignment> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(MassError::Invalid("sigma must be positive".into()));
    }
    if !a.is_discrete() {
        return Err(MassError::UnsupportedKind(a.kind.name()));
    }
    let mut out = a.clone();
    out.sigma = Some(sigma);
    Ok(out)
}
