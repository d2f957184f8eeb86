//! Independent recomputation of a solution's conditions.
//!
//! Only the instance payloads and the solution's reported geometry are used:
//! flats, half-flats and masses are rebuilt from scratch and evaluated with
//! `masses` and `geom`.

use std::f64::consts::PI;

use masspart_core::flagsolve::FairyProblem;
use masspart_core::geom::{complement_basis, unit, Flag, FlagLevel, Flat, HalfFlat, Vector};
use masspart_core::kinetic::{median_speed, speed_gaps, SpeedFamily};
use masspart_core::masses::{assign, FlatMeasure, MassAssignment};
use masspart_core::transversal::TransversalProblem;

use crate::instance::{Built, Instance};
use crate::report::{Check, SideMasses, Solution};
use crate::HarnessError;

/// Tolerance of the geometric checks (verticality, incidence, origin).
pub const GEOMETRY_TOL: f64 = 1e-6;

/// Directions swept for the depth of smooth measures in a 2-dimensional quotient.
const DEPTH_SWEEP: usize = 3600;

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    /// Flags: raw closed-side gaps of pivots and functionals. Kinetic cuts:
    /// gaps over total mass, pivot included. Shared speeds: median-speed gaps
    /// against the last family. Transversals: depth deficits.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub side_masses: Vec<SideMasses>,
    pub checks: Vec<Check>,
    pub dropped: usize,
}

impl Verification {
    /// Residual within `target` and every geometric check passed.
    pub fn passes(&self, target: f64) -> bool {
        self.residual_norm <= target && self.checks.iter().all(|c| c.pass)
    }
}

fn malformed(m: impl Into<String>) -> HarnessError {
    HarnessError::MalformedSolution(m.into())
}

fn vector(x: &[f64], d: usize, what: &str) -> Result<Vector, HarnessError> {
    if x.len() != d || x.iter().any(|c| !c.is_finite()) {
        return Err(malformed(format!("{what} must hold {d} finite numbers")));
    }
    Ok(Vector::from_column_slice(x))
}

fn unit_vector(x: &[f64], d: usize, what: &str) -> Result<Vector, HarnessError> {
    let v = vector(x, d, what)?;
    if (v.norm() - 1.0).abs() > GEOMETRY_TOL {
        return Err(malformed(format!("{what} is not a unit vector")));
    }
    Ok(v.normalize())
}

/// Largest distance of `e_{d-k+1}, ..., e_d` from the direction space of `flat`.
pub fn verticality_defect(flat: &Flat, k: usize) -> f64 {
    let d = flat.ambient_dim();
    (d - k.min(d)..d)
        .map(|j| {
            let e = unit(d, j);
            let p: Vector = flat.basis().iter().map(|b| b * b.dot(&e)).fold(Vector::zeros(d), |a, x| a + x);
            (e - p).norm()
        })
        .fold(0.0, f64::max)
}

/// Largest distance from `outer` of the base of `inner` and its unit steps.
pub fn incidence_defect(inner: &Flat, outer: &Flat) -> f64 {
    let base = inner.base();
    inner
        .basis()
        .iter()
        .map(|b| outer.distance(&(base + b)))
        .fold(outer.distance(base), f64::max)
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Acc {
    residual: Vec<f64>,
    side_masses: Vec<SideMasses>,
    checks: Vec<Check>,
    dropped: usize,
}

impl Acc {
    fn new() -> Self {
        Acc { residual: Vec::new(), side_masses: Vec::new(), checks: Vec::new(), dropped: 0 }
    }

    /// Closed masses on both sides of `h`; returns `(plus - minus, total)`.
    fn sides(&mut self, label: String, a: &MassAssignment, h: &HalfFlat) -> Result<(f64, Option<f64>), HarnessError> {
        let plus = a.evaluate(h)?;
        let minus = a.evaluate(&h.opposite())?;
        let total = match a.kind() {
            masspart_core::masses::MassKind::Custom(_) => None,
            _ => {
                let m = assign(a, &h.carrier)?;
                self.dropped += m.dropped();
                m.total_mass()
            }
        };
        let scale = total.filter(|w| *w > 0.0).unwrap_or(1.0);
        self.side_masses.push(SideMasses { label, plus: plus / scale, minus: minus / scale });
        Ok((plus - minus, total))
    }

    fn check(&mut self, name: impl Into<String>, value: f64) {
        self.checks.push(Check::at_most(name, value, GEOMETRY_TOL));
    }

    fn finish(self) -> Verification {
        let residual_norm = norm(&self.residual);
        Verification {
            residual: self.residual,
            residual_norm,
            side_masses: self.side_masses,
            checks: self.checks,
            dropped: self.dropped,
        }
    }
}

/// Recomputes every condition of `solution` for `instance`.
pub fn verify(instance: &Instance, solution: &Solution) -> Result<Verification, HarnessError> {
    let built = instance.build()?;
    let d = instance.problem.dim();
    match (&built, solution) {
        (Built::Flag(p), Solution::Flag { levels, .. }) => {
            let rotation_k = match &instance.problem {
                crate::instance::Problem::Rotation { k, .. } => Some(*k),
                _ => None,
            };
            verify_flag(p, levels, rotation_k)
        }
        (Built::Transversal(p), Solution::Transversal { s_k, l, .. }) => {
            verify_transversal(p, &s_k.to_flat()?, &l.to_flat()?)
        }
        (Built::Horizontal(f), Solution::HorizontalCut { s_dm1, s_dm2, .. }) => {
            let s1 = s_dm1.to_flat()?;
            let s2 = s_dm2.to_flat()?;
            if s1.ambient_dim() != d || s1.dim() + 1 != d || s2.dim() + 2 != d {
                return Err(malformed("horizontal cut flats have the wrong dimensions"));
            }
            let mut acc = Acc::new();
            acc.check("S_{d-1} contains e_d", verticality_defect(&s1, 1));
            let ed = unit(d, d - 1);
            acc.check("S_{d-2} is horizontal", s2.basis().iter().map(|b| b.dot(&ed).abs()).fold(0.0, f64::max));
            acc.check("S_{d-2} inside S_{d-1}", incidence_defect(&s2, &s1));
            let h = HalfFlat::new(s1, s2, ed).map_err(|e| malformed(e.to_string()))?;
            for (i, fam) in f.iter().enumerate() {
                let (g, w) = acc.sides(format!("lines {i}"), &fam.assignment()?, &h)?;
                acc.residual.push(g / w.filter(|w| *w > 0.0).ok_or(masspart_core::error::MassError::ZeroMass)?);
            }
            Ok(acc.finish())
        }
        (Built::Dynamic(f), Solution::TimedHyperplane { v, t, offset, .. }) => {
            let v = unit_vector(v, d, "v")?;
            if !t.is_finite() || !offset.is_finite() {
                return Err(malformed("time and offset must be finite"));
            }
            let boundary = Flat::new(&v * *offset, complement_basis(std::slice::from_ref(&v), d))?;
            let h = HalfFlat::new(Flat::whole(d), boundary, v).map_err(|e| malformed(e.to_string()))?;
            let mut acc = Acc::new();
            for (i, fam) in f.iter().enumerate() {
                let (g, w) = acc.sides(format!("moving {i} at t = {t}"), &fam.snapshot(*t)?, &h)?;
                acc.residual.push(g / w.filter(|w| *w > 0.0).ok_or(masspart_core::error::MassError::ZeroMass)?);
            }
            Ok(acc.finish())
        }
        (Built::TranslatedLine(f), Solution::SplitLine { shift, height, .. }) => {
            let shift = vector(shift, d, "shift")?;
            if !height.is_finite() {
                return Err(malformed("height must be finite"));
            }
            let ed = unit(d, d - 1);
            let mut acc = Acc::new();
            acc.check("shift orthogonal to e_d", shift[d - 1].abs());
            let line = Flat::new(shift.clone(), vec![ed.clone()])?;
            let split = Flat::point(&shift + &ed * *height);
            let h = HalfFlat::new(line, split, ed).map_err(|e| malformed(e.to_string()))?;
            for (i, fam) in f.iter().enumerate() {
                let (g, w) = acc.sides(format!("hyperplanes {i}"), &fam.assignment()?, &h)?;
                acc.residual.push(g / w.filter(|w| *w > 0.0).ok_or(masspart_core::error::MassError::ZeroMass)?);
            }
            Ok(acc.finish())
        }
        (Built::Horizontal(f), Solution::SharedSpeed { v, .. }) => shared_speed(f, v, d, true),
        (Built::TranslatedLine(f), Solution::SharedSpeed { v, .. }) => shared_speed(f, v, d, true),
        (Built::Dynamic(f), Solution::SharedSpeed { v, .. }) => shared_speed(f, v, d, false),
        _ => Err(malformed(format!("solution does not fit a {} instance", instance.problem.kind()))),
    }
}

fn shared_speed<F: SpeedFamily>(families: &[F], v: &[f64], d: usize, horizontal: bool) -> Result<Verification, HarnessError> {
    let v = unit_vector(v, d, "v")?;
    let mut acc = Acc::new();
    if horizontal {
        acc.check("v orthogonal to e_d", v[d - 1].abs());
    }
    let speeds = families.iter().map(|f| median_speed(f, &v)).collect::<Result<Vec<_>, _>>()?;
    acc.residual = speed_gaps(&speeds);
    Ok(acc.finish())
}

fn verify_flag(p: &FairyProblem, levels: &[crate::report::LevelCut], rotation_k: Option<usize>) -> Result<Verification, HarnessError> {
    let d = p.d();
    if levels.len() != p.levels() {
        return Err(malformed(format!("expected {} flag levels, found {}", p.levels(), levels.len())));
    }
    let levels = levels
        .iter()
        .map(|l| Ok(FlagLevel { flat: l.flat.to_flat()?, cut_normal: vector(&l.normal, d, "cut normal")? }))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let flag = Flag::new(d, levels).map_err(|e| malformed(e.to_string()))?;
    let mut acc = Acc::new();
    for s in 0..p.levels() {
        let (plus, _) = flag.halves(s);
        let level = d - 1 - s;
        let (g, _) = acc.sides(format!("S_{level} pivot"), p.pivot(s), &plus)?;
        acc.residual.push(g);
        for (j, f) in p.family(s).iter().enumerate() {
            let (g, _) = acc.sides(format!("S_{level} functional {j}"), f, &plus)?;
            acc.residual.push(g);
        }
    }
    if let Some(k) = rotation_k {
        let s_k = if k == d { Flat::whole(d) } else { flag.flat_of_dim(k).cloned().ok_or_else(|| malformed("flag has no k-flat"))? };
        acc.check(format!("S_{k} is {}-vertical", k - 1), verticality_defect(&s_k, k - 1));
        acc.check(format!("S_{k} through origin"), s_k.distance(&Vector::zeros(d)));
    }
    Ok(acc.finish())
}

/// Smallest closed fraction of `m` over half-spaces of its carrier containing
/// the flat `base + span(dirs)` (carrier coordinates).
pub fn flat_depth(m: &FlatMeasure, base: &Vector, dirs: &[Vector]) -> Result<f64, HarnessError> {
    let k = m.carrier().dim();
    let total = m.total_mass().filter(|w| *w > 0.0).ok_or(masspart_core::error::MassError::ZeroMass)?;
    let quotient = complement_basis(dirs, k);
    let frac = |o: &Vector| -> Result<f64, HarnessError> { Ok(m.mass_ge_along(o, base.dot(o))? / total) };
    let mut best = f64::INFINITY;
    match quotient.len() {
        0 => return Ok(1.0),
        1 => {
            for s in [1.0, -1.0] {
                best = best.min(frac(&(&quotient[0] * s))?);
            }
        }
        2 => {
            let dir = |a: f64| &quotient[0] * a.cos() + &quotient[1] * a.sin();
            let mut angles: Vec<f64> = match m.atoms() {
                Some(atoms) => atoms
                    .iter()
                    .filter_map(|(x, _)| {
                        let y = x - base;
                        let (u, w) = (y.dot(&quotient[0]), y.dot(&quotient[1]));
                        (u.hypot(w) > 1e-12).then(|| {
                            let a = (w.atan2(u) + PI / 2.0).rem_euclid(PI);
                            [a, a + PI]
                        })
                    })
                    .flatten()
                    .collect(),
                None => (0..DEPTH_SWEEP).map(|i| 2.0 * PI * i as f64 / DEPTH_SWEEP as f64).collect(),
            };
            angles.sort_by(f64::total_cmp);
            angles.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            if angles.is_empty() {
                angles.push(0.0);
            }
            let n = angles.len();
            for i in 0..n {
                let a = angles[i];
                let next = if i + 1 < n { angles[i + 1] } else { angles[0] + 2.0 * PI };
                best = best.min(frac(&dir(a))?).min(frac(&dir(0.5 * (a + next)))?);
            }
        }
        q => return Err(malformed(format!("depth in a {q}-dimensional quotient is not supported"))),
    }
    Ok(best)
}

fn verify_transversal(p: &TransversalProblem, s_k: &Flat, l: &Flat) -> Result<Verification, HarnessError> {
    let d = p.d();
    if s_k.ambient_dim() != d || s_k.dim() != p.k() || l.ambient_dim() != d || l.dim() != p.lambda() {
        return Err(malformed("transversal flats have the wrong dimensions"));
    }
    let mut acc = Acc::new();
    acc.check(format!("S_{} is {}-vertical", p.k(), p.lambda()), verticality_defect(s_k, p.lambda()));
    acc.check(format!("S_{} through origin", p.k()), s_k.distance(&Vector::zeros(d)));
    acc.check("L inside S_k", incidence_defect(l, s_k));
    let threshold = 1.0 / (p.k() - p.lambda() + 1) as f64;
    let base = s_k.coords(l.base());
    let dirs: Vec<Vector> = l.basis().iter().map(|b| s_k.direction_coords(b)).collect();
    for (i, a) in p.assignments().iter().enumerate() {
        let m = assign(a, s_k)?;
        acc.dropped += m.dropped();
        let depth = flat_depth(&m, &base, &dirs)?;
        acc.side_masses.push(SideMasses { label: format!("assignment {i} depth"), plus: depth, minus: threshold });
        acc.residual.push((threshold - depth).max(0.0));
    }
    Ok(acc.finish())
}
