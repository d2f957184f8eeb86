//! Instance files: one JSON document per problem.

use std::path::Path;

use masspart_core::flagsolve::{rotation_problem, FairyProblem};
use masspart_core::geom::Vector;
use masspart_core::kinetic::{HyperplaneFamilyMeasure, LineFamilyMeasure, MovingFamily, MovingPoint};
use masspart_core::masses::{mollify, MassAssignment, WeightedHyperplane, WeightedLine, WeightedPoint};
use masspart_core::search::SolverConfig;
use masspart_core::transversal::TransversalProblem;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const INSTANCE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub problem: Problem,
    #[serde(default)]
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub starts: usize,
    pub max_iters: usize,
    pub target: f64,
    pub grid_resolution: usize,
    /// Jitter applied to every raw discrete payload before solving.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mollify: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 0, starts: 64, max_iters: 200, target: 1e-6, grid_resolution: 64, mollify: None }
    }
}

impl RunConfig {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            seed: self.seed,
            starts: self.starts,
            max_iters: self.max_iters,
            target: self.target,
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Problem {
    /// Levels are listed from `S_{d-1}` down to `S_{k-1}`.
    Fairy {
        d: usize,
        k: usize,
        pi: Vec<usize>,
        levels: Vec<LevelSpec>,
        /// Allows more functionals than `pi_i` on a level.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        overdetermined: bool,
    },
    Rotation { d: usize, k: usize, mu: AssignmentSpec, functionals: Vec<AssignmentSpec> },
    Transversal { d: usize, k: usize, lambda: usize, assignments: Vec<AssignmentSpec> },
    Horizontal { families: Vec<LineFamilySpec> },
    Dynamic { families: Vec<MovingFamilySpec> },
    TranslatedLine { families: Vec<HyperplaneFamilySpec> },
    Hamsandwich { d: usize, measures: Vec<AssignmentSpec> },
}

impl Problem {
    pub fn kind(&self) -> &'static str {
        match self {
            Problem::Fairy { .. } => "fairy",
            Problem::Rotation { .. } => "rotation",
            Problem::Transversal { .. } => "transversal",
            Problem::Horizontal { .. } => "horizontal",
            Problem::Dynamic { .. } => "dynamic",
            Problem::TranslatedLine { .. } => "translated-line",
            Problem::Hamsandwich { .. } => "hamsandwich",
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            Problem::Fairy { d, .. }
            | Problem::Rotation { d, .. }
            | Problem::Transversal { d, .. }
            | Problem::Hamsandwich { d, .. } => *d,
            Problem::Horizontal { families } => families.first().and_then(|f| f.lines.first()).map_or(0, |l| l.point.len()),
            Problem::Dynamic { families } => families.first().and_then(|f| f.points.first()).map_or(0, |p| p.position.len()),
            Problem::TranslatedLine { families } => {
                families.first().and_then(|f| f.planes.first()).map_or(0, |h| h.normal.len())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub pivot: AssignmentSpec,
    #[serde(default)]
    pub functionals: Vec<AssignmentSpec>,
}

fn one() -> f64 {
    1.0
}

fn is_one(w: &f64) -> bool {
    *w == 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AssignmentSpec {
    /// Weighted points, orthogonally projected onto each flat.
    Cloud {
        dim: usize,
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    /// Volume of the intersection of each flat with a ball.
    BallSection { dim: usize, center: Vec<f64>, radius: f64 },
    /// Projection of a uniform ball onto each flat.
    ProjectedBall { dim: usize, center: Vec<f64>, radius: f64 },
    /// Intersection points of lines with hyperplanes.
    Lines {
        lines: Vec<LineSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    /// Intersection points of hyperplanes with lines.
    Hyperplanes {
        planes: Vec<PlaneSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub weight: f64,
}

/// The hyperplane `<normal, x> = offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingPointSpec {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineFamilySpec {
    pub lines: Vec<LineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingFamilySpec {
    pub points: Vec<MovingPointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperplaneFamilySpec {
    pub planes: Vec<PlaneSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

fn vec_of(x: &[f64], d: usize, what: &str) -> Result<Vector, HarnessError> {
    if x.len() != d {
        return Err(HarnessError::Instance(format!("{what} has length {}, expected {d}", x.len())));
    }
    Ok(Vector::from_column_slice(x))
}

impl AssignmentSpec {
    /// Flat dimension the payload applies to in `R^d`.
    pub fn flat_dim(&self, d: usize) -> usize {
        match self {
            AssignmentSpec::Cloud { dim, .. }
            | AssignmentSpec::BallSection { dim, .. }
            | AssignmentSpec::ProjectedBall { dim, .. } => *dim,
            AssignmentSpec::Lines { .. } => d.saturating_sub(1),
            AssignmentSpec::Hyperplanes { .. } => 1,
        }
    }

    /// Builds the assignment in `R^d`; `mollify` jitters raw discrete payloads.
    pub fn build(&self, d: usize, extra_sigma: Option<f64>) -> Result<MassAssignment, HarnessError> {
        let (a, sigma) = match self {
            AssignmentSpec::Cloud { dim, points, weights, sigma } => {
                if let Some(w) = weights {
                    if w.len() != points.len() {
                        return Err(HarnessError::Instance("weights and points differ in length".into()));
                    }
                }
                let pts = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        Ok(WeightedPoint {
                            point: vec_of(p, d, "point")?,
                            weight: weights.as_ref().map_or(1.0, |w| w[i]),
                        })
                    })
                    .collect::<Result<Vec<_>, HarnessError>>()?;
                (MassAssignment::projected_cloud(d, *dim, pts)?, *sigma)
            }
            AssignmentSpec::BallSection { dim, center, radius } => {
                (MassAssignment::ball_section(*dim, vec_of(center, d, "center")?, *radius)?, None)
            }
            AssignmentSpec::ProjectedBall { dim, center, radius } => {
                (MassAssignment::projected_ball(*dim, vec_of(center, d, "center")?, *radius)?, None)
            }
            AssignmentSpec::Lines { lines, sigma } => {
                let ls = lines.iter().map(|l| l.build(d)).collect::<Result<Vec<_>, _>>()?;
                (MassAssignment::line_family(d, ls)?, *sigma)
            }
            AssignmentSpec::Hyperplanes { planes, sigma } => {
                let hs = planes.iter().map(|h| h.build(d)).collect::<Result<Vec<_>, _>>()?;
                (MassAssignment::hyperplane_family(d, hs)?, *sigma)
            }
        };
        match sigma.or(if a.is_discrete() { extra_sigma } else { None }) {
            Some(s) => Ok(mollify(&a, s)?),
            None => Ok(a),
        }
    }
}

impl LineSpec {
    fn build(&self, d: usize) -> Result<WeightedLine, HarnessError> {
        Ok(WeightedLine {
            point: vec_of(&self.point, d, "line point")?,
            direction: vec_of(&self.direction, d, "line direction")?,
            weight: self.weight,
        })
    }
}

impl PlaneSpec {
    fn build(&self, d: usize) -> Result<WeightedHyperplane, HarnessError> {
        Ok(WeightedHyperplane { normal: vec_of(&self.normal, d, "normal")?, offset: self.offset, weight: self.weight })
    }
}

impl LineFamilySpec {
    pub fn build(&self, d: usize, extra_sigma: Option<f64>) -> Result<LineFamilyMeasure, HarnessError> {
        let f = LineFamilyMeasure::new(self.lines.iter().map(|l| l.build(d)).collect::<Result<_, _>>()?)?;
        Ok(match self.sigma.or(extra_sigma) {
            Some(s) => f.mollified(s)?,
            None => f,
        })
    }
}

impl MovingFamilySpec {
    pub fn build(&self, d: usize, extra_sigma: Option<f64>) -> Result<MovingFamily, HarnessError> {
        let pts = self
            .points
            .iter()
            .map(|p| {
                Ok(MovingPoint {
                    position: vec_of(&p.position, d, "position")?,
                    velocity: vec_of(&p.velocity, d, "velocity")?,
                    weight: p.weight,
                })
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let f = MovingFamily::new(pts)?;
        Ok(match self.sigma.or(extra_sigma) {
            Some(s) => f.mollified(s)?,
            None => f,
        })
    }
}

impl HyperplaneFamilySpec {
    pub fn build(&self, d: usize, extra_sigma: Option<f64>) -> Result<HyperplaneFamilyMeasure, HarnessError> {
        let f = HyperplaneFamilyMeasure::new(self.planes.iter().map(|h| h.build(d)).collect::<Result<_, _>>()?)?;
        Ok(match self.sigma.or(extra_sigma) {
            Some(s) => f.mollified(s)?,
            None => f,
        })
    }
}

/// Core problem built from an instance.
#[derive(Clone, Debug)]
pub enum Built {
    /// Fairy, rotation and ham-sandwich problems.
    Flag(FairyProblem),
    Transversal(TransversalProblem),
    Horizontal(Vec<LineFamilyMeasure>),
    Dynamic(Vec<MovingFamily>),
    TranslatedLine(Vec<HyperplaneFamilyMeasure>),
}

impl Instance {
    pub fn load(path: &Path) -> Result<Instance, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Instance::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Instance, HarnessError> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| HarnessError::Instance(e.to_string()))?;
        if inst.version != INSTANCE_VERSION {
            return Err(HarnessError::Instance(format!("unsupported instance version {}", inst.version)));
        }
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes") + "\n"
    }

    /// Kind-specific arity checks.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Instance(m));
        match &self.problem {
            Problem::Fairy { d, k, pi, levels, overdetermined } => {
                if *k == 0 || k > d || pi.len() != d - k + 1 || levels.len() != pi.len() {
                    return bad(format!("fairy needs 1 <= k <= d and {} levels", d + 1 - k.min(d)));
                }
                for (i, (l, p)) in levels.iter().zip(pi).enumerate() {
                    let n = l.functionals.len();
                    if (!overdetermined && n != *p) || (*overdetermined && n < *p) {
                        return bad(format!("level {} has {n} functionals but pi = {p}", d - 1 - i));
                    }
                }
            }
            Problem::Rotation { d, k, functionals, .. } => {
                if *k == 0 || k > d || functionals.len() != d - 1 {
                    return bad(format!("rotation needs 1 <= k <= d and {} functionals", d.saturating_sub(1)));
                }
            }
            Problem::Transversal { d, k, lambda, assignments } => {
                if !(lambda < k && k <= d) || assignments.len() != d - k + lambda + 1 {
                    return bad("transversal needs lambda < k <= d and d - k + lambda + 1 assignments".into());
                }
            }
            Problem::Horizontal { families } => {
                if families.len() != self.problem.dim() || families.len() < 2 {
                    return bad("horizontal needs d >= 2 line families in R^d".into());
                }
            }
            Problem::Dynamic { families } => {
                if families.len() != self.problem.dim() + 1 {
                    return bad("dynamic needs d + 1 moving families in R^d".into());
                }
            }
            Problem::TranslatedLine { families } => {
                if families.len() != self.problem.dim() || families.len() < 2 {
                    return bad("translated-line needs d >= 2 hyperplane families in R^d".into());
                }
            }
            Problem::Hamsandwich { d, measures } => {
                if measures.len() != *d || *d == 0 {
                    return bad("hamsandwich needs d measures in R^d".into());
                }
            }
        }
        Ok(())
    }

    /// Builds the core problem.
    pub fn build(&self) -> Result<Built, HarnessError> {
        let s = self.config.mollify;
        let assign_all = |xs: &[AssignmentSpec], d: usize| -> Result<Vec<MassAssignment>, HarnessError> {
            xs.iter().map(|a| a.build(d, s)).collect()
        };
        Ok(match &self.problem {
            Problem::Fairy { d, k, pi, levels, overdetermined } => {
                let pivots = levels.iter().map(|l| l.pivot.build(*d, s)).collect::<Result<Vec<_>, _>>()?;
                let fams = levels.iter().map(|l| assign_all(&l.functionals, *d)).collect::<Result<Vec<_>, _>>()?;
                let p = if *overdetermined {
                    FairyProblem::overdetermined(*d, *k, pi.clone(), pivots, fams)?
                } else {
                    FairyProblem::new(*d, *k, pi.clone(), pivots, fams)?
                };
                Built::Flag(p)
            }
            Problem::Rotation { d, k, mu, functionals } => {
                Built::Flag(rotation_problem(*d, *k, mu.build(*d, s)?, assign_all(functionals, *d)?)?)
            }
            Problem::Hamsandwich { d, measures } => {
                let mut all = assign_all(measures, *d)?;
                let rest = all.split_off(1);
                Built::Flag(FairyProblem::new(*d, *d, vec![d - 1], all, vec![rest])?)
            }
            Problem::Transversal { d, k, lambda, assignments } => {
                Built::Transversal(TransversalProblem::new(*d, *k, *lambda, assign_all(assignments, *d)?)?)
            }
            Problem::Horizontal { families } => {
                let d = self.problem.dim();
                Built::Horizontal(families.iter().map(|f| f.build(d, s)).collect::<Result<_, _>>()?)
            }
            Problem::Dynamic { families } => {
                let d = self.problem.dim();
                Built::Dynamic(families.iter().map(|f| f.build(d, s)).collect::<Result<_, _>>()?)
            }
            Problem::TranslatedLine { families } => {
                let d = self.problem.dim();
                Built::TranslatedLine(families.iter().map(|f| f.build(d, s)).collect::<Result<_, _>>()?)
            }
        })
    }
}
