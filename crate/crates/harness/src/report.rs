//! Solutions and reports as JSON documents.

use std::path::Path;

use masspart_core::flagsolve::FairySolution;
use masspart_core::geom::{Flat, Frame, Vector};
use masspart_core::kinetic::{
    DynamicOutcome, DynamicSolution, HorizontalOutcome, HorizontalSolution, TranslatedOutcome, TranslatedSolution,
};
use masspart_core::transversal::TransversalSolution;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const REPORT_VERSION: u32 = 1;

/// An affine flat as base point plus orthonormal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatSpec {
    pub base: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl FlatSpec {
    pub fn from_flat(f: &Flat) -> Self {
        FlatSpec { base: f.base().as_slice().to_vec(), basis: f.basis().iter().map(|b| b.as_slice().to_vec()).collect() }
    }

    pub fn to_flat(&self) -> Result<Flat, HarnessError> {
        let d = self.base.len();
        if self.basis.iter().any(|b| b.len() != d) {
            return Err(HarnessError::MalformedSolution("flat basis has the wrong length".into()));
        }
        Flat::new(Vector::from_column_slice(&self.base), self.basis.iter().map(|b| Vector::from_column_slice(b)).collect())
            .map_err(|e| HarnessError::MalformedSolution(e.to_string()))
    }
}

/// One level of a flag: the flat and the normal (inside its parent) pointing to the plus side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelCut {
    pub flat: FlatSpec,
    pub normal: Vec<f64>,
}

fn rows(v: &[Vector]) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.as_slice().to_vec()).collect()
}

fn vec_of(v: &Vector) -> Vec<f64> {
    v.as_slice().to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Solution {
    /// A flag `S_{d-1}, ..., S_{k-1}`.
    Flag { frame: Vec<Vec<f64>>, levels: Vec<LevelCut> },
    Transversal { frame: Vec<Vec<f64>>, s_k: FlatSpec, l: FlatSpec, depths: Vec<f64> },
    HorizontalCut { v: Vec<f64>, tau: f64, s_dm1: FlatSpec, s_dm2: FlatSpec, height: f64 },
    /// Moving families bisected by `<x, v> = offset` at time `t`.
    TimedHyperplane { v: Vec<f64>, tau: f64, t: f64, offset: f64 },
    /// `span(e_d) + shift`, split at `height`.
    SplitLine { v: Vec<f64>, tau: f64, shift: Vec<f64>, height: f64 },
    /// All families share a median speed in direction `v`.
    SharedSpeed { v: Vec<f64>, median_speeds: Vec<f64> },
}

impl Solution {
    pub fn from_fairy(s: &FairySolution) -> Self {
        let levels = s
            .flag
            .levels()
            .iter()
            .map(|l| LevelCut { flat: FlatSpec::from_flat(&l.flat), normal: vec_of(&l.cut_normal) })
            .collect();
        Solution::Flag { frame: rows(s.frame.vectors()), levels }
    }

    pub fn from_transversal(s: &TransversalSolution) -> Self {
        Solution::Transversal {
            frame: rows(s.frame.vectors()),
            s_k: FlatSpec::from_flat(&s.s_k),
            l: FlatSpec::from_flat(&s.l),
            depths: s.depths.clone(),
        }
    }

    pub fn from_horizontal(s: &HorizontalSolution) -> Self {
        match &s.outcome {
            HorizontalOutcome::Interior { v, tau, s_dm1, s_dm2, height, .. } => Solution::HorizontalCut {
                v: vec_of(v),
                tau: *tau,
                s_dm1: FlatSpec::from_flat(s_dm1),
                s_dm2: FlatSpec::from_flat(s_dm2),
                height: *height,
            },
            HorizontalOutcome::Boundary { v, median_speeds } => {
                Solution::SharedSpeed { v: vec_of(v), median_speeds: median_speeds.clone() }
            }
        }
    }

    pub fn from_dynamic(s: &DynamicSolution) -> Self {
        match &s.outcome {
            DynamicOutcome::Interior { v, tau, t, offset } => {
                Solution::TimedHyperplane { v: vec_of(v), tau: *tau, t: *t, offset: *offset }
            }
            DynamicOutcome::Boundary { v, median_speeds } => {
                Solution::SharedSpeed { v: vec_of(v), median_speeds: median_speeds.clone() }
            }
        }
    }

    pub fn from_translated(s: &TranslatedSolution) -> Self {
        match &s.outcome {
            TranslatedOutcome::Interior { v, tau, shift, height, .. } => {
                Solution::SplitLine { v: vec_of(v), tau: *tau, shift: vec_of(shift), height: *height }
            }
            TranslatedOutcome::Boundary { v, median_speeds } => {
                Solution::SharedSpeed { v: vec_of(v), median_speeds: median_speeds.clone() }
            }
        }
    }

    /// The frame carried by flag and transversal solutions.
    pub fn frame(&self) -> Option<Result<Frame, HarnessError>> {
        let rows = match self {
            Solution::Flag { frame, .. } | Solution::Transversal { frame, .. } => frame,
            _ => return None,
        };
        Some(
            Frame::new(rows.iter().map(|r| Vector::from_column_slice(r)).collect())
                .map_err(|e| HarnessError::MalformedSolution(e.to_string())),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    NotConverged,
    /// Only an oracle sweep was run.
    OracleOnly,
    /// The solution was read from a file.
    Supplied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Closed-side masses of one measure or functional, normalized by its total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideMasses {
    pub label: String,
    pub plus: f64,
    pub minus: f64,
}

/// A recomputed geometric condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tol`.
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check { name: name.into(), value, tol, pass: value <= tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSummary {
    pub resolution: usize,
    pub parameters: usize,
    pub coarse_min: f64,
    pub min_residual: f64,
    pub argmin: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub version: u32,
    pub kind: String,
    pub status: Status,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<Solution>,
    /// Recomputed residual components.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norm reported by the solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_residual_norm: Option<f64>,
    pub side_masses: Vec<SideMasses>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub dropped: usize,
    pub warnings: Vec<String>,
    pub wall_time_ms: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Report, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::MalformedSolution(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json()).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }
}

/// Reads a solution from either a report or a bare solution document.
pub fn load_solution(path: &Path) -> Result<Solution, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    if let Ok(r) = serde_json::from_str::<Report>(&text) {
        return r.solution.ok_or_else(|| HarnessError::MalformedSolution("report carries no solution".into()));
    }
    serde_json::from_str(&text).map_err(|e| HarnessError::MalformedSolution(e.to_string()))
}
