//! Brute-force grid oracles over the solver parametrizations.
//!
//! A coarse uniform grid is evaluated exhaustively, then the best few cells
//! are refined by small grids that recenter on improvement and shrink otherwise. Evaluations run on the rayon pool; the
//! reduction keeps the smallest residual and, among equals, the smallest
//! grid index, so results do not depend on scheduling.

use std::f64::consts::PI;

use masspart_core::flagsolve::evaluate_f_pi;
use masspart_core::geom::{Frame, Vector};
use masspart_core::kinetic::{dynamic_map, horizontal_map, translated_line_map};
use masspart_core::search::{direction_from_angles, frame_from_angles, generators, SearchSpace, SliceParam, SliceSpace, StiefelSpace};
use masspart_core::transversal::evaluate_transversal_map;
use rayon::prelude::*;

use crate::instance::{Built, Instance};
use crate::report::{OracleSummary, Solution};
use crate::HarnessError;

/// Largest number of chart parameters the oracle sweeps.
pub const MAX_PARAMETERS: usize = 4;

/// Points per axis in each zoom pass.
const ZOOM_POINTS: usize = 5;
const ZOOM_PASSES: usize = 400;
/// Coarse cells refined by zooming.
const REFINED_CELLS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub resolution: usize,
    pub parameters: usize,
    /// Best residual norm on the coarse grid.
    pub coarse_min: f64,
    /// Best residual norm after refinement.
    pub min_residual: f64,
    /// Chart coordinates of the refined minimum.
    pub argmin: Vec<f64>,
    /// Residual vector at the refined minimum.
    pub residual: Vec<f64>,
    pub evaluations: usize,
}

impl OracleResult {
    pub fn summary(&self) -> OracleSummary {
        OracleSummary {
            resolution: self.resolution,
            parameters: self.parameters,
            coarse_min: self.coarse_min,
            min_residual: self.min_residual,
            argmin: self.argmin.clone(),
            evaluations: self.evaluations,
        }
    }
}

type ResidualFn<'a> = Box<dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync + 'a>;

/// A box of chart coordinates and the residual map on it.
pub struct Chart<'a> {
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Periodic axes exclude their upper end.
    periodic: Vec<bool>,
    eval: ResidualFn<'a>,
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl<'a> Chart<'a> {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, periodic: Vec<bool>, eval: ResidualFn<'a>) -> Self {
        assert!(lo.len() == hi.len() && lo.len() == periodic.len());
        Chart { lo, hi, periodic, eval }
    }

    pub fn parameters(&self) -> usize {
        self.lo.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        match (self.eval)(x) {
            Some(r) => {
                let n = norm(&r);
                if n.is_finite() {
                    n
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        }
    }

    fn axis_points(&self, axis: usize, resolution: usize) -> Vec<f64> {
        let (lo, hi) = (self.lo[axis], self.hi[axis]);
        if self.periodic[axis] {
            (0..resolution).map(|i| lo + (hi - lo) * i as f64 / resolution as f64).collect()
        } else if resolution == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..resolution).map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64).collect()
        }
    }

    /// Minimum over the product grid, ties to the lowest flat index.
    fn sweep(&self, axes: &[Vec<f64>]) -> (f64, Vec<f64>, usize) {
        let (best, total) = self.best_cells(axes, 1);
        let (value, idx) = best.first().copied().unwrap_or((f64::INFINITY, 0));
        (value, grid_point(axes, idx), total)
    }

    /// The `k` smallest `(value, flat index)` pairs of the product grid.
    fn best_cells(&self, axes: &[Vec<f64>], k: usize) -> (Vec<(f64, usize)>, usize) {
        let total: usize = axes.iter().map(|a| a.len()).product();
        let keep = |mut v: Vec<(f64, usize)>| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v.truncate(k);
            v
        };
        let best = (0..total)
            .into_par_iter()
            .fold(Vec::new, |mut acc, i| {
                acc.push((self.value(&grid_point(axes, i)), i));
                if acc.len() >= 4 * k {
                    acc = keep(acc);
                }
                acc
            })
            .map(keep)
            .reduce(Vec::new, |mut a, b| {
                a.extend(b);
                keep(a)
            });
        (best, total)
    }

    fn zoom(&self, mut x: Vec<f64>, mut best: f64, mut h: Vec<f64>) -> (f64, Vec<f64>, usize) {
        let n = x.len();
        let mut evaluations = 0;
        for _ in 0..ZOOM_PASSES {
            if best <= 1e-15 || h.iter().all(|s| *s < 1e-13) {
                break;
            }
            let axes: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let mut pts: Vec<f64> = (0..ZOOM_POINTS)
                        .map(|i| x[j] - h[j] + 2.0 * h[j] * i as f64 / (ZOOM_POINTS - 1) as f64)
                        .map(|t| if self.periodic[j] { t } else { t.clamp(self.lo[j], self.hi[j]) })
                        .collect();
                    pts.dedup();
                    pts
                })
                .collect();
            let (m, xm, k) = self.sweep(&axes);
            evaluations += k;
            if m < best {
                best = m;
                x = xm;
            } else {
                for s in &mut h {
                    *s *= 0.5;
                }
            }
        }
        (best, x, evaluations)
    }

    /// Exhaustive sweep at `resolution` points per axis, then zoom refinement
    /// around the best few cells.
    pub fn minimize(&self, resolution: usize) -> Result<OracleResult, HarnessError> {
        let n = self.parameters();
        if n > MAX_PARAMETERS {
            return Err(HarnessError::SearchSpaceTooLarge(n));
        }
        let resolution = resolution.max(2);
        let axes: Vec<Vec<f64>> = (0..n).map(|j| self.axis_points(j, resolution)).collect();
        let (cells, mut evaluations) = self.best_cells(&axes, REFINED_CELLS);
        let coarse_min = cells.first().map_or(f64::INFINITY, |c| c.0);
        let h: Vec<f64> = (0..n)
            .map(|j| {
                let span = self.hi[j] - self.lo[j];
                if self.periodic[j] {
                    span / resolution as f64
                } else {
                    span / (resolution - 1) as f64
                }
            })
            .collect();
        let mut best = (f64::INFINITY, grid_point(&axes, 0));
        for (value, idx) in cells {
            let (m, x, k) = self.zoom(grid_point(&axes, idx), value, h.clone());
            evaluations += k;
            if m < best.0 {
                best = (m, x);
            }
        }
        let (min_residual, argmin) = best;
        let residual = (self.eval)(&argmin).unwrap_or_default();
        Ok(OracleResult { resolution, parameters: n, coarse_min, min_residual, argmin, residual, evaluations })
    }
}

fn grid_point(axes: &[Vec<f64>], mut idx: usize) -> Vec<f64> {
    let mut x = vec![0.0; axes.len()];
    for (j, a) in axes.iter().enumerate().rev() {
        x[j] = a[idx % a.len()];
        idx /= a.len();
    }
    x
}

fn embed_horizontal(d: usize, v: &Vector) -> Vector {
    let mut out = Vector::zeros(d);
    out.rows_mut(0, d - 1).copy_from(v);
    out
}

/// Direction on `S^{n-1}` and `tau` from chart coordinates; `n = 1` returns both signs.
fn slice_points(n: usize, x: &[f64]) -> Vec<(Vector, f64)> {
    let tau = x[x.len() - 1];
    if n == 1 {
        vec![(Vector::from_element(1, 1.0), tau), (Vector::from_element(1, -1.0), tau)]
    } else {
        vec![(direction_from_angles(n, &x[..n - 1]), tau)]
    }
}

fn best_of(rs: impl Iterator<Item = Option<Vec<f64>>>) -> Option<Vec<f64>> {
    rs.flatten().min_by(|a, b| norm(a).total_cmp(&norm(b)))
}

type SliceFn<'a> = Box<dyn Fn(&Vector, f64) -> Option<Vec<f64>> + Sync + 'a>;

fn slice_map<'a>(built: &'a Built) -> Option<(usize, f64, ResidualFn<'a>)> {
    let (n, lo, g): (usize, f64, SliceFn<'a>) = match built {
        Built::Horizontal(f) => {
            let d = f[0].ambient_dim();
            (d - 1, 0.0, Box::new(move |v: &Vector, tau: f64| horizontal_map(f, &embed_horizontal(d, v), tau).ok()))
        }
        Built::Dynamic(f) => (f[0].ambient_dim(), -1.0, Box::new(move |v: &Vector, tau: f64| dynamic_map(f, v, tau).ok())),
        Built::TranslatedLine(f) => {
            let d = f[0].ambient_dim();
            (d - 1, 0.0, Box::new(move |v: &Vector, tau: f64| translated_line_map(f, &embed_horizontal(d, v), tau).ok()))
        }
        _ => return None,
    };
    let eval: ResidualFn<'a> = Box::new(move |x: &[f64]| best_of(slice_points(n, x).into_iter().map(|(v, t)| g(&v, t))));
    Some((n, lo, eval))
}

fn frame_map<'a>(built: &'a Built) -> Option<(usize, usize, Box<dyn Fn(&Frame) -> Option<Vec<f64>> + Sync + 'a>)> {
    match built {
        Built::Flag(p) => Some((p.d(), p.levels(), Box::new(move |f: &Frame| evaluate_f_pi(p, f).ok()))),
        Built::Transversal(p) => {
            Some((p.d(), p.frame_len(), Box::new(move |f: &Frame| evaluate_transversal_map(p, f).ok())))
        }
        _ => None,
    }
}

/// Global chart of the solver's search space.
pub fn global_chart(built: &Built) -> Chart<'_> {
    if let Some((d, m, g)) = frame_map(built) {
        let n = generators(d, m).len();
        let eval: ResidualFn<'_> = Box::new(move |x: &[f64]| g(&frame_from_angles(d, m, x)));
        return Chart::new(vec![-PI / 2.0; n], vec![PI / 2.0; n], vec![false; n], eval);
    }
    let (n, tau_lo, eval) = slice_map(built).expect("every problem has a chart");
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut periodic = Vec::new();
    for j in 0..n.saturating_sub(1) {
        if j == 0 {
            lo.push(-PI);
            hi.push(PI);
            periodic.push(true);
        } else {
            lo.push(-PI / 2.0);
            hi.push(PI / 2.0);
            periodic.push(false);
        }
    }
    lo.push(tau_lo);
    hi.push(1.0);
    periodic.push(false);
    Chart::new(lo, hi, periodic, eval)
}

/// Local chart of half-width `radius` centered at a solution, in the solver's retraction coordinates.
pub fn local_chart<'a>(built: &'a Built, solution: &Solution, radius: f64) -> Result<Chart<'a>, HarnessError> {
    if let Some((d, m, g)) = frame_map(built) {
        let center = solution
            .frame()
            .ok_or_else(|| HarnessError::MalformedSolution("solution carries no frame".into()))??;
        if center.ambient_dim() != d || center.len() != m {
            return Err(HarnessError::MalformedSolution("frame does not match the problem".into()));
        }
        let space = StiefelSpace { d, m };
        let n = space.dim();
        let eval: ResidualFn<'a> = Box::new(move |x: &[f64]| g(&space.retract(&center, x)));
        return Ok(Chart::new(vec![-radius; n], vec![radius; n], vec![false; n], eval));
    }
    let (n, tau_lo, _) = slice_map(built).expect("every problem has a chart");
    let (v, tau) = match solution {
        Solution::HorizontalCut { v, tau, .. }
        | Solution::TimedHyperplane { v, tau, .. }
        | Solution::SplitLine { v, tau, .. } => (v.clone(), *tau),
        Solution::SharedSpeed { v, .. } => (v.clone(), 1.0),
        _ => return Err(HarnessError::MalformedSolution("solution does not match the problem".into())),
    };
    let v = Vector::from_column_slice(&v[..n]);
    let space = SliceSpace { n, tau_lo, tau_hi: 1.0 };
    let center = SliceParam { v, tau };
    let g = slice_map(built).expect("slice problem").2;
    let eval: ResidualFn<'a> = Box::new(move |x: &[f64]| {
        let p = space.retract(&center, x);
        let mut y = if n >= 2 { angles_of(&p.v) } else { Vec::new() };
        y.push(p.tau);
        g(&y)
    });
    Ok(Chart::new(vec![-radius; n], vec![radius; n], vec![false; n], eval))
}

/// Inverse of `direction_from_angles` for `n >= 2`.
fn angles_of(v: &Vector) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n - 1];
    out[0] = v[1].atan2(v[0]);
    let mut r = v[0].hypot(v[1]);
    for b in 2..n {
        out[b - 1] = v[b].atan2(r);
        r = r.hypot(v[b]);
    }
    out
}

/// Sweeps the solver's global chart.
pub fn grid_oracle(instance: &Instance, resolution: usize) -> Result<OracleResult, HarnessError> {
    let built = instance.build()?;
    let out = global_chart(&built).minimize(resolution);
    out
}

/// Sweeps a box of half-width `radius` around a solution.
pub fn grid_oracle_near(
    instance: &Instance,
    solution: &Solution,
    radius: f64,
    resolution: usize,
) -> Result<OracleResult, HarnessError> {
    let built = instance.build()?;
    let out = local_chart(&built, solution, radius)?.minimize(resolution);
    out
}

/// Area of the part of a unit disk at signed distance at least `x` from its center.
pub fn disk_segment(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    x.acos() - x * (1.0 - x * x).sqrt()
}

/// Floor of the bisection residual over all flags (line, point) in the plane
/// for the projected unit disks at `(0,0)`, `(1,0)`, `(0,1)`: the axes are the
/// line angle in `[0, pi)`, the line offset and the point position on the line.
pub fn lemma24_flag_floor(resolution: usize) -> Result<OracleResult, HarnessError> {
    let centers = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let eval: ResidualFn<'static> = Box::new(move |x: &[f64]| {
        let (theta, offset, s) = (x[0], x[1], x[2]);
        let u = [theta.cos(), theta.sin()];
        let nrm = [-u[1], u[0]];
        let base = [offset * nrm[0], offset * nrm[1]];
        let split = base[0] * u[0] + base[1] * u[1] + s;
        Some(
            centers
                .iter()
                .map(|c| {
                    let h = c[0] * u[0] + c[1] * u[1] - split;
                    disk_segment(-h) - disk_segment(h)
                })
                .collect(),
        )
    });
    Chart::new(vec![0.0, -2.0, -2.0], vec![PI, 2.0, 2.0], vec![true, false, false], eval).minimize(resolution)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_invert_direction_chart() {
        for v in [vec![0.3, -0.5, 0.81], vec![-0.6, 0.8], vec![-0.2, 0.1, -0.3, 0.9]] {
            let v = Vector::from_vec(v.clone()).normalize();
            let a = angles_of(&v);
            let w = direction_from_angles(v.len(), &a);
            assert!((w - &v).norm() < 1e-12, "{a:?}");
        }
    }

    #[test]
    fn too_many_parameters() {
        let eval: ResidualFn<'static> = Box::new(|_x: &[f64]| Some(vec![1.0]));
        let c = Chart::new(vec![0.0; 5], vec![1.0; 5], vec![false; 5], eval);
        assert!(matches!(c.minimize(3), Err(HarnessError::SearchSpaceTooLarge(5))));
    }

    #[test]
    fn zoom_reaches_interior_zero() {
        let eval: ResidualFn<'static> = Box::new(|x: &[f64]| Some(vec![x[0] - 0.123456789, x[1] + 0.3]));
        let c = Chart::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![false, false], eval);
        let r = c.minimize(16).unwrap();
        assert!(r.min_residual < 1e-10, "{r:?}");
        assert!(r.coarse_min > 1e-3);
    }

    #[test]
    fn disk_segment_values() {
        assert!((disk_segment(0.0) - PI / 2.0).abs() < 1e-15);
        assert_eq!(disk_segment(1.0), 0.0);
        assert!((disk_segment(-1.0) - PI).abs() < 1e-15);
    }
}
