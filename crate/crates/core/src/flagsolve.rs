//! Flags built from Stiefel frames and the sign-equivariant residual map.
//!
//! Levels are indexed from the top: slot `s` holds the flat `S_i` with
//! `i = d - 1 - s`. Frame vectors are labelled `v_{d-1}, ..., v_{k-1}`; the
//! vector with label `j` is stored at position `d - 1 - j`.

use crate::error::{MassError, Result, SolveError};
use crate::geom::{sub_flat, unit, Flag, FlagLevel, Flat, Frame, HalfFlat, Vector, TOL_RANK};
use crate::masses::{assign, halfspace_mass, median_offset, mollify, MassAssignment, MassKind};
use crate::search::{search_zero, SolverConfig, StiefelSpace};

/// A flag-bisection problem: pivots, functional families and a permutation.
#[derive(Clone, Debug)]
pub struct FairyProblem {
    d: usize,
    k: usize,
    pi: Vec<usize>,
    pivots: Vec<MassAssignment>,
    families: Vec<Vec<MassAssignment>>,
    block_len: Vec<usize>,
}

impl FairyProblem {
    /// `pi`, `pivots` and `families` are listed from level `d-1` down to `k-1`.
    /// Level `i` may carry at most `pi_i` functionals; missing ones are zero.
    pub fn new(
        d: usize,
        k: usize,
        pi: Vec<usize>,
        pivots: Vec<MassAssignment>,
        families: Vec<Vec<MassAssignment>>,
    ) -> Result<Self> {
        Self::build(d, k, pi, pivots, families, false)
    }

    /// Like [`FairyProblem::new`] but allows more functionals than `pi_i` on a
    /// level; the corresponding residual block grows to fit them.
    pub fn overdetermined(
        d: usize,
        k: usize,
        pi: Vec<usize>,
        pivots: Vec<MassAssignment>,
        families: Vec<Vec<MassAssignment>>,
    ) -> Result<Self> {
        Self::build(d, k, pi, pivots, families, true)
    }

    fn build(
        d: usize,
        k: usize,
        pi: Vec<usize>,
        pivots: Vec<MassAssignment>,
        families: Vec<Vec<MassAssignment>>,
        allow_extra: bool,
    ) -> Result<Self> {
        if k == 0 || k > d {
            return Err(MassError::Invalid(format!("need 1 <= k <= d, got k={k}, d={d}")));
        }
        let levels = d - k + 1;
        if pi.len() != levels || pivots.len() != levels || families.len() != levels {
            return Err(MassError::Invalid(format!("expected {levels} levels")));
        }
        let mut sorted = pi.clone();
        sorted.sort_unstable();
        if sorted != (k - 1..d).collect::<Vec<_>>() {
            return Err(MassError::Invalid("pi is not a permutation of k-1..d-1".into()));
        }
        let mut block_len: Vec<usize> = (0..levels).map(|s| d - 1 - s).collect();
        for s in 0..levels {
            let i = d - 1 - s;
            let check = |a: &MassAssignment| -> Result<()> {
                if a.ambient_dim() != d {
                    return Err(MassError::DimensionMismatch { expected: d, found: a.ambient_dim() });
                }
                if a.dim() != i + 1 {
                    return Err(MassError::DimensionMismatch { expected: i + 1, found: a.dim() });
                }
                Ok(())
            };
            check(&pivots[s])?;
            if matches!(pivots[s].kind(), MassKind::Custom(_)) {
                return Err(MassError::UnsupportedKind("custom"));
            }
            for f in &families[s] {
                check(f)?;
            }
            if families[s].len() > pi[s] && !allow_extra {
                return Err(MassError::Invalid(format!(
                    "level {i} has {} functionals but pi_{i} = {}",
                    families[s].len(),
                    pi[s]
                )));
            }
            let slot = d - 1 - pi[s];
            block_len[slot] = block_len[slot].max(families[s].len());
        }
        Ok(FairyProblem { d, k, pi, pivots, families, block_len })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `(pi_{d-1}, ..., pi_{k-1})`.
    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    pub fn levels(&self) -> usize {
        self.d - self.k + 1
    }

    /// Pivot assignment of slot `s` (level `d-1-s`).
    pub fn pivot(&self, s: usize) -> &MassAssignment {
        &self.pivots[s]
    }

    /// Functionals of slot `s`.
    pub fn family(&self, s: usize) -> &[MassAssignment] {
        &self.families[s]
    }

    /// Length of the residual block with label `d-1-slot`.
    pub fn block_len(&self, slot: usize) -> usize {
        self.block_len[slot]
    }

    /// Start index of the residual block with label `d-1-slot`.
    pub fn block_offset(&self, slot: usize) -> usize {
        self.block_len[..slot].iter().sum()
    }

    pub fn residual_len(&self) -> usize {
        self.block_len.iter().sum()
    }

    /// Position in the frame of the vector with label `j`.
    pub fn label_index(&self, j: usize) -> usize {
        self.d - 1 - j
    }

    /// Mollifies every raw discrete assignment with sigma = 1e-3 x data diameter.
    pub fn mollified_for_continuity(&self) -> Result<Self> {
        let all = self.pivots.iter().chain(self.families.iter().flatten());
        let diam = all.filter(|a| a.is_discrete()).map(|a| a.diameter()).fold(0.0, f64::max);
        let sigma = 1e-3 * if diam > 0.0 { diam } else { 1.0 };
        let soften = |a: &MassAssignment| -> Result<MassAssignment> {
            if a.is_discrete() && a.sigma().is_none() {
                mollify(a, sigma)
            } else {
                Ok(a.clone())
            }
        };
        let mut out = self.clone();
        out.pivots = self.pivots.iter().map(soften).collect::<Result<_>>()?;
        out.families = self
            .families
            .iter()
            .map(|f| f.iter().map(soften).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Ok(out)
    }
}

/// Evaluated residual together with the flag that produced it.
#[derive(Clone, Debug)]
pub struct FairyEval {
    pub flag: Flag,
    pub residual: Vec<f64>,
    /// Members dropped while evaluating (lines or hyperplanes missing a flat).
    pub dropped: usize,
}

fn check_frame(p: &FairyProblem, frame: &Frame) -> Result<()> {
    if frame.ambient_dim() != p.d {
        return Err(MassError::DimensionMismatch { expected: p.d, found: frame.ambient_dim() });
    }
    if frame.len() != p.levels() {
        return Err(MassError::DimensionMismatch { expected: p.levels(), found: frame.len() });
    }
    Ok(())
}

/// Builds the flag with cut directions given per level (slot order).
fn build_flag(p: &FairyProblem, dirs: &[&Vector]) -> Result<(Flag, Vec<(HalfFlat, HalfFlat)>, usize)> {
    let mut parent = Flat::whole(p.d);
    let mut levels = Vec::with_capacity(p.levels());
    let mut halves = Vec::with_capacity(p.levels());
    let mut dropped = 0;
    for (s, v) in dirs.iter().enumerate() {
        let n = parent.direction_coords(v);
        let len = n.norm();
        if len <= TOL_RANK {
            return Err(MassError::DegenerateDirection);
        }
        let n = n / len;
        let m = assign(&p.pivots[s], &parent)?;
        dropped += m.dropped();
        let c = median_offset(&m, &n)?;
        let (child, plus, minus) = sub_flat(&parent, &n, c)?;
        levels.push(FlagLevel { flat: child.clone(), cut_normal: plus.outward.clone() });
        halves.push((plus, minus));
        parent = child;
    }
    Ok((Flag::from_parts(p.d, levels), halves, dropped))
}

/// `f(plus) - f(minus)` and the number of dropped members.
pub fn gap(f: &MassAssignment, plus: &HalfFlat, minus: &HalfFlat) -> Result<(f64, usize)> {
    if let MassKind::Custom(_) = f.kind() {
        return Ok((f.evaluate(plus)? - f.evaluate(minus)?, 0));
    }
    let m = assign(f, &plus.carrier)?;
    Ok((halfspace_mass(&m, plus)? - halfspace_mass(&m, minus)?, m.dropped()))
}

/// Flag of the frame: level `i` cuts `S_{i+1}` perpendicular to `v_{pi_i}` at
/// the median of the pivot.
pub fn flag_from_frame(p: &FairyProblem, frame: &Frame) -> Result<Flag> {
    check_frame(p, frame)?;
    let dirs: Vec<&Vector> = p.pi.iter().map(|&j| frame.vector(p.label_index(j))).collect();
    Ok(build_flag(p, &dirs)?.0)
}

/// Flag with arbitrary (not necessarily orthonormal) cut directions, one per level.
pub fn flag_from_directions(p: &FairyProblem, dirs: &[Vector]) -> Result<Flag> {
    if dirs.len() != p.levels() {
        return Err(MassError::DimensionMismatch { expected: p.levels(), found: dirs.len() });
    }
    let refs: Vec<&Vector> = dirs.iter().collect();
    Ok(build_flag(p, &refs)?.0)
}

/// Residual vector `(x_{d-1}, ..., x_{k-1})` with the flag.
pub fn evaluate(p: &FairyProblem, frame: &Frame) -> Result<FairyEval> {
    check_frame(p, frame)?;
    let dirs: Vec<&Vector> = p.pi.iter().map(|&j| frame.vector(p.label_index(j))).collect();
    let (flag, halves, mut dropped) = build_flag(p, &dirs)?;
    let mut residual = vec![0.0; p.residual_len()];
    for (s, (plus, minus)) in halves.iter().enumerate() {
        let offset = p.block_offset(p.d - 1 - p.pi[s]);
        for (j, f) in p.families[s].iter().enumerate() {
            let (g, n) = gap(f, plus, minus)?;
            residual[offset + j] = g;
            dropped += n;
        }
    }
    Ok(FairyEval { flag, residual, dropped })
}

/// The residual map alone.
pub fn evaluate_f_pi(p: &FairyProblem, frame: &Frame) -> Result<Vec<f64>> {
    Ok(evaluate(p, frame)?.residual)
}

/// Applies the sign action of `signs` (one per frame vector) to a residual.
pub fn sign_action(p: &FairyProblem, signs: &[f64], residual: &[f64]) -> Vec<f64> {
    let mut out = residual.to_vec();
    for slot in 0..p.levels() {
        let s = signs[slot];
        let off = p.block_offset(slot);
        for x in &mut out[off..off + p.block_len(slot)] {
            *x *= s;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct FairySolution {
    pub frame: Frame,
    pub flag: Flag,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub dropped: usize,
    /// Index of the winning start.
    pub start: usize,
    pub evaluations: usize,
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Multistart search for a zero of the residual map.
pub fn solve_fairy(p: &FairyProblem, cfg: &SolverConfig) -> std::result::Result<FairySolution, SolveError<FairySolution>> {
    let problem = if cfg.requires_continuity { p.mollified_for_continuity()? } else { p.clone() };
    let space = StiefelSpace { d: problem.d, m: problem.levels() };
    let eval = |f: &Frame| evaluate_f_pi(&problem, f).ok();
    let best = search_zero(&space, &eval, cfg)
        .ok_or_else(|| MassError::Invalid("no start produced a valid flag".into()))?;
    let e = evaluate(&problem, &best.point)?;
    let residual_norm = norm(&e.residual);
    let sol = FairySolution {
        frame: best.point,
        flag: e.flag,
        residual: e.residual,
        residual_norm,
        dropped: e.dropped,
        start: best.start,
        evaluations: best.evaluations,
    };
    log::debug!("fairy search: residual {residual_norm:e} after {} evaluations", sol.evaluations);
    if residual_norm <= cfg.target {
        Ok(sol)
    } else {
        Err(SolveError::NotConverged { residual: residual_norm, best: Box::new(sol) })
    }
}

/// Unit balls of one level of the rotation construction.
#[derive(Clone, Debug)]
pub struct RotationLevel {
    pub level: usize,
    /// Ball sections at `x_0, ..., x_{k-1}`; the first one is the pivot.
    pub balls: Vec<MassAssignment>,
}

#[derive(Clone, Debug)]
pub struct RotationInstance {
    pub d: usize,
    pub k: usize,
    /// Levels `d-1` down to `k`.
    pub levels: Vec<RotationLevel>,
    /// `(d-2, d-3, ..., k-1, d-1)`.
    pub pi: Vec<usize>,
}

/// Ball centers `x_0 = 0` and `x_j = e_{d+1-j}` (1-based) for `0 < j < k`.
pub fn rotation_centers(d: usize, k: usize) -> Vec<Vector> {
    let mut out = vec![Vector::zeros(d)];
    for j in 1..k {
        out.push(unit(d, d - j));
    }
    out
}

pub fn rotation_instance(d: usize, k: usize) -> Result<RotationInstance> {
    if k == 0 || k > d {
        return Err(MassError::Invalid(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    let centers = rotation_centers(d, k);
    let levels = (k..d)
        .rev()
        .map(|i| {
            let balls = centers
                .iter()
                .map(|c| MassAssignment::ball_section(i + 1, c.clone(), 1.0))
                .collect::<Result<Vec<_>>>()?;
            Ok(RotationLevel { level: i, balls })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pi: Vec<usize> = (k - 1..d - 1).rev().collect();
    pi.push(d - 1);
    Ok(RotationInstance { d, k, levels, pi })
}

/// The flag problem of the rotation construction with `mu` and `fs` on the lowest level.
pub fn rotation_problem(d: usize, k: usize, mu: MassAssignment, fs: Vec<MassAssignment>) -> Result<FairyProblem> {
    let inst = rotation_instance(d, k)?;
    let mut pivots = Vec::new();
    let mut families = Vec::new();
    for level in inst.levels {
        let mut balls = level.balls.into_iter();
        pivots.push(balls.next().expect("x_0 ball"));
        families.push(balls.collect());
    }
    pivots.push(mu);
    families.push(fs);
    FairyProblem::new(d, k, inst.pi, pivots, families)
}

#[derive(Clone, Debug)]
pub struct RotationSolution {
    /// The k-dimensional flat; (k-1)-vertical and through the origin at a zero.
    pub s_k: Flat,
    /// The bisecting (k-1)-flat inside `s_k`.
    pub s_km1: Flat,
    pub fairy: FairySolution,
}

fn rotation_solution(fairy: FairySolution, k: usize) -> RotationSolution {
    let d = fairy.flag.ambient_dim();
    let s_k = if k == d { Flat::whole(d) } else { fairy.flag.flat_of_dim(k).expect("level k").clone() };
    let s_km1 = fairy.flag.lowest().expect("nonempty flag").clone();
    RotationSolution { s_k, s_km1, fairy }
}

/// Finds a (k-1)-vertical linear k-flat and a (k-1)-flat in it bisecting `mu`
/// and all of `fs`.
pub fn solve_rotation(
    d: usize,
    k: usize,
    mu: MassAssignment,
    fs: Vec<MassAssignment>,
    cfg: &SolverConfig,
) -> std::result::Result<RotationSolution, SolveError<RotationSolution>> {
    let p = rotation_problem(d, k, mu, fs)?;
    match solve_fairy(&p, cfg) {
        Ok(s) => Ok(rotation_solution(s, k)),
        Err(SolveError::NotConverged { best, residual }) => {
            Err(SolveError::NotConverged { best: Box::new(rotation_solution(*best, k)), residual })
        }
        Err(SolveError::Problem(e)) => Err(SolveError::Problem(e)),
    }
}

/// Projected unit balls at the origin and `e_1, ..., e_d`, for k-flats.
pub fn lemma24_instance(d: usize, k: usize) -> Result<Vec<MassAssignment>> {
    if k == 0 || k > d {
        return Err(MassError::Invalid(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    let mut centers = vec![Vector::zeros(d)];
    centers.extend((0..d).map(|i| unit(d, i)));
    centers.into_iter().map(|c| MassAssignment::projected_ball(k, c, 1.0)).collect()
}

/// Flag problem asking for a (k-1)-flat bisecting all d+1 projected balls:
/// upper levels are cut through the origin, the lowest level uses the first
/// ball as pivot and the other d as functionals under the rotation permutation.
pub fn lemma24_problem(d: usize, k: usize) -> Result<FairyProblem> {
    let mut balls = lemma24_instance(d, k)?.into_iter();
    let inst = rotation_instance(d, k)?;
    let mut pivots = Vec::new();
    let mut families = Vec::new();
    for level in &inst.levels {
        pivots.push(MassAssignment::ball_section(level.level + 1, Vector::zeros(d), 1.0)?);
        families.push(Vec::new());
    }
    pivots.push(balls.next().expect("origin ball"));
    families.push(balls.collect());
    FairyProblem::overdetermined(d, k, inst.pi, pivots, families)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn disk(c: &[f64]) -> MassAssignment {
        MassAssignment::ball_section(2, v(c), 1.0).unwrap()
    }

    #[test]
    fn first_cut_through_disk_center() {
        let p = FairyProblem::new(
            2,
            1,
            vec![1, 0],
            vec![disk(&[2.0, 0.0]), MassAssignment::projected_ball(1, v(&[0.0, 0.0]), 1.0).unwrap()],
            vec![vec![], vec![]],
        )
        .unwrap();
        let flag = flag_from_frame(&p, &Frame::identity(2, 2)).unwrap();
        let s1 = &flag.levels()[0].flat;
        assert!(s1.contains(&v(&[2.0, 5.0]), 1e-12));
        assert!(s1.contains(&v(&[2.0, -3.0]), 1e-12));
    }

    #[test]
    fn displaced_disk_lies_on_plus_side() {
        let p = FairyProblem::new(
            2,
            1,
            vec![1, 0],
            vec![disk(&[0.0, 0.0]), MassAssignment::projected_ball(1, v(&[0.0, 0.0]), 1.0).unwrap()],
            vec![vec![disk(&[1.0, 0.0])], vec![]],
        )
        .unwrap();
        let r = evaluate_f_pi(&p, &Frame::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(r[0], PI, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_direction_is_reported() {
        let p = lemma24_problem(2, 1).unwrap();
        let dirs = vec![v(&[1.0, 0.0]), v(&[1.0, 0.0])];
        assert_eq!(flag_from_directions(&p, &dirs).unwrap_err(), MassError::DegenerateDirection);
    }

    #[test]
    fn rotation_instance_layout() {
        let inst = rotation_instance(3, 2).unwrap();
        assert_eq!(inst.pi, vec![1, 2]);
        assert_eq!(inst.levels.len(), 1);
        assert_eq!(inst.levels[0].level, 2);
        let centers: Vec<Vector> = inst.levels[0]
            .balls
            .iter()
            .map(|b| match b.kind() {
                MassKind::BallSection { center, .. } => center.clone(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(centers, vec![v(&[0.0, 0.0, 0.0]), v(&[0.0, 0.0, 1.0])]);
        assert!(rotation_instance(4, 1).unwrap().levels.iter().all(|l| l.balls.len() == 1));
        assert!(rotation_instance(3, 3).unwrap().levels.is_empty());
        assert_eq!(rotation_instance(3, 3).unwrap().pi, vec![2]);
    }

    #[test]
    fn lemma_instance_centers() {
        let balls = lemma24_instance(2, 1).unwrap();
        assert_eq!(balls.len(), 3);
        assert_eq!(lemma24_instance(3, 2).unwrap().len(), 4);
    }

    #[test]
    fn too_many_functionals_rejected() {
        let err = FairyProblem::new(
            2,
            1,
            vec![1, 0],
            vec![disk(&[0.0, 0.0]), MassAssignment::projected_ball(1, v(&[0.0, 0.0]), 1.0).unwrap()],
            vec![vec![disk(&[1.0, 0.0]), disk(&[2.0, 0.0])], vec![]],
        );
        assert!(err.is_err());
    }
}
