//! Solve, oracle and verify runs producing reports.

use std::time::Instant;

use log::info;
use masspart_core::error::SolveError;
use masspart_core::flagsolve::solve_fairy;
use masspart_core::kinetic::{dynamic_solve, horizontal_solve, translated_line_solve};
use masspart_core::transversal::solve_center_transversal;

use crate::instance::{Built, Instance};
use crate::oracle::grid_oracle;
use crate::report::{Report, Solution, Status, Verdict, REPORT_VERSION};
use crate::verify::verify;
use crate::HarnessError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VERIFY_FAIL: i32 = 3;

/// Exit code of a finished report.
pub fn exit_code(r: &Report) -> i32 {
    match (r.status, r.verdict) {
        (Status::NotConverged, _) => EXIT_NOT_CONVERGED,
        (_, Verdict::Pass) => EXIT_PASS,
        (_, Verdict::Fail) => EXIT_VERIFY_FAIL,
    }
}

struct Solved {
    solution: Solution,
    converged: bool,
    solver_norm: f64,
    warnings: Vec<String>,
}

fn unpack<T: std::fmt::Debug>(r: Result<T, SolveError<T>>) -> Result<(T, bool), HarnessError> {
    match r {
        Ok(s) => Ok((s, true)),
        Err(SolveError::NotConverged { best, .. }) => Ok((*best, false)),
        Err(SolveError::Problem(e)) => Err(e.into()),
    }
}

fn run_solver(built: &Built, instance: &Instance) -> Result<Solved, HarnessError> {
    let cfg = instance.config.solver();
    Ok(match built {
        Built::Flag(p) => {
            let (s, converged) = unpack(solve_fairy(p, &cfg))?;
            Solved { solution: Solution::from_fairy(&s), converged, solver_norm: s.residual_norm, warnings: Vec::new() }
        }
        Built::Transversal(p) => {
            let (s, converged) = unpack(solve_center_transversal(p, &cfg))?;
            Solved { solution: Solution::from_transversal(&s), converged, solver_norm: s.residual_norm, warnings: Vec::new() }
        }
        Built::Horizontal(f) => {
            let (s, converged) = unpack(horizontal_solve(f, &cfg))?;
            Solved { solution: Solution::from_horizontal(&s), converged, solver_norm: s.residual_norm, warnings: Vec::new() }
        }
        Built::Dynamic(f) => {
            let (s, converged) = unpack(dynamic_solve(f, &cfg))?;
            let warnings = s.warnings.iter().map(|w| w.to_string()).collect();
            Solved { solution: Solution::from_dynamic(&s), converged, solver_norm: s.residual_norm, warnings }
        }
        Built::TranslatedLine(f) => {
            let (s, converged) = unpack(translated_line_solve(f, &cfg))?;
            Solved { solution: Solution::from_translated(&s), converged, solver_norm: s.residual_norm, warnings: Vec::new() }
        }
    })
}

fn elapsed_ms(t0: Instant) -> f64 {
    t0.elapsed().as_secs_f64() * 1e3
}

/// Runs the solver for the instance, verifies the result and, with
/// `resolution`, compares against the grid oracle.
pub fn solve(instance: &Instance, resolution: Option<usize>) -> Result<Report, HarnessError> {
    let t0 = Instant::now();
    let built = instance.build()?;
    let solved = run_solver(&built, instance)?;
    info!("{}: solver residual {:e}", instance.problem.kind(), solved.solver_norm);
    let v = verify(instance, &solved.solution)?;
    let target = instance.config.target;
    let mut warnings = solved.warnings;
    let mut oracle = None;
    let mut oracle_ok = true;
    if let Some(res) = resolution {
        match grid_oracle(instance, res) {
            Ok(o) => {
                let gap = (solved.solver_norm - o.min_residual).max(0.0);
                oracle_ok = gap <= target;
                oracle = Some(o.summary());
            }
            Err(HarnessError::SearchSpaceTooLarge(n)) => {
                warnings.push(format!("oracle skipped: {n} chart parameters"));
            }
            Err(e) => return Err(e),
        }
    }
    let status = if solved.converged { Status::Converged } else { Status::NotConverged };
    let pass = solved.converged && v.passes(target) && oracle_ok;
    Ok(Report {
        version: REPORT_VERSION,
        kind: instance.problem.kind().to_string(),
        status,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        solution: Some(solved.solution),
        residual: v.residual,
        residual_norm: v.residual_norm,
        solver_residual_norm: Some(solved.solver_norm),
        side_masses: v.side_masses,
        checks: v.checks,
        oracle,
        dropped: v.dropped,
        warnings,
        wall_time_ms: elapsed_ms(t0),
    })
}

/// Grid oracle alone; the report's residual is the oracle's refined minimum.
pub fn oracle_only(instance: &Instance, resolution: usize) -> Result<Report, HarnessError> {
    let t0 = Instant::now();
    let o = grid_oracle(instance, resolution)?;
    info!("{}: oracle floor {:e}", instance.problem.kind(), o.min_residual);
    Ok(Report {
        version: REPORT_VERSION,
        kind: instance.problem.kind().to_string(),
        status: Status::OracleOnly,
        verdict: Verdict::Pass,
        solution: None,
        residual: o.residual.clone(),
        residual_norm: o.min_residual,
        solver_residual_norm: None,
        side_masses: Vec::new(),
        checks: Vec::new(),
        oracle: Some(o.summary()),
        dropped: 0,
        warnings: Vec::new(),
        wall_time_ms: elapsed_ms(t0),
    })
}

/// Verifies a supplied solution.
pub fn verify_only(instance: &Instance, solution: Solution) -> Result<Report, HarnessError> {
    let t0 = Instant::now();
    let v = verify(instance, &solution)?;
    let pass = v.passes(instance.config.target);
    Ok(Report {
        version: REPORT_VERSION,
        kind: instance.problem.kind().to_string(),
        status: Status::Supplied,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        solution: Some(solution),
        residual: v.residual,
        residual_norm: v.residual_norm,
        solver_residual_norm: None,
        side_masses: v.side_masses,
        checks: v.checks,
        oracle: None,
        dropped: v.dropped,
        warnings: Vec::new(),
        wall_time_ms: elapsed_ms(t0),
    })
}
