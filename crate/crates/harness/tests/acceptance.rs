//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! `cargo test -p masspart --release --test acceptance -- --nocapture --test-threads 1`

use std::path::Path;
use std::time::{Duration, Instant};

use masspart::demo;
use masspart::generate;
use masspart::instance::{AssignmentSpec, Built, Instance, Problem};
use masspart::oracle::{grid_oracle, grid_oracle_near, lemma24_flag_floor};
use masspart::report::{FlatSpec, Solution, Status, Verdict};
use masspart::run::solve;
use masspart::verify::verify;
use masspart_core::flagsolve::{evaluate_f_pi, solve_fairy};
use masspart_core::geom::{sub_flat, Flat, Vector};
use masspart_core::kinetic::{parity_det_closed, parity_det_direct};
use masspart_core::masses::{assign, halfspace_mass, median_offset, MassAssignment};
use masspart_core::search::{random_frame, start_rng};
use masspart_core::special::{ball_cap_volume, ball_volume};
use masspart_core::transversal::{evaluate_transversal_map, tukey_depth};
use rand::seq::SliceRandom;
use statrs::distribution::{ContinuousCDF, Normal};

const SIGN_TOL: f64 = 1e-12;
const GAP_TOL: f64 = 1e-6;
const ORACLE_SLACK: f64 = 1e-6;
const LEMMA_REL: f64 = 0.10;
const DET_TOL: f64 = 1e-10;
const DET_FLOOR: f64 = 1e-8;
const ROOT_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-10;

fn outcome(n: usize, what: &str, ok: bool, detail: String, elapsed: Duration, limit: Duration) {
    let ok = ok && elapsed <= limit;
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n}: {verdict} {what} ({detail}; {:.1}s of {}s)", elapsed.as_secs_f64(), limit.as_secs());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn fixture(name: &str) -> Instance {
    Instance::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)).unwrap()
}

fn flat(f: &FlatSpec) -> Flat {
    f.to_flat().unwrap()
}

fn vector(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

/// Closed-side gap of a blurred cloud on a half of its carrier, computed from
/// the normal law directly: `sum Phi(s_i / sigma) - Phi(-s_i / sigma)`.
fn blurred_gap(spec: &AssignmentSpec, base: &Vector, normal: &Vector) -> f64 {
    let AssignmentSpec::Cloud { points, weights, sigma: Some(sigma), .. } = spec else {
        panic!("blurred cloud expected")
    };
    let phi = Normal::new(0.0, *sigma).unwrap();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let w = weights.as_ref().map_or(1.0, |w| w[i]);
            let s = (vector(p) - base).dot(normal);
            w * (phi.cdf(s) - phi.cdf(-s))
        })
        .sum()
}

fn signs(mask: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

#[test]
fn criterion_01_sign_equivariance() {
    let t0 = Instant::now();
    let (mut checked, mut worst) = (0usize, 0.0f64);
    for seed in 0..100u64 {
        let d = 2 + (seed as usize % 3);
        let k = 1 + (seed as usize / 3) % d;
        let mut pi: Vec<usize> = (k - 1..d).collect();
        pi.shuffle(&mut generate::rng(seed));
        let sigma = (seed % 2 == 0).then_some(0.1);
        let Built::Flag(p) = generate::fairy(seed, d, k, pi, 5, sigma).build().unwrap() else { unreachable!() };
        let m = p.levels();
        let frame = random_frame(d, m, &mut start_rng(seed, 0));
        let base = evaluate_f_pi(&p, &frame).unwrap();
        for mask in 0..1usize << m {
            let s = signs(mask, m);
            let got = evaluate_f_pi(&p, &frame.with_signs(&s)).unwrap();
            // frame vector at position `slot` flips the block of that slot
            for slot in 0..m {
                let off = p.block_offset(slot);
                for i in off..off + p.block_len(slot) {
                    worst = worst.max((got[i] - s[slot] * base[i]).abs());
                }
            }
            checked += 1;
        }
    }
    for seed in 0..100u64 {
        let (d, k, lambda) = [(3, 2, 1), (3, 2, 0), (4, 3, 1), (4, 2, 1)][seed as usize % 4];
        let sigma = (seed % 2 == 1).then_some(0.1);
        let Built::Transversal(p) = generate::transversal(seed, d, k, lambda, 5, sigma).build().unwrap() else {
            unreachable!()
        };
        let m = p.frame_len();
        let frame = random_frame(d, m, &mut start_rng(seed, 1));
        let base = evaluate_transversal_map(&p, &frame).unwrap();
        for mask in 0..1usize << m {
            let s = signs(mask, m);
            let got = evaluate_transversal_map(&p, &frame.with_signs(&s)).unwrap();
            // block i (label i + 1) has length d - i - 1
            for i in 0..m {
                let off = p.block_offset(i + 1);
                for j in off..off + d - i - 1 {
                    worst = worst.max((got[j] - s[i] * base[j]).abs());
                }
            }
            checked += 1;
        }
    }
    outcome(
        1,
        "blockwise sign action",
        worst <= SIGN_TOL,
        format!("{checked} sign vectors, worst deviation {worst:.1e}"),
        t0.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_02_trivial_permutation_is_iterated_ham_sandwich() {
    let t0 = Instant::now();
    let (mut worst, mut failures) = (0.0f64, Vec::new());
    for seed in 0..20u64 {
        let d = if seed < 10 { 2 } else { 3 };
        let inst = generate::fairy(seed, d, 1, (0..d).rev().collect(), 6, Some(0.1));
        let report = solve(&inst, None).unwrap();
        let Problem::Fairy { levels: specs, .. } = &inst.problem else { unreachable!() };
        let Some(Solution::Flag { levels, .. }) = &report.solution else { unreachable!() };
        if report.status != Status::Converged {
            failures.push(seed);
        }
        // level s must bisect its pivot and every functional inside S_{d-s}
        for (spec, cut) in specs.iter().zip(levels) {
            let child = flat(&cut.flat);
            let n = vector(&cut.normal);
            for m in std::iter::once(&spec.pivot).chain(&spec.functionals) {
                worst = worst.max(blurred_gap(m, child.base(), &n).abs());
            }
        }
    }
    outcome(
        2,
        "trivial permutation matches level-by-level ham-sandwich cuts",
        worst <= GAP_TOL && failures.is_empty(),
        format!("20 instances, worst level gap {worst:.1e}, unconverged {failures:?}"),
        t0.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_03_nontrivial_permutation() {
    let t0 = Instant::now();
    let (mut worst, mut worst_gap, mut failures) = (0.0f64, 0.0f64, Vec::new());
    for seed in 0..20u64 {
        let inst = generate::fairy(seed, 3, 1, vec![1, 2, 0], 6, Some(0.1));
        let report = solve(&inst, None).unwrap();
        let solver = report.solver_residual_norm.unwrap();
        let near = grid_oracle_near(&inst, report.solution.as_ref().unwrap(), 0.05, 9).unwrap();
        worst = worst.max(solver);
        worst_gap = worst_gap.max(near.min_residual - solver);
        if report.status != Status::Converged || solver > GAP_TOL || near.min_residual > solver + ORACLE_SLACK {
            failures.push(seed);
        }
    }
    outcome(
        3,
        "permutation (1, 2, 0) solved and confirmed by the local grid oracle",
        failures.is_empty(),
        format!("20 instances, worst residual {worst:.1e}, worst oracle excess {worst_gap:.1e}, failing {failures:?}"),
        t0.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_04_rotation_flags_are_vertical() {
    let t0 = Instant::now();
    let (mut worst_geo, mut worst_gap, mut failures) = (0.0f64, 0.0f64, Vec::new());
    for seed in 0..10u64 {
        let inst = generate::rotation(seed, 3, 2, 6, Some(0.1));
        let report = solve(&inst, None).unwrap();
        let Some(Solution::Flag { levels, .. }) = &report.solution else { unreachable!() };
        let Problem::Rotation { mu, functionals, .. } = &inst.problem else { unreachable!() };
        let s2 = flat(&levels[0].flat);
        let e3 = vector(&[0.0, 0.0, 1.0]);
        let off_vertical = (&e3 - s2.vector_at(&s2.direction_coords(&e3))).norm();
        let off_origin = s2.distance(&Vector::zeros(3));
        let s1 = flat(&levels[1].flat);
        let n = vector(&levels[1].normal);
        let gaps = std::iter::once(mu).chain(functionals).map(|m| blurred_gap(m, s1.base(), &n).abs());
        let gap = gaps.fold(0.0, f64::max);
        worst_geo = worst_geo.max(off_vertical).max(off_origin);
        worst_gap = worst_gap.max(gap);
        if report.status != Status::Converged || off_vertical > GAP_TOL || off_origin > GAP_TOL || gap > GAP_TOL {
            failures.push(seed);
        }
    }
    outcome(
        4,
        "d=3 k=2 rotation flags: S_2 vertical through 0, S_1 bisects all",
        failures.is_empty(),
        format!("10 instances, worst geometry {worst_geo:.1e}, worst gap {worst_gap:.1e}, failing {failures:?}"),
        t0.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_05_three_disks_have_no_bisecting_flag() {
    let t0 = Instant::now();
    let inst = fixture("lemma24_d2.json");
    let floor = grid_oracle(&inst, 200).unwrap();
    let all_flags = lemma24_flag_floor(200).unwrap();
    let Built::Flag(p) = inst.build().unwrap() else { unreachable!() };
    let (status, best) = match solve_fairy(&p, &inst.config.solver()) {
        Ok(s) => ("converged", s.residual_norm),
        Err(masspart_core::error::SolveError::NotConverged { residual, .. }) => ("not-converged", residual),
        Err(e) => panic!("{e}"),
    };
    let rel = (best - floor.min_residual).abs() / floor.min_residual;
    outcome(
        5,
        "three disks: positive residual floor and a non-converged solver near it",
        floor.min_residual > 0.0 && all_flags.min_residual > 0.0 && status == "not-converged" && rel <= LEMMA_REL,
        format!(
            "frame-chart floor {:.6}, all-flag floor {:.6}, solver {status} at {best:.6} ({:.2}% off)",
            floor.min_residual,
            all_flags.min_residual,
            100.0 * rel
        ),
        t0.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_06_parity_determinant() {
    let t0 = Instant::now();
    let (mut worst, mut smallest_even) = (0.0f64, f64::INFINITY);
    for d in 1..=4usize {
        for i in 0..500 {
            let t = -10.0 + 20.0 * i as f64 / 499.0;
            let (a, b) = (parity_det_closed(d, t), parity_det_direct(d, t));
            worst = worst.max((a - b).abs());
            if d % 2 == 0 {
                smallest_even = smallest_even.min(b.abs());
            }
        }
    }
    let half = parity_det_direct(1, 0.5);
    let brackets = parity_det_direct(1, 0.5 - ROOT_TOL) > 0.0 && parity_det_direct(1, 0.5 + ROOT_TOL) < 0.0;
    outcome(
        6,
        "closed-form determinant, even-d nonvanishing, odd-d root at 1/2",
        worst <= DET_TOL && smallest_even > DET_FLOOR && half.abs() <= ROOT_TOL && brackets,
        format!("worst |closed - direct| {worst:.1e}, min even |det| {smallest_even:.3e}, d=1 det(1/2) {half:.1e}"),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_07_moving_points_dichotomy() {
    let t0 = Instant::now();
    let floor = grid_oracle(&demo::fig5().unwrap(), 500).unwrap();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for seed in 1..=3u64 {
        let inst = generate::dynamic(seed, 3, 6, Some(0.1));
        let report = solve(&inst, None).unwrap();
        let v = verify(&inst, report.solution.as_ref().unwrap()).unwrap();
        worst = worst.max(v.residual_norm);
        if report.status != Status::Converged || !v.passes(GAP_TOL) {
            failures.push(seed);
        }
    }
    outcome(
        7,
        "three moving points have a positive floor; odd d=3 has a verified zero",
        floor.min_residual > 0.0 && failures.is_empty(),
        format!(
            "floor {:.4} over {} evaluations, d=3 worst verified residual {worst:.1e}, failing {failures:?}",
            floor.min_residual, floor.evaluations
        ),
        t0.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_08_line_families_cut_or_share_a_speed() {
    let t0 = Instant::now();
    let (mut interior, mut boundary, mut failures) = (0, 0, Vec::new());
    for seed in 1..=10u64 {
        let inst = generate::horizontal(seed, 3, 6, Some(0.1));
        let report = solve(&inst, Some(64)).unwrap();
        let geometry_ok = report.checks.iter().all(|c| c.pass);
        match report.solution.as_ref().unwrap() {
            Solution::HorizontalCut { .. } => {
                interior += 1;
                let named = ["S_{d-1} contains e_d", "S_{d-2} is horizontal"];
                if !named.iter().all(|n| report.checks.iter().any(|c| c.name == *n && c.pass)) {
                    failures.push(seed);
                }
            }
            Solution::SharedSpeed { .. } => boundary += 1,
            _ => failures.push(seed),
        }
        let oracle = report.oracle.as_ref().unwrap();
        let solver = report.solver_residual_norm.unwrap();
        if report.verdict != Verdict::Pass
            || report.residual_norm > GAP_TOL
            || !geometry_ok
            || solver - oracle.min_residual > ORACLE_SLACK
        {
            failures.push(seed);
        }
    }
    outcome(
        8,
        "line families: verified vertical/horizontal cut or shared median speed",
        failures.is_empty(),
        format!("10 instances, {interior} interior, {boundary} boundary, failing {failures:?}"),
        t0.elapsed(),
        Duration::from_secs(300),
    );
}

/// Minimum closed half-plane count through `x` over every combinatorially distinct normal.
fn brute_depth(pts: &[Vector], x: &Vector) -> f64 {
    let rel: Vec<Vector> = pts.iter().map(|p| p - x).collect();
    let mut angles = vec![0.0];
    for r in rel.iter().filter(|r| r.norm() > 0.0) {
        let a = r[1].atan2(r[0]);
        for s in [-1.0, 1.0] {
            angles.push((a + s * std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::TAU));
        }
    }
    angles.sort_by(f64::total_cmp);
    let mut probes = angles.clone();
    probes.extend(angles.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    probes.push(0.5 * (angles[angles.len() - 1] + angles[0] + std::f64::consts::TAU));
    let count = |t: f64| {
        let (s, c) = t.sin_cos();
        rel.iter().filter(|r| r[0] * c + r[1] * s >= -1e-12).count() as f64
    };
    probes.into_iter().map(count).fold(f64::INFINITY, f64::min) / pts.len() as f64
}

#[test]
fn criterion_09_center_transversal() {
    let t0 = Instant::now();
    let (mut least_depth, mut enumerated, mut failures) = (f64::INFINITY, 0usize, Vec::new());
    for seed in 1..=10u64 {
        let inst = generate::transversal(seed, 3, 2, 1, 6, Some(0.1));
        let report = solve(&inst, None).unwrap();
        let Some(Solution::Transversal { s_k, l, .. }) = &report.solution else { unreachable!() };
        let Problem::Transversal { assignments, .. } = &inst.problem else { unreachable!() };
        let (s2, l) = (flat(s_k), flat(l));
        let e3 = vector(&[0.0, 0.0, 1.0]);
        let vertical = (&e3 - s2.vector_at(&s2.direction_coords(&e3))).norm() <= GAP_TOL;
        let through_origin = s2.distance(&Vector::zeros(3)) <= GAP_TOL;
        // the quotient of S_2 by L is spanned by the unit vector of S_2 orthogonal to L
        let along = &l.basis()[0];
        let q = s2.basis().iter().map(|b| b - along * b.dot(along)).max_by(|a, b| a.norm().total_cmp(&b.norm()));
        let q = q.unwrap().normalize();
        let mut ok = vertical && through_origin && report.status == Status::Converged;
        for spec in assignments {
            let AssignmentSpec::Cloud { points, .. } = spec else { unreachable!() };
            let up = blurred_gap(spec, l.base(), &q);
            let depth = 0.5 - up.abs() / (2.0 * points.len() as f64);
            least_depth = least_depth.min(depth);
            ok &= depth >= 0.5 - GAP_TOL;

            // raw atoms on S_2, in S_2 coordinates
            let raw = MassAssignment::cloud(3, 2, &points.iter().map(|p| vector(p)).collect::<Vec<_>>()).unwrap();
            let m = assign(&raw, &s2).unwrap();
            let atoms: Vec<Vector> = m.atoms().unwrap().into_iter().map(|(x, _)| x).collect();
            let mut probes = atoms.clone();
            probes.push(s2.coords(l.base()));
            probes.push(atoms.iter().sum::<Vector>() / atoms.len() as f64);
            for x in &probes {
                ok &= tukey_depth(&m, x).unwrap() == brute_depth(&atoms, x);
                enumerated += 1;
            }
        }
        if !ok {
            failures.push(seed);
        }
    }
    outcome(
        9,
        "(3,2,1) transversal: depth >= 1/2, 1-vertical through 0, exact depth enumeration",
        failures.is_empty(),
        format!("10 instances, least depth {least_depth:.7}, {enumerated} depths enumerated, failing {failures:?}"),
        t0.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_10_mass_invariants() {
    let t0 = Instant::now();
    let mut worst_cap = 0.0f64;
    for k in 1..=6 {
        for i in 0..=200 {
            let r = 0.5 + i as f64 / 100.0;
            let h = r * (-1.0 + 2.0 * i as f64 / 200.0);
            let sum = ball_cap_volume(k, h, r) + ball_cap_volume(k, -h, r);
            worst_cap = worst_cap.max((sum - ball_volume(k, r)).abs());
        }
    }
    let mut antisymmetric = true;
    let mut worst_conservation = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = generate::rng(seed);
        let AssignmentSpec::Cloud { points, .. } = generate::random_cloud(&mut rng, 2, 2, 7, None) else {
            unreachable!()
        };
        let pts: Vec<Vector> = points.iter().map(|p| vector(p)).collect();
        let m = assign(&MassAssignment::cloud(2, 2, &pts).unwrap(), &Flat::whole(2)).unwrap();
        let a = seed as f64 * 0.7;
        let u = vector(&[a.cos(), a.sin()]);
        let c = median_offset(&m, &u).unwrap();
        antisymmetric &= c == -median_offset(&m, &-&u).unwrap();
        let (_, plus, minus) = sub_flat(&Flat::whole(2), &u, c).unwrap();
        let on = pts.iter().filter(|p| (p.dot(&u) - c).abs() <= 1e-12).count() as f64;
        let total = halfspace_mass(&m, &plus).unwrap() + halfspace_mass(&m, &minus).unwrap() - on;
        worst_conservation = worst_conservation.max((total - pts.len() as f64).abs());
    }
    let line: Vec<Vector> = [0.0, 1.0, 2.0, 5.0].iter().map(|x| vector(&[*x])).collect();
    let m = assign(&MassAssignment::cloud(1, 1, &line).unwrap(), &Flat::whole(1)).unwrap();
    let mid = median_offset(&m, &vector(&[1.0])).unwrap();
    outcome(
        10,
        "cap complementarity, median antisymmetry, conservation, midpoint rule",
        worst_cap <= MASS_TOL && antisymmetric && worst_conservation <= MASS_TOL && mid == 1.5,
        format!("cap error {worst_cap:.1e}, conservation error {worst_conservation:.1e}, median of {{0,1,2,5}} = {mid}"),
        t0.elapsed(),
        Duration::from_secs(10),
    );
}
