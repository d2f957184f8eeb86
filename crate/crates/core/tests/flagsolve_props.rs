use masspart_core::flagsolve::{evaluate, evaluate_f_pi, gap, sign_action, FairyProblem};
use masspart_core::geom::Vector;
use masspart_core::masses::{mollify, MassAssignment};
use masspart_core::search::{random_frame, start_rng};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn point(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.random_range(-1.0..1.0)))
}

/// Pivots avoid ball sections, which can miss a flat entirely.
fn assignment(rng: &mut ChaCha8Rng, d: usize, dim: usize, pivot: bool) -> MassAssignment {
    match rng.random_range(0..3) {
        0 => {
            let pts: Vec<Vector> = (0..rng.random_range(3..8)).map(|_| point(rng, d)).collect();
            MassAssignment::cloud(d, dim, &pts).unwrap()
        }
        1 => {
            let pts: Vec<Vector> = (0..4).map(|_| point(rng, d)).collect();
            mollify(&MassAssignment::cloud(d, dim, &pts).unwrap(), 0.2).unwrap()
        }
        _ if pivot => MassAssignment::projected_ball(dim, point(rng, d), 0.5).unwrap(),
        _ => MassAssignment::ball_section(dim, point(rng, d) * 0.3, 1.0).unwrap(),
    }
}

/// A random problem with a random permutation and full functional families.
fn problem(seed: u64, d: usize, k: usize) -> FairyProblem {
    let mut rng = start_rng(seed, 1000);
    let mut pi: Vec<usize> = (k - 1..d).collect();
    pi.shuffle(&mut rng);
    let levels = d - k + 1;
    let pivots = (0..levels).map(|s| assignment(&mut rng, d, d - s, true)).collect();
    let families = (0..levels).map(|s| (0..pi[s]).map(|_| assignment(&mut rng, d, d - s, false)).collect()).collect();
    FairyProblem::new(d, k, pi, pivots, families).unwrap()
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=4).prop_flat_map(|d| (Just(d), 1..=d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn residual_map_is_sign_equivariant(seed in any::<u64>(), (d, k) in dims(), mask in any::<u32>()) {
        let p = problem(seed, d, k);
        let frame = random_frame(d, p.levels(), &mut start_rng(seed, 1));
        let signs: Vec<f64> = (0..p.levels()).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let base = evaluate(&p, &frame).unwrap();
        let flipped = evaluate(&p, &frame.with_signs(&signs)).unwrap();
        let want = sign_action(&p, &signs, &base.residual);
        prop_assert_eq!(want.len(), p.residual_len());
        for (a, b) in flipped.residual.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12, "{:?} vs {:?}", flipped.residual, want);
        }
        for (a, b) in base.flag.levels().iter().zip(flipped.flag.levels()) {
            prop_assert!(a.flat.approx_eq(&b.flat, 1e-12));
        }
    }

    #[test]
    fn every_level_bisects_its_pivot(seed in any::<u64>(), (d, k) in dims()) {
        let p = problem(seed, d, k);
        let frame = random_frame(d, p.levels(), &mut start_rng(seed, 2));
        let flag = evaluate(&p, &frame).unwrap().flag;
        prop_assert_eq!(flag.levels().len(), p.levels());
        for (s, level) in flag.levels().iter().enumerate() {
            prop_assert_eq!(level.flat.dim(), d - 1 - s);
            prop_assert!(flag.parent(s).contains_flat(&level.flat, 1e-9));
            let (plus, minus) = flag.halves(s);
            let (g, _) = gap(p.pivot(s), &plus, &minus).unwrap();
            prop_assert!(g.abs() <= 1e-9, "level {s}: gap {g}");
        }
        prop_assert_eq!(evaluate_f_pi(&p, &frame).unwrap().len(), p.residual_len());
    }
}
