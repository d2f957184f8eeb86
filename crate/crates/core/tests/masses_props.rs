use masspart_core::geom::{sub_flat, Flat, Vector};
use masspart_core::masses::{
    assign, halfspace_mass, median_offset, mollify, MassAssignment, WeightedLine,
};
use masspart_core::search::frame_from_angles;
use masspart_core::special::{ball_cap_volume, ball_volume};
use proptest::prelude::*;

fn int_points(d: usize, n: usize) -> impl Strategy<Value = Vec<Vector>> {
    prop::collection::vec(prop::collection::vec(-3i32..=3, d), 1..=n)
        .prop_map(|rows| rows.into_iter().map(|r| Vector::from_iterator(r.len(), r.into_iter().map(f64::from))).collect())
}

fn unit2() -> impl Strategy<Value = Vector> {
    (0.0f64..std::f64::consts::TAU).prop_map(|a| Vector::from_vec(vec![a.cos(), a.sin()]))
}

/// Axis-aligned and diagonal cut normals hit integer atoms exactly.
fn lattice_unit2() -> impl Strategy<Value = Vector> {
    prop::sample::select(vec![(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0)])
        .prop_map(|(a, b): (f64, f64)| {
            let n = (a * a + b * b).sqrt();
            Vector::from_vec(vec![a / n, b / n])
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cap_volumes_are_complementary(k in 1usize..=6, t in -1.0f64..=1.0, r in 0.1f64..3.0) {
        let h = t * r;
        let sum = ball_cap_volume(k, h, r) + ball_cap_volume(k, -h, r);
        prop_assert!((sum - ball_volume(k, r)).abs() <= 1e-10 * ball_volume(k, r).max(1.0));
    }

    #[test]
    fn discrete_mass_is_conserved(pts in int_points(2, 12), n in lattice_unit2(), c in -3i32..=3) {
        let a = MassAssignment::cloud(2, 2, &pts).unwrap();
        let m = assign(&a, &Flat::whole(2)).unwrap();
        let offset = f64::from(c) / if n[0] != 0.0 && n[1] != 0.0 { 2f64.sqrt() } else { 1.0 };
        let (_, plus, minus) = sub_flat(&Flat::whole(2), &n, offset).unwrap();
        let on = pts.iter().filter(|p| (p.dot(&n) - offset).abs() <= 1e-9).count() as f64;
        let total = halfspace_mass(&m, &plus).unwrap() + halfspace_mass(&m, &minus).unwrap() - on;
        prop_assert_eq!(total, pts.len() as f64);
    }

    #[test]
    fn smooth_mass_is_conserved(pts in int_points(2, 8), n in unit2(), c in -3.0f64..3.0, sigma in 0.05f64..1.0) {
        let a = mollify(&MassAssignment::cloud(2, 2, &pts).unwrap(), sigma).unwrap();
        let m = assign(&a, &Flat::whole(2)).unwrap();
        let (_, plus, minus) = sub_flat(&Flat::whole(2), &n, c).unwrap();
        let total = halfspace_mass(&m, &plus).unwrap() + halfspace_mass(&m, &minus).unwrap();
        prop_assert!((total - pts.len() as f64).abs() <= 1e-9);
    }

    #[test]
    fn ball_section_mass_is_conserved(cx in -1.0f64..1.0, cy in -1.0f64..1.0, n in unit2(), c in -1.5f64..1.5) {
        let a = MassAssignment::ball_section(2, Vector::from_vec(vec![cx, cy]), 1.0).unwrap();
        let m = assign(&a, &Flat::whole(2)).unwrap();
        let (_, plus, minus) = sub_flat(&Flat::whole(2), &n, c).unwrap();
        let total = halfspace_mass(&m, &plus).unwrap() + halfspace_mass(&m, &minus).unwrap();
        prop_assert!((total - std::f64::consts::PI).abs() <= 1e-12);
    }

    #[test]
    fn median_is_antisymmetric(pts in int_points(2, 9), u in unit2(), sigma in prop::option::of(0.05f64..1.0)) {
        let mut a = MassAssignment::cloud(2, 2, &pts).unwrap();
        if let Some(s) = sigma {
            a = mollify(&a, s).unwrap();
        }
        let m = assign(&a, &Flat::whole(2)).unwrap();
        let (p, q) = (median_offset(&m, &u).unwrap(), median_offset(&m, &-&u).unwrap());
        prop_assert_eq!(p, -q);
    }

    #[test]
    fn assign_commutes_with_isometries(
        pts in int_points(3, 6),
        angles in prop::collection::vec(-3.0f64..3.0, 3),
        shift in prop::collection::vec(-2.0f64..2.0, 3),
        plane in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let q = frame_from_angles(3, 3, &angles).matrix();
        let t = Vector::from_vec(shift);
        let g = |x: &Vector| &q * x + &t;
        let dirs = [Vector::from_column_slice(&plane[0..3]), Vector::from_column_slice(&plane[3..6])];
        let Ok(flat) = Flat::through(Vector::from_column_slice(&plane[6..9]), &dirs) else { return Ok(()) };
        let moved = Flat::through(g(flat.base()), &flat.basis().iter().map(|b| &q * b).collect::<Vec<_>>()).unwrap();

        let a = MassAssignment::cloud(3, 2, &pts).unwrap();
        let b = MassAssignment::cloud(3, 2, &pts.iter().map(g).collect::<Vec<_>>()).unwrap();
        let xa = assign(&a, &flat).unwrap().atoms().unwrap();
        let xb = assign(&b, &moved).unwrap().atoms().unwrap();
        for ((x, _), (y, _)) in xa.iter().zip(&xb) {
            prop_assert!((g(&flat.point_at(x)) - moved.point_at(y)).norm() <= 1e-9);
        }

        // lines against a hyperplane
        let lines: Vec<WeightedLine> = pts
            .iter()
            .zip(pts.iter().rev())
            .map(|(p, r)| {
                let dir = Vector::from_vec(vec![r[0] + 0.5, r[1] - 0.25, 1.0]).normalize();
                WeightedLine { point: p.clone(), direction: dir, weight: 1.0 }
            })
            .collect();
        let mapped: Vec<WeightedLine> = lines
            .iter()
            .map(|l| WeightedLine { point: g(&l.point), direction: &q * &l.direction, weight: 1.0 })
            .collect();
        let la = MassAssignment::line_family(3, lines).unwrap();
        let lb = MassAssignment::line_family(3, mapped).unwrap();
        let ma = assign(&la, &flat).unwrap();
        let mb = assign(&lb, &moved).unwrap();
        prop_assert_eq!(ma.dropped(), mb.dropped());
        if let (Some(xa), Some(xb)) = (ma.atoms(), mb.atoms()) {
            for ((x, _), (y, _)) in xa.iter().zip(&xb) {
                let (u, w) = (g(&flat.point_at(x)), moved.point_at(y));
                prop_assert!((&u - &w).norm() <= 1e-9 * (1.0 + u.norm()), "{u} vs {w}");
            }
        }
    }
}

#[test]
fn midpoint_median_of_four_atoms() {
    let pts: Vec<Vector> = [0.0, 1.0, 2.0, 5.0].iter().map(|x| Vector::from_vec(vec![*x])).collect();
    let m = assign(&MassAssignment::cloud(1, 1, &pts).unwrap(), &Flat::whole(1)).unwrap();
    assert_eq!(median_offset(&m, &Vector::from_vec(vec![1.0])).unwrap(), 1.5);
}
