use hlab_core::phasespace::{lift_near, quotient_dist, torus_delta, torus_dist, wrap};
use hlab_core::QuotientPoint;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn lift_then_wrap_round_trips(x in coord(), y in coord(), z in coord(), rx in coord(), ry in coord(), rz in coord()) {
        let p = wrap(&[x, y, z]).unwrap();
        let v = lift_near(&p, &[rx, ry, rz]).unwrap();
        let back = wrap(v.as_slice()).unwrap();
        prop_assert!(torus_dist(&p, &back).unwrap() < 1e-12);
        for (vi, ri) in v.iter().zip([rx, ry, rz]) {
            prop_assert!((vi - ri).abs() <= 0.5 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn torus_metric_axioms(a in prop::array::uniform3(coord()), b in prop::array::uniform3(coord()), c in prop::array::uniform3(coord())) {
        let (p, q, r) = (wrap(&a).unwrap(), wrap(&b).unwrap(), wrap(&c).unwrap());
        let pq = torus_dist(&p, &q).unwrap();
        prop_assert!(torus_dist(&p, &p).unwrap() == 0.0);
        prop_assert!((pq - torus_dist(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!(pq <= (3.0f64).sqrt() / 2.0 + 1e-12);
        prop_assert!(pq <= torus_dist(&p, &r).unwrap() + torus_dist(&r, &q).unwrap() + 1e-12);
        prop_assert!(torus_delta(&p, &q).unwrap().amax() <= 0.5);
    }

    #[test]
    fn quotient_metric_axioms(a in prop::array::uniform3(coord()), b in prop::array::uniform3(coord()), c in prop::array::uniform3(coord())) {
        let p = QuotientPoint::new(&a[..2], a[2]).unwrap();
        let q = QuotientPoint::new(&b[..2], b[2]).unwrap();
        let r = QuotientPoint::new(&c[..2], c[2]).unwrap();
        let pq = quotient_dist(&p, &q);
        prop_assert!(quotient_dist(&p, &p) < 1e-15);
        prop_assert!((pq - quotient_dist(&q, &p)).abs() < 1e-12);
        prop_assert!(pq <= quotient_dist(&p, &r) + quotient_dist(&r, &q) + 1e-12);
    }

    #[test]
    fn gluing_identifies_flipped_points(x in coord(), y in coord(), t in -3.0..3.0f64) {
        let p = QuotientPoint::new(&[x, y], t).unwrap();
        let q = QuotientPoint::new(&[-x, -y], t + 1.0).unwrap();
        prop_assert!(quotient_dist(&p, &q) < 1e-9);
    }
}
