use hlab_core::conjugacy::{
    anosov_base_conjugacy, conjugacy_field_center, conjugacy_field_stable, leaf_conjugacy_center,
    leaf_conjugacy_stable, leaf_expansivity_probe, leaf_intersection_su, leaf_separation, suspension_holonomy,
    AmalgamSpec, TransversalFamily,
};
use hlab_core::phasespace::{torus_dist, wrap, TorusPoint};
use hlab_core::systems::{FiberShape, CAT};
use hlab_core::{LabError, SuspensionLoop, SystemSpec};

fn base_of(p: &TorusPoint) -> TorusPoint {
    wrap(&[p.get(0), p.get(1)]).unwrap()
}

fn skew_pair(delta: f64) -> (SystemSpec, SystemSpec) {
    let f = SystemSpec::skew(0.05, FiberShape::SinB1).unwrap();
    let g = SystemSpec::perturbed_skew(delta, 0.05, FiberShape::SinB1).unwrap();
    (f, g)
}

#[test]
fn stable_conjugacy_matches_structural_stability() {
    let g = SystemSpec::perturbed_cat(0.01).unwrap();
    let h0 = anosov_base_conjugacy(CAT, &g, 128, 1e-10).unwrap();
    let spec = AmalgamSpec::standard(g, 0.1).unwrap();
    let grid: Vec<TorusPoint> = (0..4)
        .flat_map(|i| (0..4).map(move |j| wrap(&[i as f64 / 4.0 + 1.0 / 32.0, j as f64 / 4.0]).unwrap()))
        .collect();
    let field = conjugacy_field_stable(&spec, &grid, 1e-7).unwrap();
    assert!(field.max_residual() < 1e-6, "{}", field.max_residual());
    assert!(field.tail_bound < 1e-7);
    for (x, s) in field.grid.iter().zip(&field.values) {
        let oracle = leaf_intersection_su(&g, x, &h0.apply(x).unwrap()).unwrap();
        assert!(torus_dist(s, &oracle).unwrap() < 1e-6, "{:?}", x.coords());
    }
}

#[test]
fn unperturbed_stable_conjugacy_is_the_identity() {
    let spec = AmalgamSpec::standard(SystemSpec::perturbed_cat(0.0).unwrap(), 0.1).unwrap();
    for x in [[0.1, 0.2], [0.77, 0.5], [0.0, 0.0]] {
        let x = wrap(&x).unwrap();
        let s = leaf_conjugacy_stable(&spec, &x, 16, 1e-9).unwrap();
        assert!(torus_dist(&s.point, &x).unwrap() < 1e-12);
    }
}

#[test]
fn center_conjugacy_projects_to_the_base_conjugacy() {
    let (f, g) = skew_pair(0.01);
    // The base of the skew pair is the Cat map perturbed by the same δ.
    let base = SystemSpec::perturbed_cat(0.01).unwrap();
    let h0 = anosov_base_conjugacy(CAT, &base, 32, 1e-12).unwrap();
    let grid: Vec<TorusPoint> = [(1, 5, 0.0), (12, 5, 0.5), (23, 30, 0.25)]
        .iter()
        .map(|&(i, j, z)| TorusPoint::new(&[i as f64 / 32.0, j as f64 / 32.0, z]).unwrap())
        .collect();
    let field = conjugacy_field_center(&f, &g, &grid, 0.1, 1e-6, TransversalFamily::Horizontal).unwrap();
    assert!(field.max_residual() < 1e-6);
    for (p, h) in field.grid.iter().zip(&field.values) {
        let b = h0.apply(&base_of(p)).unwrap();
        assert!(torus_dist(&b, &base_of(h)).unwrap() < 1e-6, "{:?}", p.coords());
    }
}

#[test]
fn tilted_fibers_land_on_the_same_leaves() {
    let (f, g) = skew_pair(0.01);
    let grid = [TorusPoint::new(&[0.3, 0.6, 0.2]).unwrap(), TorusPoint::new(&[0.9, 0.1, 0.75]).unwrap()];
    let flat = conjugacy_field_center(&f, &g, &grid, 0.1, 1e-6, TransversalFamily::Horizontal).unwrap();
    let tilted = conjugacy_field_center(&f, &g, &grid, 0.1, 1e-6, TransversalFamily::Tilted(8.0)).unwrap();
    for (a, b) in flat.values.iter().zip(&tilted.values) {
        // Same center leaf: the horizontal offset is only along the leaf.
        assert!(torus_dist(&base_of(a), &base_of(b)).unwrap() < 0.01);
        assert!(torus_dist(a, b).unwrap() < 0.1);
    }
}

#[test]
fn unperturbed_center_conjugacy_is_the_identity() {
    let (f, g) = skew_pair(0.0);
    let p = TorusPoint::new(&[0.41, 0.13, 0.66]).unwrap();
    let h = leaf_conjugacy_center(&f, &g, &p, 0.1, 1e-6).unwrap();
    assert!(torus_dist(&h.point, &p).unwrap() < 1e-12);
    assert!(h.shadow.plaque_respecting);
}

#[test]
fn center_conjugacy_rejects_mismatched_systems() {
    let f = SystemSpec::cat();
    let (_, g) = skew_pair(0.01);
    let p = TorusPoint::new(&[0.1, 0.1, 0.1]).unwrap();
    assert!(matches!(leaf_conjugacy_center(&f, &g, &p, 0.1, 1e-6), Err(LabError::Config(_))));
}

#[test]
fn suspension_holonomy_agrees_with_center_conjugacy() {
    let (f, g) = skew_pair(0.01);
    let lp = SuspensionLoop::new(f, g).unwrap();
    let p = TorusPoint::new(&[0.7, 0.25, 0.4]).unwrap();
    let s = suspension_holonomy(&lp, &p, &p, 32).unwrap();
    let c = leaf_conjugacy_center(&f, &g, &p, 0.1, 1e-6).unwrap();
    assert!(torus_dist(&s.point, &c.point).unwrap() < 1e-8);
    assert!(s.halving_change < 1e-8);
    assert!(matches!(suspension_holonomy(&lp, &p, &p, 8), Err(LabError::Config(_))));
}

#[test]
fn quotient_leaves_are_not_expansive() {
    let q = SystemSpec::quotient_cat();
    let p = wrap(&[0.02, 0.01]).unwrap();
    let rep = leaf_expansivity_probe(&q, &p, 25).unwrap();
    assert!(rep.initial_distance >= 1e-3);
    assert!(rep.max_distance < 0.05);
    let control = leaf_separation(&q, &p, &wrap(&[0.027, 0.004]).unwrap(), 25).unwrap();
    assert!(control.iter().map(|e| e.1).fold(0.0, f64::max) > 0.25);
    assert_eq!(control.len(), 51);
}
