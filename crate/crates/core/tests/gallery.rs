use hlab_core::gallery::{run_gallery, slanted_conjugacy, strip_leaf, GalleryName};

#[test]
fn slanted_fibers_collapse_the_exponent() {
    let run = run_gallery(GalleryName::SlantedConjugacy, 300, 7).unwrap();
    assert!((run.reference_fit.theta_hat - 1.0).abs() < 0.01);
    assert!(run.fit.finest_local_slope().unwrap() < 0.2);
    assert!(run.fit.non_holder);
    assert!(run.verdicts.iter().all(|v| v.1), "{:?}", run.verdicts);
}

#[test]
fn intersection_holonomy_stays_lipschitz() {
    let run = run_gallery(GalleryName::GoodBadIntersection, 300, 7).unwrap();
    assert!(run.fit.theta_hat >= 0.99);
    assert!(run.reference_fit.non_holder);
    assert!(run.verdicts.iter().all(|v| v.1), "{:?}", run.verdicts);
}

#[test]
fn runs_are_reproducible() {
    let a = run_gallery(GalleryName::SlantedConjugacy, 100, 42).unwrap();
    let b = run_gallery(GalleryName::SlantedConjugacy, 100, 42).unwrap();
    assert_eq!(a, b);
}

#[test]
fn slanted_image_lies_on_the_next_leaf() {
    for y in [0.01, 0.2, 0.45] {
        let [x, z] = slanted_conjugacy(0.5, y).unwrap();
        assert!((strip_leaf(x, y) + 1.0 - z).abs() < 1e-12);
    }
}
