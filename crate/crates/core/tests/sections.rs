use hlab_core::estimation::{fit_holder, sample_map, SamplingPlan};
use hlab_core::sections::{
    graph_transform_step, holder_budget, solve_invariant_section, AffineShearContraction, ConstantSection, FnSection,
};

/// Sum of the first `terms` terms of the lacunary series, added one by one.
///
/// Frequencies past `9^16` are no longer exact doubles, so the phase of those
/// terms is noise; their total amplitude is below `4e-8`.
fn series_oracle(x: f64, terms: usize) -> f64 {
    (1..=terms).map(|j| 3f64.powi(1 - j as i32) * (50.0 * 9f64.powi(j as i32) * x).sin()).sum()
}

#[test]
fn series_oracle_agrees_with_closed_form() {
    for x in [-0.7, -0.01, 0.0, 0.123, std::f64::consts::PI / 100.0] {
        assert!((series_oracle(x, 40) - AffineShearContraction::lacunary_series(x)).abs() < 1e-7);
    }
    assert!((series_oracle(std::f64::consts::PI / 100.0, 16) - 1.5).abs() < 1e-7);
}

#[test]
fn invariant_section_reproduces_the_series_on_a_coarse_grid() {
    let fc = AffineShearContraction::lacunary();
    let sec = solve_invariant_section(&fc, &ConstantSection(0.0), 1 << 12, 1e-8, 100).unwrap();
    let err = sec
        .sampled()
        .nodes()
        .zip(&sec.sampled().values)
        .map(|(x, v)| (v - series_oracle(x, 40)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
    let x = std::f64::consts::PI / 100.0;
    assert!((sec.exact_at(x).unwrap() - 1.5).abs() < 1e-6);
    assert!(sec.fixed_point_error_bound() < 1e-8);
}

#[test]
fn contraction_ratio_is_one_third() {
    let fc = AffineShearContraction::lacunary();
    let sigma0 = FnSection(|x: f64| 0.5 * (3.0 * x).cos());
    let sec = solve_invariant_section(&fc, &sigma0, 1 << 12, 1e-12, 100).unwrap();
    for rec in sec.log.iter().skip(5).filter(|r| r.sup_change > 1e-11) {
        assert!((rec.ratio - 1.0 / 3.0).abs() < 0.05 / 3.0, "{rec:?}");
    }
}

#[test]
fn graph_transform_is_a_contraction_in_sup_norm() {
    let fc = AffineShearContraction::lacunary();
    let a = FnSection(|x: f64| x.sin());
    let b = FnSection(|x: f64| x.sin() + 0.3 * (7.0 * x).cos());
    let ta = graph_transform_step(&fc, &a, 2048).unwrap();
    let tb = graph_transform_step(&fc, &b, 2048).unwrap();
    assert!(ta.sup_distance(&tb) <= 0.3 / 3.0 + 1e-12);
}

#[test]
fn fitted_exponent_is_one_half() {
    let fc = AffineShearContraction::lacunary();
    let sec = solve_invariant_section(&fc, &ConstantSection(0.0), 1 << 12, 1e-8, 100).unwrap();
    let plan =
        SamplingPlan { window: (-1.0, 1.0), n_pairs: 400, scale_min: 1e-6, scale_max: 1e-3, seed: 3, anchor: None };
    let samples = sample_map(|x| sec.exact_at(x), |a: &f64, b: &f64| (a - b).abs(), &plan).unwrap();
    let fit = fit_holder(&samples).unwrap();
    assert!((0.45..=0.55).contains(&fit.theta_hat), "{fit:?}");
}

#[test]
fn budget_needs_domination() {
    let fc = AffineShearContraction::lacunary();
    assert!(holder_budget(&fc, 0.4, 1.0).is_ok());
    assert!(holder_budget(&fc, 0.6, 1.0).is_err());
    let sec = solve_invariant_section(&fc, &ConstantSection(0.0), 64, 1e-6, 100).unwrap();
    assert!(sec.eval(0.3).is_ok());
}
