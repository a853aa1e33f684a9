//! Two small foliations whose holonomy misbehaves on purpose.
//!
//! Both are built from the strip leaf map
//! `g₀(x, y) = (1 − w(x))·y + w(x)/log(e/y)` on `y ∈ [0, 1]`, with
//! `w(x) = ½·sin²(πx)`, extended by `g(x, y + n) = g₀(x, y) + n`. For
//! `w(x) > 0` the slice `y ↦ g₀(x, y)` has modulus of continuity
//! `1/log(e/y)` at `y = 0`, which beats every power law.

use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::estimation::{fit_holder, sample_map, HolderFit, HolonomySample, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalleryName {
    SlantedConjugacy,
    GoodBadIntersection,
}

impl GalleryName {
    pub const ALL: [GalleryName; 2] = [GalleryName::SlantedConjugacy, GalleryName::GoodBadIntersection];

    pub fn name(self) -> &'static str {
        match self {
            GalleryName::SlantedConjugacy => "slanted-conjugacy",
            GalleryName::GoodBadIntersection => "good-bad-intersection",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| LabError::UnknownGallery(s.to_string()))
    }
}

fn weight(x: f64) -> f64 {
    let s = (PI * x).sin();
    0.5 * s * s
}

/// Height at abscissa `x` of the leaf through `(0, c)`.
pub fn strip_leaf(x: f64, c: f64) -> f64 {
    let n = c.floor();
    let y = c - n;
    let w = weight(x);
    let v = if y <= 0.0 { 0.0 } else { (1.0 - w) * y + w / (1.0 - y.ln()) };
    v + n
}

/// Label `c` of the leaf through `(x, y)`, by bisection.
pub fn strip_label(x: f64, y: f64) -> f64 {
    let n = y.floor();
    let (mut lo, mut hi) = (n, n + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if strip_leaf(x, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `𝔥_s(0, y)`: the unit vertical translation of leaves, read along the
/// slanted fiber `t ↦ (s·t, y + t)` through `(0, y)`.
pub fn slanted_conjugacy(s: f64, y: f64) -> Result<[f64; 2]> {
    // g(s·t, y) + 1 − (y + t) is strictly decreasing in t for |s| < 1.
    if !(s.abs() < 1.0) {
        return Err(LabError::Config(format!("fiber slope {s} must be below 1 in magnitude")));
    }
    let miss = |t: f64| strip_leaf(s * t, y) + 1.0 - (y + t);
    let (mut lo, mut hi) = (0.0, 3.0);
    if !(miss(lo) > 0.0 && miss(hi) < 0.0) {
        return Err(LabError::NonConvergence(format!("slanted fiber through (0, {y}) misses the image leaf")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if miss(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok([s * t, y + t])
}

/// Holonomy of the circles `{x} × S¹ × {z}` of `F ∩ G` on T³ from the plane
/// `y = 0` to the plane `y = y1`, where `F` has leaves `z = g(x, c)` and `G`
/// has leaves `x = const`: locate the `F`-leaf and the `G`-leaf, then
/// intersect them on the target plane.
pub fn intersection_holonomy(x: f64, z: f64, y1: f64) -> [f64; 3] {
    let c = strip_label(x, z);
    [x, y1, strip_leaf(x, c)]
}

/// Pairs, fits and verdicts of one gallery run.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryRun {
    pub name: GalleryName,
    pub samples: Vec<HolonomySample>,
    pub fit: HolderFit,
    /// The comparison map of the run and its fit.
    pub reference_samples: Vec<HolonomySample>,
    pub reference_fit: HolderFit,
    pub verdicts: Vec<(String, bool)>,
}

fn euclid<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

pub const SLANT: f64 = 0.5;
pub const SLICE_X: f64 = 0.5;

pub fn run_gallery(name: GalleryName, n_pairs: usize, seed: u64) -> Result<GalleryRun> {
    let anchored =
        SamplingPlan { window: (0.0, 0.5), n_pairs, scale_min: 1e-12, scale_max: 1e-2, seed, anchor: Some(0.0) };
    match name {
        GalleryName::SlantedConjugacy => {
            let samples = sample_map(|y| slanted_conjugacy(SLANT, y), euclid, &anchored)?;
            let fit = fit_holder(&samples)?;
            let reference_samples = sample_map(|y| slanted_conjugacy(0.0, y), euclid, &anchored)?;
            let reference_fit = fit_holder(&reference_samples)?;
            let finest = fit.finest_local_slope().unwrap_or(f64::NAN);
            let verdicts = vec![
                ("vertical fibers: exponent 1".to_string(), (reference_fit.theta_hat - 1.0).abs() < 0.01),
                (format!("slope {SLANT} fibers: finest local slope < 0.2"), finest < 0.2),
                (format!("slope {SLANT} fibers: non-Hölder flag"), fit.non_holder),
            ];
            Ok(GalleryRun { name, samples, fit, reference_samples, reference_fit, verdicts })
        }
        GalleryName::GoodBadIntersection => {
            // Transversal segment in the plane y = 0, tilted across x and z.
            let (x0, z0) = (0.4, 0.3);
            let plan = SamplingPlan { window: (-0.1, 0.1), scale_min: 1e-8, anchor: None, ..anchored };
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let samples = sample_map(|u| Ok(intersection_holonomy(x0 + r * u, z0 + r * u, 0.5)), euclid, &plan)?;
            let fit = fit_holder(&samples)?;
            let reference_samples =
                sample_map(|c| Ok(strip_leaf(SLICE_X, c)), |a: &f64, b: &f64| (a - b).abs(), &anchored)?;
            let reference_fit = fit_holder(&reference_samples)?;
            let verdicts = vec![
                ("intersection holonomy: exponent >= 0.99".to_string(), fit.theta_hat >= 0.99),
                (format!("slice map at x = {SLICE_X}: non-Hölder flag"), reference_fit.non_holder),
            ];
            Ok(GalleryRun { name, samples, fit, reference_samples, reference_fit, verdicts })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_leaves_are_flat() {
        for x in [0.0, 0.2, 0.5, 0.9] {
            assert_eq!(strip_leaf(x, 0.0), 0.0);
            assert!((strip_leaf(x, 1.0) - 1.0).abs() < 1e-15);
            assert!((strip_leaf(x, 2.3) - strip_leaf(x, 0.3) - 2.0).abs() < 1e-15);
        }
        assert_eq!(strip_leaf(0.0, 0.37), 0.37);
    }

    #[test]
    fn label_inverts_leaf() {
        for (x, c) in [(0.3, 0.2), (0.5, 0.9), (0.7, 1.4)] {
            assert!((strip_label(x, strip_leaf(x, c)) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_fibers_translate() {
        let p = slanted_conjugacy(0.0, 0.25).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(GalleryName::parse("spiral"), Err(LabError::UnknownGallery(_))));
    }
}
