//! Empirical Hölder exponents from sampled pairs.
//!
//! Pairs are drawn with log-uniform separations, grouped into dyadic buckets
//! `⌊log₂ d_in⌋`, and fitted twice: an ordinary least-squares slope of
//! `log d_out` against `log d_in`, and the slope of the per-bucket maxima
//! (the upper envelope), which is what worst-case pairs certify.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bunching::PredictedExponent;
use crate::error::{LabError, Result};
use crate::phasespace::{torus_dist, transversal_point, TorusPoint, Transversal};

pub const MIN_SAMPLES: usize = 50;
pub const MIN_BUCKETS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomySample {
    pub d_in: f64,
    pub d_out: f64,
    pub bucket: i32,
}

pub fn bucket_of(d_in: f64) -> i32 {
    d_in.log2().floor() as i32
}

impl HolonomySample {
    pub fn new(d_in: f64, d_out: f64) -> Self {
        HolonomySample { d_in, d_out, bucket: bucket_of(d_in) }
    }
}

/// Where pairs are drawn from on a one-parameter family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub window: (f64, f64),
    pub n_pairs: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub seed: u64,
    /// Pin the first point of every pair here instead of drawing it.
    pub anchor: Option<f64>,
}

impl SamplingPlan {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.window;
        if !(lo < hi) {
            return Err(LabError::Config(format!("empty sampling window {:?}", self.window)));
        }
        if !(self.scale_min > 0.0 && self.scale_min < self.scale_max) {
            return Err(LabError::Config(format!(
                "need 0 < scale_min < scale_max, got {} and {}",
                self.scale_min, self.scale_max
            )));
        }
        let room = match self.anchor {
            Some(a) if a < lo || a > hi => {
                return Err(LabError::Config(format!("anchor {a} outside window {:?}", self.window)))
            }
            Some(a) => (hi - a).max(a - lo),
            None => hi - lo,
        };
        if self.scale_max > room {
            return Err(LabError::Config(format!(
                "scale_max {} exceeds the room {room} available in the window",
                self.scale_max
            )));
        }
        if self.n_pairs == 0 {
            return Err(LabError::Config("n_pairs must be positive".into()));
        }
        Ok(())
    }

    /// Parameter pairs `(s, s')`, deterministic in the seed.
    pub fn pairs(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        let (lo, hi) = self.window;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lmin, lmax) = (self.scale_min.ln(), self.scale_max.ln());
        let mut out = Vec::with_capacity(self.n_pairs);
        for _ in 0..self.n_pairs {
            let d = rng.random_range(lmin..=lmax).exp();
            let pair = match self.anchor {
                Some(a) => {
                    if a + d <= hi {
                        (a, a + d)
                    } else {
                        (a, a - d)
                    }
                }
                None => {
                    let s = rng.random_range(lo..=(hi - d));
                    (s, s + d)
                }
            };
            out.push(pair);
        }
        Ok(out)
    }
}

/// Sample `map` on a parameter interval and measure output distances with `metric`.
pub fn sample_map<P, F, M>(map: F, metric: M, plan: &SamplingPlan) -> Result<Vec<HolonomySample>>
where
    P: Send,
    F: Fn(f64) -> Result<P> + Sync,
    M: Fn(&P, &P) -> f64 + Sync,
{
    let pairs = plan.pairs()?;
    pairs
        .par_iter()
        .map(|&(a, b)| {
            let ctx = |e: LabError| e.context(&format!("sample pair s={a}, s'={b}"));
            let pa = map(a).map_err(ctx)?;
            let pb = map(b).map_err(ctx)?;
            Ok(HolonomySample::new((b - a).abs(), metric(&pa, &pb)))
        })
        .collect()
}

/// Sample a map of the torus along a transversal, with the flat metric on outputs.
pub fn sample_pairs<F>(
    map: F,
    tau: &Transversal,
    n_pairs: usize,
    scale_min: f64,
    scale_max: f64,
    seed: u64,
) -> Result<Vec<HolonomySample>>
where
    F: Fn(&TorusPoint) -> Result<TorusPoint> + Sync,
{
    if scale_max > tau.radius() {
        return Err(LabError::Config(format!("scale_max {scale_max} exceeds transversal radius {}", tau.radius())));
    }
    let plan =
        SamplingPlan { window: (-tau.radius(), tau.radius()), n_pairs, scale_min, scale_max, seed, anchor: None };
    sample_map(
        |s| {
            let p = transversal_point(tau, s)?;
            map(&p).map_err(|e| e.context(&format!("at {:?}", p.coords())))
        },
        |a: &TorusPoint, b: &TorusPoint| torus_dist(a, b).unwrap_or(f64::NAN),
        &plan,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketStat {
    pub bucket: i32,
    pub count: usize,
    /// `log d_in` of the pair attaining the bucket maximum.
    pub log_in_at_max: f64,
    pub max_log_out: f64,
    /// Envelope slope between this bucket and the next coarser one.
    pub local_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    pub theta_hat: f64,
    pub h_hat: f64,
    pub envelope_theta: f64,
    pub r_squared: f64,
    pub scale_range: (f64, f64),
    pub n_samples: usize,
    /// Finest bucket first.
    pub buckets: Vec<BucketStat>,
    /// Local slopes decay toward zero at fine scales.
    pub non_holder: bool,
}

impl HolderFit {
    /// Local slope at the finest bucket that has one.
    pub fn finest_local_slope(&self) -> Option<f64> {
        self.buckets.iter().find_map(|b| b.local_slope)
    }
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

fn decays_to_zero(slopes: &[f64]) -> bool {
    // `slopes` runs from the finest scale to the coarsest.
    if slopes.len() < 4 {
        return false;
    }
    let rising = slopes.windows(2).filter(|w| w[1] >= w[0] - 0.02).count();
    let coarse = slopes[slopes.len() - 1];
    let fine = slopes[0];
    rising as f64 >= 0.8 * (slopes.len() - 1) as f64 && fine < 0.5 * coarse && fine < 0.25
}

pub fn fit_holder(samples: &[HolonomySample]) -> Result<HolderFit> {
    let valid: Vec<&HolonomySample> =
        samples.iter().filter(|s| s.d_in > 0.0 && s.d_out > 0.0 && s.d_in.is_finite() && s.d_out.is_finite()).collect();
    if valid.len() < MIN_SAMPLES {
        return Err(LabError::InsufficientData(format!("{} usable samples, need at least {MIN_SAMPLES}", valid.len())));
    }
    let mut by_bucket: BTreeMap<i32, (usize, f64, f64)> = BTreeMap::new();
    for s in &valid {
        let (x, y) = (s.d_in.ln(), s.d_out.ln());
        let e = by_bucket.entry(s.bucket).or_insert((0, x, f64::NEG_INFINITY));
        e.0 += 1;
        if y > e.2 {
            e.1 = x;
            e.2 = y;
        }
    }
    if by_bucket.len() < MIN_BUCKETS {
        return Err(LabError::InsufficientData(format!(
            "samples span {} dyadic scales, need at least {MIN_BUCKETS}",
            by_bucket.len()
        )));
    }
    let points: Vec<(f64, f64)> = valid.iter().map(|s| (s.d_in.ln(), s.d_out.ln())).collect();
    let (theta_hat, intercept, r_squared) = least_squares(&points);
    let env: Vec<(f64, f64)> = by_bucket.values().map(|&(_, x, y)| (x, y)).collect();
    let (envelope_theta, _, _) = least_squares(&env);

    let mut buckets: Vec<BucketStat> = by_bucket
        .iter()
        .map(|(&bucket, &(count, x, y))| BucketStat {
            bucket,
            count,
            log_in_at_max: x,
            max_log_out: y,
            local_slope: None,
        })
        .collect();
    for i in 0..buckets.len() - 1 {
        let (a, b) = (buckets[i], buckets[i + 1]);
        let dx = b.log_in_at_max - a.log_in_at_max;
        if dx > 0.0 {
            buckets[i].local_slope = Some((b.max_log_out - a.max_log_out) / dx);
        }
    }
    let slopes: Vec<f64> = buckets.iter().filter_map(|b| b.local_slope).collect();
    let lo = valid.iter().map(|s| s.d_in).fold(f64::INFINITY, f64::min);
    let hi = valid.iter().map(|s| s.d_in).fold(0.0, f64::max);
    Ok(HolderFit {
        theta_hat,
        h_hat: intercept.exp(),
        envelope_theta,
        r_squared,
        scale_range: (lo, hi),
        n_samples: valid.len(),
        buckets,
        non_holder: decays_to_zero(&slopes),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

/// Pass when the envelope exponent reaches the prediction up to `margin`.
pub fn verdict(fit: &HolderFit, predicted: &PredictedExponent, margin: f64) -> Verdict {
    debug_assert!(margin > 0.0);
    if fit.envelope_theta >= predicted.theta_max - margin {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(seed: u64) -> SamplingPlan {
        SamplingPlan { window: (0.0, 1.0), n_pairs: 400, scale_min: 1e-6, scale_max: 1e-1, seed, anchor: None }
    }

    #[test]
    fn power_law_is_recovered_exactly() {
        let mut p = plan(3);
        p.anchor = Some(0.0);
        let samples = sample_map(|s| Ok(s.sqrt()), |a: &f64, b: &f64| (a - b).abs(), &p).unwrap();
        for s in &samples {
            assert!((s.d_out - s.d_in.sqrt()).abs() < 1e-15);
        }
        let fit = fit_holder(&samples).unwrap();
        assert!((fit.theta_hat - 0.5).abs() < 1e-9);
        assert!((fit.envelope_theta - 0.5).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        assert!(!fit.non_holder);
    }

    #[test]
    fn affine_maps() {
        let id = sample_map(Ok, |a: &f64, b: &f64| (a - b).abs(), &plan(1)).unwrap();
        assert!(id.iter().all(|s| (s.d_in - s.d_out).abs() < 1e-15));
        let dbl = sample_map(|s| Ok(2.0 * s), |a: &f64, b: &f64| (a - b).abs(), &plan(1)).unwrap();
        assert!(dbl.iter().all(|s| (s.d_out - 2.0 * s.d_in).abs() < 1e-15));
    }

    #[test]
    fn too_little_data() {
        let few: Vec<_> = (0..10).map(|i| HolonomySample::new(2f64.powi(-i), 1.0)).collect();
        assert!(matches!(fit_holder(&few), Err(LabError::InsufficientData(_))));
        let narrow: Vec<_> = (0..100).map(|i| HolonomySample::new(0.5 + i as f64 * 1e-3, 1.0)).collect();
        assert!(matches!(fit_holder(&narrow), Err(LabError::InsufficientData(_))));
    }

    #[test]
    fn seeds_are_deterministic() {
        assert_eq!(plan(9).pairs().unwrap(), plan(9).pairs().unwrap());
        assert_ne!(plan(9).pairs().unwrap(), plan(10).pairs().unwrap());
    }
}
