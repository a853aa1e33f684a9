//! Fiber contractions over an interval, the graph transform `σ ↦ F∘σ∘h⁻¹`,
//! its invariant section and the Hölder budget of that section.

use rayon::prelude::*;

use crate::error::{LabError, Result};

/// A skew map `F(x, y) = (h(x), v(h⁻¹…))` over an interval base.
///
/// The graph transform only ever needs `h⁻¹` and the fiber rule `v(u, y)`
/// evaluated at the preimage `u = h⁻¹(x)`.
pub trait FiberContraction: Sync {
    fn base_inverse(&self, x: f64) -> f64;
    fn fiber(&self, u: f64, y: f64) -> f64;
    /// Base window `[a, b]` on which sections are sampled.
    fn domain(&self) -> (f64, f64);
    /// Lipschitz constant `k` of `y ↦ v(u, y)`.
    fn fiber_lipschitz(&self) -> f64;
    /// Base rate `μ`: `h` scales distances by at least this factor.
    fn base_rate(&self) -> f64;
    /// Diameter `D` of the fiber space.
    fn fiber_diameter(&self) -> f64;
    /// Covering constant `δ` of the (single) base chart.
    fn covering_constant(&self) -> f64 {
        let (a, b) = self.domain();
        b - a
    }
    /// Constant `L` with `|v(u,y) − v(u',y)| ≤ L·|u − u'|^θ`.
    fn shear_bound(&self, theta: f64) -> f64;
}

/// `F(x, y) = (c·x, k·y + A·sin(ω·u))` with `u = x/c` the base preimage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineShearContraction {
    pub base_scale: f64,
    pub fiber_scale: f64,
    pub shear_amp: f64,
    pub shear_freq: f64,
    pub domain: (f64, f64),
    /// Fibers are `[−fiber_bound, fiber_bound]`.
    pub fiber_bound: f64,
}

impl AffineShearContraction {
    pub fn new(
        base_scale: f64,
        fiber_scale: f64,
        shear_amp: f64,
        shear_freq: f64,
        domain: (f64, f64),
        fiber_bound: f64,
    ) -> Result<Self> {
        let all = [base_scale, fiber_scale, shear_amp, shear_freq, domain.0, domain.1, fiber_bound];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Config("fiber contraction parameters must be finite".into()));
        }
        if base_scale == 0.0 {
            return Err(LabError::Config("base_scale must be nonzero".into()));
        }
        if !(fiber_scale.abs() < 1.0) {
            return Err(LabError::Config(format!("fiber_scale must satisfy |k| < 1, got {fiber_scale}")));
        }
        if !(domain.0 < domain.1) {
            return Err(LabError::Config(format!("empty base domain {domain:?}")));
        }
        let needed = shear_amp.abs() / (1.0 - fiber_scale.abs());
        if fiber_bound < needed {
            return Err(LabError::Config(format!(
                "fiber_bound {fiber_bound} does not contain the invariant band of half-width {needed}"
            )));
        }
        Ok(AffineShearContraction { base_scale, fiber_scale, shear_amp, shear_freq, domain, fiber_bound })
    }

    /// The map `(x/9, y/3 + sin 50x)` over `[−1, 1]` with fibers `[−2, 2]`.
    pub fn lacunary() -> Self {
        Self::new(1.0 / 9.0, 1.0 / 3.0, 1.0, 50.0, (-1.0, 1.0), 2.0).expect("valid constants")
    }

    /// Exact invariant section of [`Self::lacunary`]: `Σ_{j≥1} 3^{1−j} sin(50·9^j x)`,
    /// truncated once terms drop below `1e-17`.
    pub fn lacunary_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut amp = 1.0;
        let mut freq = 450.0;
        while amp > 1e-17 {
            sum += amp * (freq * x).sin();
            amp /= 3.0;
            freq *= 9.0;
        }
        sum
    }
}

impl FiberContraction for AffineShearContraction {
    fn base_inverse(&self, x: f64) -> f64 {
        x / self.base_scale
    }

    fn fiber(&self, u: f64, y: f64) -> f64 {
        self.fiber_scale * y + self.shear_amp * (self.shear_freq * u).sin()
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn fiber_lipschitz(&self) -> f64 {
        self.fiber_scale.abs()
    }

    fn base_rate(&self) -> f64 {
        self.base_scale.abs()
    }

    fn fiber_diameter(&self) -> f64 {
        2.0 * self.fiber_bound
    }

    fn shear_bound(&self, theta: f64) -> f64 {
        // |sin a − sin b| ≤ min(|a − b|, 2) ≤ |a − b|^θ·2^(1−θ)
        self.shear_amp.abs() * self.shear_freq.abs().powf(theta) * 2f64.powf(1.0 - theta)
    }
}

/// Anything that can be evaluated as a section over the base.
pub trait Section: Sync {
    fn eval(&self, x: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSection(pub f64);

impl Section for ConstantSection {
    fn eval(&self, _x: f64) -> Result<f64> {
        Ok(self.0)
    }
}

/// A section given by a closure defined on the whole line.
pub struct FnSection<F: Fn(f64) -> f64 + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Section for FnSection<F> {
    fn eval(&self, x: f64) -> Result<f64> {
        Ok((self.0)(x))
    }
}

/// Values on the uniform grid `x_i = a + i·h`, `i = 0..=n`, with linear
/// interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSection {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl SampledSection {
    pub fn grid(domain: (f64, f64), cells: usize) -> Result<Vec<f64>> {
        if cells == 0 || !(domain.0 < domain.1) {
            return Err(LabError::Config(format!("bad grid: {cells} cells on {domain:?}")));
        }
        let h = (domain.1 - domain.0) / cells as f64;
        Ok((0..=cells).map(|i| domain.0 + i as f64 * h).collect())
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.start + i as f64 * self.step)
    }

    pub fn end(&self) -> f64 {
        self.start + (self.values.len() - 1) as f64 * self.step
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end()
    }

    /// Index of the node at `x`, if `x` is one.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let t = (x - self.start) / self.step;
        let i = t.round();
        ((t - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.values.len()).then_some(i as usize)
    }

    pub fn sup_distance(&self, other: &SampledSection) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Section for SampledSection {
    fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(LabError::Domain(format!(
                "section sampled on [{}, {}] evaluated at {x}",
                self.start,
                self.end()
            )));
        }
        if let Some(i) = self.node_index(x) {
            return Ok(self.values[i]);
        }
        let t = (x - self.start) / self.step;
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let w = t - i as f64;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }
}

/// One application of the graph transform, sampled on `cells` uniform cells.
pub fn graph_transform_step(fc: &dyn FiberContraction, sigma: &dyn Section, cells: usize) -> Result<SampledSection> {
    let grid = SampledSection::grid(fc.domain(), cells)?;
    let values = grid
        .par_iter()
        .map(|&x| {
            let u = fc.base_inverse(x);
            Ok(fc.fiber(u, sigma.eval(u)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SampledSection { start: grid[0], step: grid[1] - grid[0], values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub iter: usize,
    pub sup_change: f64,
    /// `sup_change / previous sup_change`; NaN on the first iteration.
    pub ratio: f64,
}

/// The iterates `F_#^n σ₀`, cached on the grid, with the convergence log.
///
/// Preimages that leave the sampled window are evaluated by unwinding the
/// graph transform back through earlier iterates down to `σ₀`.
pub struct InvariantSection<'a> {
    fc: &'a dyn FiberContraction,
    sigma0: &'a dyn Section,
    layers: Vec<SampledSection>,
    pub log: Vec<ConvergenceRecord>,
}

impl<'a> InvariantSection<'a> {
    pub fn iterations(&self) -> usize {
        self.layers.len()
    }

    /// The converged grid section.
    pub fn sampled(&self) -> &SampledSection {
        self.layers.last().expect("at least one iteration")
    }

    /// Last observed step change, an upper bound for `sup|F_#σ − σ|` on the grid.
    pub fn residual(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.sup_change)
    }

    /// Bound on the sup distance from the grid values to the true fixed point.
    pub fn fixed_point_error_bound(&self) -> f64 {
        let k = self.fc.fiber_lipschitz();
        self.residual() * k / (1.0 - k)
    }

    /// Linear-interpolation error of a `θ`-Hölder section with constant `H`.
    pub fn interpolation_error_bound(&self, theta: f64, holder_constant: f64) -> f64 {
        holder_constant * (self.sampled().step / 2.0).powf(theta)
    }

    fn value_at(&self, level: usize, x: f64, refine: usize) -> Result<f64> {
        if level == 0 {
            return self.sigma0.eval(x);
        }
        let layer = &self.layers[level - 1];
        if layer.contains(x) {
            if let Some(i) = layer.node_index(x) {
                return Ok(layer.values[i]);
            }
            if refine == 0 {
                return layer.eval(x);
            }
        }
        let u = self.fc.base_inverse(x);
        let y = self.value_at(level - 1, u, refine.saturating_sub(1))?;
        Ok(self.fc.fiber(u, y))
    }

    /// Interpolated value of the final iterate.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.value_at(self.layers.len(), x, 0)
    }

    /// Value of the final iterate at `x` computed pointwise: the graph
    /// transform is unwound `depth` times before any interpolation, which
    /// shrinks the interpolation error by `k^depth`.
    pub fn refine_at(&self, x: f64, depth: usize) -> Result<f64> {
        self.value_at(self.layers.len(), x, depth)
    }

    /// Pointwise value of the final iterate with no interpolation at all.
    pub fn exact_at(&self, x: f64) -> Result<f64> {
        self.value_at(self.layers.len(), x, usize::MAX)
    }
}

impl Section for InvariantSection<'_> {
    fn eval(&self, x: f64) -> Result<f64> {
        InvariantSection::eval(self, x)
    }
}

/// Iterate the graph transform from `sigma0` until the sup change on the grid
/// drops below `tol`.
pub fn solve_invariant_section<'a>(
    fc: &'a dyn FiberContraction,
    sigma0: &'a dyn Section,
    cells: usize,
    tol: f64,
    max_iters: usize,
) -> Result<InvariantSection<'a>> {
    if !(tol > 0.0) {
        return Err(LabError::Config(format!("tolerance must be positive, got {tol}")));
    }
    if !(fc.fiber_lipschitz() < 1.0) {
        return Err(LabError::ConditionViolated(format!(
            "fiber rule is not a contraction (k = {})",
            fc.fiber_lipschitz()
        )));
    }
    let grid = SampledSection::grid(fc.domain(), cells)?;
    let (start, step) = (grid[0], grid[1] - grid[0]);
    let mut sec = InvariantSection { fc, sigma0, layers: Vec::new(), log: Vec::new() };
    let mut prev: Vec<f64> = grid.iter().map(|&x| sigma0.eval(x)).collect::<Result<_>>()?;
    let mut last_change = f64::NAN;
    for iter in 1..=max_iters {
        let level = sec.layers.len();
        let values = grid
            .par_iter()
            .map(|&x| {
                let u = fc.base_inverse(x);
                Ok(fc.fiber(u, sec.value_at(level, u, 0)?))
            })
            .collect::<Result<Vec<f64>>>()?;
        let change = values.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        sec.log.push(ConvergenceRecord { iter, sup_change: change, ratio: change / last_change });
        last_change = change;
        prev.clone_from(&values);
        sec.layers.push(SampledSection { start, step, values });
        if change < tol {
            return Ok(sec);
        }
    }
    Err(LabError::NonConvergence(format!(
        "graph transform still moving by {last_change:e} after {max_iters} iterations"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderBudget {
    pub theta: f64,
    pub h0: f64,
    /// `max{H₀, D/δ^θ, 1/(μ^θ − k)}`
    pub h: f64,
    /// Same bound with the shear term `L/(μ^θ − k)` included.
    pub h_with_shear: f64,
}

pub fn holder_budget(fc: &dyn FiberContraction, theta: f64, h0: f64) -> Result<HolderBudget> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(LabError::OutOfRange(format!("theta must lie in (0, 1], got {theta}")));
    }
    let k = fc.fiber_lipschitz();
    let gap = fc.base_rate().powf(theta) - k;
    if !(gap > 0.0) {
        return Err(LabError::ConditionViolated(format!(
            "fiber rate {k} does not {theta}-dominate base rate {}",
            fc.base_rate()
        )));
    }
    let h = h0.max(fc.fiber_diameter() / fc.covering_constant().powf(theta)).max(1.0 / gap);
    let h_with_shear = h.max(fc.shear_bound(theta) / gap);
    Ok(HolderBudget { theta, h0, h, h_with_shear })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_from_zero() {
        let fc = AffineShearContraction::lacunary();
        let s = graph_transform_step(&fc, &ConstantSection(0.0), 1024).unwrap();
        for (x, v) in s.nodes().zip(&s.values) {
            assert!((v - (450.0 * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn step_leaving_window_is_a_domain_error() {
        let fc = AffineShearContraction::lacunary();
        let s = graph_transform_step(&fc, &ConstantSection(0.0), 64).unwrap();
        assert!(matches!(graph_transform_step(&fc, &s, 64), Err(LabError::Domain(_))));
    }

    #[test]
    fn halving_rule_converges_fast() {
        let fc = AffineShearContraction::new(0.5, 0.5, 0.0, 1.0, (-1.0, 1.0), 1.0).unwrap();
        let tol = 1e-8;
        let s0 = FnSection(|x: f64| (3.0 * x).cos());
        let sec = solve_invariant_section(&fc, &s0, 256, tol, 100).unwrap();
        let k = (1.0 / tol).log2().ceil() as usize;
        assert!(sec.iterations() >= k);
        assert!(sec.layers[k - 1].values.iter().all(|v| v.abs() < tol));
    }

    #[test]
    fn budget_examples() {
        let fc = AffineShearContraction::lacunary();
        let b = holder_budget(&fc, 0.4, 0.0).unwrap();
        assert!((b.h - 12.21).abs() < 0.01, "{}", b.h);
        assert!(b.h_with_shear >= b.h);
        assert!(holder_budget(&fc, 0.5, 0.0).is_err());
        let near = holder_budget(&fc, 0.4999, 0.0).unwrap();
        assert!(near.h > 1e3);
        let free = AffineShearContraction::new(1.0 / 9.0, 0.0, 0.0, 1.0, (-1.0, 1.0), 2.0).unwrap();
        let b = holder_budget(&free, 0.7, 1.0).unwrap();
        let expect = 1f64.max(4.0 / 2f64.powf(0.7)).max(9f64.powf(0.7));
        assert!((b.h - expect).abs() < 1e-12);
    }
}
