//! Leaf conjugacies between a linear model and its perturbations.
//!
//! The stable-leaf conjugacy on T² is the invariant section of the fiber
//! contraction `a × g`, where the amalgam `a` slides `g(x)` along its strong
//! stable leaf until it meets the transverse foliation `E` at `f(x)`. Center
//! conjugacies of skew products come from shadowing orbit windows, and the
//! suspension holonomy integrates the infinitesimal conjugacy of a loop of
//! systems. [`anosov_base_conjugacy`] is an independent grid solver for the
//! base conjugacy used to cross-check all three.

use crate::bunching::{admission_check, EigenFrame};
use crate::error::{LabError, Result};
use crate::foliations::{center_patch_g, shadow_offset, strong_offset, LeafSide, LinearFoliation, OrbitWindow, WINDOW};
use crate::phasespace::{quotient_dist, torus_delta, torus_dist, wrap, QuotientPoint, TorusPoint, V3};
use crate::systems::{c0_distance, integer_inverse, suspension_slice, SuspensionLoop, SystemKind, SystemSpec};

use nalgebra::Matrix3;

/// Finite orbit of `f` up to jumps, optionally with plaque assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOrbit {
    pub points: Vec<TorusPoint>,
    /// `d(f(x_n), x_{n+1})`
    pub jump_sizes: Vec<f64>,
    /// Plaque index of each point when checked against a plaquation.
    pub plaques: Option<Vec<usize>>,
    pub plaque_respecting: bool,
}

impl PseudoOrbit {
    pub fn new(f: &SystemSpec, points: Vec<TorusPoint>) -> Result<Self> {
        let mut jump_sizes = Vec::with_capacity(points.len().saturating_sub(1));
        for w in points.windows(2) {
            jump_sizes.push(torus_dist(&f.apply(&w[0])?, &w[1])?);
        }
        Ok(PseudoOrbit { points, jump_sizes, plaques: None, plaque_respecting: false })
    }

    pub fn max_jump(&self) -> f64 {
        self.jump_sizes.iter().copied().fold(0.0, f64::max)
    }

    /// True when every jump is below `delta`.
    pub fn is_pseudo_orbit(&self, delta: f64) -> bool {
        self.jump_sizes.iter().all(|&j| j < delta)
    }
}

/// Data of the amalgam `a(x) = W^s_g(g(x), r) ∩ E(f(x), r)` on T².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmalgamSpec {
    pub f: SystemSpec,
    pub g: SystemSpec,
    pub e: LinearFoliation,
    pub r: f64,
    pub d_c0: f64,
    frame: EigenFrame,
}

impl AmalgamSpec {
    pub fn new(f: SystemSpec, g: SystemSpec, e: LinearFoliation, r: f64) -> Result<Self> {
        if f.dim() != 2 || g.dim() != 2 || e.dim != 2 {
            return Err(LabError::Config("the amalgam is built on T²".into()));
        }
        if f.matrix() != g.matrix() {
            return Err(LabError::Config("f and g must share the linear part".into()));
        }
        if f.delta() != 0.0 {
            return Err(LabError::Config("f must be the linear automorphism".into()));
        }
        let d_c0 = c0_distance(&f, &g, 64)?;
        if !(d_c0 < r / 2.0) {
            return Err(LabError::Config(format!("C0 distance {d_c0} between f and g is not below r/2 = {}", r / 2.0)));
        }
        let frame = EigenFrame::of(&g)?;
        let sin = {
            let (a, b) = (e.direction, frame.e_s());
            (a[0] * b[1] - a[1] * b[0]).abs()
        };
        if sin < 1e-3 {
            return Err(LabError::Transversality("E is tangent to the stable direction".into()));
        }
        Ok(AmalgamSpec { f, g, e, r, d_c0, frame })
    }

    /// `f = A`, `g` its perturbation and `E` the unstable foliation of `A`.
    pub fn standard(g: SystemSpec, r: f64) -> Result<Self> {
        let f = g.linear_part();
        let frame = EigenFrame::of(&f)?;
        let eu = frame.e_u();
        Self::new(f, g, LinearFoliation::new(&[eu[0], eu[1]], r)?, r)
    }
}

fn cross2(a: &V3, b: &V3) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// The amalgam `a(x)`.
pub fn amalgam(spec: &AmalgamSpec, x: &TorusPoint) -> Result<TorusPoint> {
    let gx = spec.g.apply(x)?;
    let fx = spec.f.apply(x)?;
    let gap = torus_delta(&fx, &gx)?;
    let d = spec.e.direction;
    let es = spec.frame.e_s();
    // Slide along W^s_g(g x) until the offset from f(x) is parallel to E.
    let miss = |t: f64| -> Result<f64> { Ok(cross2(&(gap + strong_offset(&spec.g, &gx, LeafSide::S, t)?), &d)) };
    let mut t0 = -cross2(&gap, &d) / cross2(&es, &d);
    let mut f0 = miss(t0)?;
    if f0.abs() > 1e-16 {
        let mut t1 = t0 - f0 / cross2(&es, &d);
        for _ in 0..20 {
            let f1 = miss(t1)?;
            if f1.abs() <= 1e-16 || t1 == t0 {
                break;
            }
            let t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
            (t0, f0, t1) = (t1, f1, t2);
        }
        t0 = t1;
    }
    if t0.abs() > spec.r {
        return Err(LabError::AmalgamUndefined(format!(
            "stable leaf of g({:?}) meets E beyond radius {}",
            x.coords(),
            spec.r
        )));
    }
    let y = gx.shifted(&strong_offset(&spec.g, &gx, LeafSide::S, t0)?);
    if torus_dist(&y, &fx)? > spec.r {
        return Err(LabError::AmalgamUndefined(format!("E-plaque at f({:?}) misses the stable plaque", x.coords())));
    }
    Ok(y)
}

/// Solve `a(x) = y` by a quasi-Newton iteration seeded at `A⁻¹ y`.
pub fn amalgam_inverse(spec: &AmalgamSpec, y: &TorusPoint) -> Result<TorusPoint> {
    let mut x = spec.f.apply_inverse(y)?;
    let lin = spec.f.linear_matrix();
    let pu = spec.frame.e_u() * spec.frame.inverse.row(0);
    for _ in 0..40 {
        let res = torus_delta(&amalgam(spec, &x)?, y)?;
        if res.amax() <= 1e-15 {
            return Ok(x);
        }
        let mut j = lin + pu * (spec.g.lift_derivative(&x.lift()) - lin);
        j[(2, 2)] = 1.0;
        let inv: Matrix3<f64> = j.try_inverse().ok_or_else(|| LabError::Singular("amalgam Jacobian".into()))?;
        let step = inv * res;
        x = x.shifted(&step);
        if step.amax() <= 1e-16 {
            return Ok(x);
        }
    }
    Err(LabError::NonConvergence(format!("amalgam inverse at {:?} did not settle", y.coords())))
}

/// `x, a(x), …, aⁿ(x)` as an `f` pseudo-orbit.
pub fn amalgam_orbit(spec: &AmalgamSpec, x: &TorusPoint, n: usize) -> Result<PseudoOrbit> {
    let mut pts = vec![*x];
    for k in 0..n {
        pts.push(amalgam(spec, &pts[k])?);
    }
    PseudoOrbit::new(&spec.f, pts)
}

/// Depth `N` with `ν^N · r < tol`.
pub fn stable_depth(nu: f64, r: f64, tol: f64) -> Result<usize> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(LabError::ConditionViolated(format!("stable rate {nu} is not a contraction")));
    }
    Ok(((tol / r).ln() / nu.ln()).ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableImage {
    pub point: TorusPoint,
    pub depth: usize,
    /// `d(s_N(x), s_{N+5}(x))`
    pub cauchy: f64,
}

/// Push the stable-leaf coordinate at `orbit[0]` forward along the amalgam
/// orbit, re-anchoring on each stable leaf.
fn carry(spec: &AmalgamSpec, orbit: &[TorusPoint]) -> Result<TorusPoint> {
    let mut y = orbit[0];
    for k in 0..orbit.len() - 1 {
        let z = spec.g.apply(&y)?;
        let eta = spec.frame.coords(&torus_delta(&orbit[k + 1], &z)?)[2];
        y = orbit[k + 1].shifted(&strong_offset(&spec.g, &orbit[k + 1], LeafSide::S, eta)?);
    }
    Ok(y)
}

/// Stable-leaf conjugacy `s(x) = gᴺ(a⁻ᴺ(x))`, checked against depth `N + 5`.
pub fn leaf_conjugacy_stable(spec: &AmalgamSpec, x: &TorusPoint, n: usize, tol: f64) -> Result<StableImage> {
    let deep = n + 5;
    let mut back = vec![*x];
    for k in 0..deep {
        back.push(amalgam_inverse(spec, &back[k])?);
    }
    back.reverse();
    let s_deep = carry(spec, &back)?;
    let s_n = carry(spec, &back[5..])?;
    let cauchy = torus_dist(&s_n, &s_deep)?;
    if cauchy >= tol {
        return Err(LabError::NonConvergence(format!(
            "stable conjugacy at {:?} moved by {cauchy:e} between depths {n} and {deep}",
            x.coords()
        )));
    }
    Ok(StableImage { point: s_deep, depth: n, cauchy })
}

/// Equivariance residual `d(s(a(x)), g(s(x)))`.
pub fn stable_equivariance(spec: &AmalgamSpec, x: &TorusPoint, n: usize, tol: f64) -> Result<f64> {
    let sx = leaf_conjugacy_stable(spec, x, n, tol)?.point;
    let sax = leaf_conjugacy_stable(spec, &amalgam(spec, x)?, n, tol)?.point;
    torus_dist(&sax, &spec.g.apply(&sx)?)
}

/// `W^s_g(x) ∩ W^u_g(y)` for nearby `x`, `y`.
pub fn leaf_intersection_su(g: &SystemSpec, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
    let frame = EigenFrame::of(g)?;
    let gap = frame.coords(&torus_delta(x, y)?);
    let (mut eta, mut zeta) = (-gap[2], gap[0]);
    for _ in 0..60 {
        let ps = strong_offset(g, x, LeafSide::S, eta)?;
        let pu = strong_offset(g, y, LeafSide::U, zeta)?;
        let res = frame.coords(&(torus_delta(y, x)? + ps - pu));
        if res.amax() <= 1e-16 {
            break;
        }
        eta -= res[2];
        zeta += res[0];
    }
    Ok(x.shifted(&strong_offset(g, x, LeafSide::S, eta)?))
}

/// Grid solution `h₀ = id + w` of `g₀ ∘ h₀ = h₀ ∘ A` on the `n × n` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseConjugacy {
    n: usize,
    /// Eigen-coordinates `(w_u, 0, w_s)` per node, row-major.
    w: Vec<V3>,
    frame: EigenFrame,
    pub sweeps: usize,
    pub residual: f64,
    /// Sup change per sweep.
    pub log: Vec<f64>,
}

impl BaseConjugacy {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn displacement(&self, i: usize, j: usize) -> V3 {
        self.frame.vector(&self.w[(i % self.n) * self.n + j % self.n])
    }

    /// `sup |h₀ − id|`
    pub fn sup_displacement(&self) -> f64 {
        self.w.iter().map(|c| self.frame.vector(c).norm()).fold(0.0, f64::max)
    }

    /// `h₀(p)` for a lattice node `p`.
    pub fn apply(&self, p: &TorusPoint) -> Result<TorusPoint> {
        let (i, j) = self.node_of(p)?;
        Ok(p.shifted(&self.displacement(i, j)))
    }

    fn node_of(&self, p: &TorusPoint) -> Result<(usize, usize)> {
        if p.dim() != 2 {
            return Err(LabError::DimensionMismatch { expected: 2, got: p.dim() });
        }
        let n = self.n as f64;
        let idx = |v: f64| {
            let k = (v * n).round();
            ((v * n - k).abs() < 1e-9).then_some((k as usize) % self.n)
        };
        match (idx(p.get(0)), idx(p.get(1))) {
            (Some(i), Some(j)) => Ok((i, j)),
            _ => Err(LabError::Domain(format!("{:?} is not a node of the {n}×{n} lattice", p.coords(), n = self.n))),
        }
    }
}

pub fn anosov_base_conjugacy(matrix: [[i64; 2]; 2], g0: &SystemSpec, n: usize, tol: f64) -> Result<BaseConjugacy> {
    if g0.dim() != 2 || g0.matrix() != matrix {
        return Err(LabError::Config("g0 must be a perturbation of the given automorphism on T²".into()));
    }
    if n < 4 {
        return Err(LabError::Config(format!("lattice size {n} is too small")));
    }
    let frame = EigenFrame::of(g0)?;
    let inv = integer_inverse(matrix);
    let map = |m: [[i64; 2]; 2], i: usize, j: usize| {
        let nn = n as i64;
        let a = (m[0][0] * i as i64 + m[0][1] * j as i64).rem_euclid(nn) as usize;
        let b = (m[1][0] * i as i64 + m[1][1] * j as i64).rem_euclid(nn) as usize;
        a * n + b
    };
    let fwd: Vec<usize> = (0..n * n).map(|k| map(matrix, k / n, k % n)).collect();
    let bwd: Vec<usize> = (0..n * n).map(|k| map(inv, k / n, k % n)).collect();
    let node = |k: usize| V3::new((k / n) as f64 / n as f64, (k % n) as f64 / n as f64, 0.0);
    let pert = |k: usize, w: &V3| frame.coords(&g0.perturbation(&(node(k) + frame.vector(w))));
    let mut w = vec![V3::zeros(); n * n];
    let mut log = Vec::new();
    let mut sweeps = 0;
    for _ in 0..1000 {
        sweeps += 1;
        let next: Vec<V3> = (0..n * n)
            .map(|k| {
                let pu = pert(k, &w[k])[0];
                let b = bwd[k];
                let ps = pert(b, &w[b])[2];
                V3::new((w[fwd[k]][0] - pu) / frame.lambda_u, 0.0, frame.lambda_s * w[b][2] + ps)
            })
            .collect();
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        w = next;
        log.push(change);
        if !change.is_finite() || change > 1.0 {
            return Err(LabError::NonConvergence("base conjugacy iteration diverged".into()));
        }
        if change <= 1e-16 {
            break;
        }
    }
    let mut residual: f64 = 0.0;
    for k in 0..n * n {
        let wk = frame.vector(&w[k]);
        let lhs = g0.lift_apply(&(node(k) + wk)) - g0.linear_matrix() * node(k);
        let r = lhs - frame.vector(&w[fwd[k]]);
        let r = V3::new(r[0] - r[0].round(), r[1] - r[1].round(), 0.0);
        residual = residual.max(r.norm());
    }
    if residual >= tol {
        return Err(LabError::NonConvergence(format!(
            "base conjugacy residual {residual:e} above {tol:e} after {sweeps} sweeps"
        )));
    }
    Ok(BaseConjugacy { n, w, frame, sweeps, residual, log })
}

/// Result of the center conjugacy at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterImage {
    pub point: TorusPoint,
    /// `f` pseudo-orbit on the vertical leaves shadowing the `g`-orbit of the image.
    pub shadow: PseudoOrbit,
    /// Largest distance between the `g`-orbit and its shadow.
    pub shadow_distance: f64,
}

pub const SHADOW_ITERATES: usize = 30;
pub const PLAQUE_ARCS: usize = 8;

fn check_skew_pair(f: &SystemSpec, g: &SystemSpec) -> Result<()> {
    if !matches!(f.kind(), SystemKind::SkewProduct)
        || !matches!(g.kind(), SystemKind::SkewProduct | SystemKind::PerturbedSkew)
    {
        return Err(LabError::Config(format!(
            "center conjugacy needs a skew product f and a skew-family g, got {} and {}",
            f.kind(),
            g.kind()
        )));
    }
    if f.matrix() != g.matrix() {
        return Err(LabError::Config("f and g must share the linear part".into()));
    }
    Ok(())
}

fn arc_of(z: f64) -> usize {
    ((z * PLAQUE_ARCS as f64).round() as usize) % PLAQUE_ARCS
}

fn height_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// `𝔥(p)`: the point of the horizontal fiber through `p` whose `g`-orbit
/// shadows the `f`-orbit of the vertical leaf through `p`.
pub fn leaf_conjugacy_center(f: &SystemSpec, g: &SystemSpec, p: &TorusPoint, r: f64, _tol: f64) -> Result<CenterImage> {
    check_skew_pair(f, g)?;
    let frame = EigenFrame::of(f)?;
    let off = shadow_offset(f, g, &frame, p, 0.0, WINDOW)?;
    if off.norm() > r {
        return Err(LabError::Coherence(format!(
            "center leaf of g misses the fiber of radius {r} at {:?}",
            p.coords()
        )));
    }
    let image = p.shifted(&off);
    // Post-hoc shadowing check over a finite window.
    // Rounding in the image grows like λ_u^k along the window, so the jump
    // tolerance never drops below that budget, even when f = g.
    let roundoff = f64::EPSILON * frame.lambda_u.powi(SHADOW_ITERATES as i32);
    let threshold = 4.0 * c0_distance(f, g, 16)? + roundoff;
    let mut y = image;
    let mut b = *p;
    let mut pts = Vec::with_capacity(SHADOW_ITERATES + 1);
    let mut shadow_distance: f64 = 0.0;
    for k in 0..=SHADOW_ITERATES {
        let x = TorusPoint::new(&[b.get(0), b.get(1), y.get(2)])?;
        shadow_distance = shadow_distance.max(torus_dist(&x, &y)?);
        pts.push(x);
        if k < SHADOW_ITERATES {
            y = g.apply(&y)?;
            b = f.apply(&b)?;
        }
    }
    let mut shadow = PseudoOrbit::new(f, pts)?;
    let plaques: Vec<usize> = shadow.points.iter().map(|x| arc_of(x.get(2))).collect();
    let mut respecting = true;
    for (k, w) in shadow.points.windows(2).enumerate() {
        let fz = f.apply(&w[0])?.get(2);
        let centre = plaques[k + 1] as f64 / PLAQUE_ARCS as f64;
        respecting &= height_gap(fz, centre) <= 1.0 / PLAQUE_ARCS as f64;
    }
    shadow.plaques = Some(plaques);
    shadow.plaque_respecting = respecting;
    if !shadow.is_pseudo_orbit(threshold) || !respecting || shadow_distance > r {
        return Err(LabError::Coherence(format!(
            "shadowing check failed at {:?}: max jump {:e} (threshold {threshold:e}), distance {shadow_distance:e}",
            p.coords(),
            shadow.max_jump()
        )));
    }
    Ok(CenterImage { point: image, shadow, shadow_distance })
}

/// `𝔥` taken along fibers tilted by `tilt_deg` degrees towards the center direction.
pub fn leaf_conjugacy_center_tilted(
    f: &SystemSpec,
    g: &SystemSpec,
    p: &TorusPoint,
    r: f64,
    tilt_deg: f64,
) -> Result<TorusPoint> {
    check_skew_pair(f, g)?;
    if !(tilt_deg.abs() <= 10.0) {
        return Err(LabError::Config(format!("fiber tilt {tilt_deg}° exceeds 10°")));
    }
    let frame = EigenFrame::of(f)?;
    let leaf = center_patch_g(f, g, p, r, 1e-6)?;
    let tilted_u = frame.e_u() + V3::z() * tilt_deg.to_radians().tan();
    let normal = tilted_u.cross(&frame.e_s());
    let miss = |z: f64| -> Result<f64> { Ok(torus_delta(p, &leaf.circle_point(z)?)?.dot(&normal)) };
    let (mut z0, mut z1) = (p.get(2), p.get(2) + 1e-3);
    let mut f0 = miss(z0)?;
    for _ in 0..40 {
        let f1 = miss(z1)?;
        if f1.abs() < 1e-15 || z1 == z0 {
            break;
        }
        let z2 = z1 - f1 * (z1 - z0) / (f1 - f0);
        (z0, f0, z1) = (z1, f1, z2);
    }
    let q = leaf.circle_point(z1)?;
    if torus_dist(&q, p)? > r {
        return Err(LabError::Coherence(format!("tilted fiber at {:?} misses the leaf", p.coords())));
    }
    Ok(q)
}

/// Distance from `g(𝔥(p))` to the center leaf assigned to `f(p)`.
pub fn center_equivariance(f: &SystemSpec, g: &SystemSpec, p: &TorusPoint, image: &TorusPoint) -> Result<f64> {
    let frame = EigenFrame::of(f)?;
    let gy = g.apply(image)?;
    let fp = f.apply(p)?;
    let q = TorusPoint::new(&[fp.get(0), fp.get(1), gy.get(2)])?;
    let on_leaf = q.shifted(&shadow_offset(f, g, &frame, &q, 0.0, WINDOW)?);
    torus_dist(&gy, &on_leaf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransversalFamily {
    /// Horizontal fibers spanned by the unstable and stable directions.
    Horizontal,
    /// Horizontal fibers tilted by the given angle in degrees.
    Tilted(f64),
    /// Stable leaves of `g` on T².
    StableLeaves,
}

/// A conjugacy sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyField {
    pub grid: Vec<TorusPoint>,
    pub values: Vec<TorusPoint>,
    pub transversal_family: TransversalFamily,
    pub window: usize,
    pub tail_bound: f64,
    pub residuals: Vec<f64>,
}

impl ConjugacyField {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn conjugacy_field_center(
    f: &SystemSpec,
    g: &SystemSpec,
    grid: &[TorusPoint],
    r: f64,
    tol: f64,
    family: TransversalFamily,
) -> Result<ConjugacyField> {
    let nu = admission_check(g)?.uniform.nu;
    let mut values = Vec::with_capacity(grid.len());
    let mut residuals = Vec::with_capacity(grid.len());
    for p in grid {
        let h = leaf_conjugacy_center(f, g, p, r, tol)?.point;
        let v = match family {
            TransversalFamily::Horizontal => h,
            TransversalFamily::Tilted(a) => leaf_conjugacy_center_tilted(f, g, p, r, a)?,
            TransversalFamily::StableLeaves => {
                return Err(LabError::Config("stable-leaf fibers apply to the T² conjugacy".into()))
            }
        };
        residuals.push(center_equivariance(f, g, p, &h)?);
        values.push(v);
    }
    Ok(ConjugacyField {
        grid: grid.to_vec(),
        values,
        transversal_family: family,
        window: WINDOW,
        tail_bound: nu.powi(WINDOW as i32) * r,
        residuals,
    })
}

pub fn conjugacy_field_stable(spec: &AmalgamSpec, grid: &[TorusPoint], tol: f64) -> Result<ConjugacyField> {
    let nu = admission_check(&spec.g)?.uniform.nu;
    let n = stable_depth(nu, spec.r, tol)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut residuals = Vec::with_capacity(grid.len());
    for x in grid {
        let sx = leaf_conjugacy_stable(spec, x, n, tol)?.point;
        let sax = leaf_conjugacy_stable(spec, &amalgam(spec, x)?, n, tol)?.point;
        residuals.push(torus_dist(&sax, &spec.g.apply(&sx)?)?);
        values.push(sx);
    }
    Ok(ConjugacyField {
        grid: grid.to_vec(),
        values,
        transversal_family: TransversalFamily::StableLeaves,
        window: n,
        tail_bound: nu.powi(n as i32) * spec.r,
        residuals,
    })
}

/// Bounded solution `v_n` of `v_{n+1} = ∂_t g_t(y_n) + Dg_t(y_n) v_n` along
/// the lifted `g_t` pseudo-orbit `pts`, with fiber components dropped.
fn window_field(lp: &SuspensionLoop, t: f64, pts: &[V3]) -> Result<Vec<V3>> {
    let gt = suspension_slice(lp, t)?;
    let frame = EigenFrame::of(&gt)?;
    let m = pts.len();
    let lam = [frame.lambda_u, 1.0, frame.lambda_s];
    let lin = gt.linear_matrix();
    // Forcing and linear remainder in eigen-coordinates, per orbit point.
    let forcing: Vec<V3> = pts.iter().map(|v| frame.coords(&lp.time_derivative(t, v))).collect();
    let coupling: Vec<Matrix3<f64>> =
        pts.iter().map(|v| frame.inverse * (gt.lift_derivative(v) - lin) * frame.basis).collect();
    let mut xi = vec![V3::zeros(); m];
    let rhs = |n: usize, xi: &V3| -> V3 {
        let mut c = coupling[n] * xi + forcing[n];
        c[1] = 0.0;
        c
    };
    let mut converged = false;
    for _ in 0..200 {
        let old = xi.clone();
        for n in (0..m - 1).rev() {
            let r = rhs(n, &xi[n]);
            xi[n][0] = (xi[n + 1][0] - r[0]) / lam[0];
        }
        for n in 0..m - 1 {
            let r = rhs(n, &xi[n]);
            xi[n + 1][2] = lam[2] * xi[n][2] + r[2];
        }
        let change = xi.iter().zip(&old).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        if change <= 1e-16 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LabError::NonConvergence(format!("suspension field sweeps stalled at t = {t}")));
    }
    Ok(xi
        .iter()
        .map(|c| {
            let mut v = frame.vector(c);
            v[2] = 0.0;
            v
        })
        .collect())
}

/// Infinitesimal conjugacy `ξ_t(y)` of the loop: the bounded solution of
/// `ξ_t(g_t y) = ∂_t g_t(y) + Dg_t(y) ξ_t(y)` along the `g_t`-orbit of `y`.
pub fn suspension_field(lp: &SuspensionLoop, t: f64, y: &TorusPoint) -> Result<V3> {
    let gt = suspension_slice(lp, t)?;
    let win = OrbitWindow::centered(&gt, y, WINDOW)?;
    let pts: Vec<V3> = (0..win.len()).map(|k| win.point(k)).collect();
    Ok(window_field(lp, t, &pts)?[WINDOW])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionImage {
    pub point: TorusPoint,
    /// Change of the result when the number of `t` steps is doubled.
    pub halving_change: f64,
}

/// RK4 continuation of a whole orbit window: `ξ_t` is only Hölder in space,
/// but the window field is smooth in the window, so the scheme keeps its order.
fn rk4_transport(lp: &SuspensionLoop, start: &TorusPoint, steps: usize, r: f64) -> Result<TorusPoint> {
    let win = OrbitWindow::centered(lp.f(), start, WINDOW)?;
    let mut state: Vec<V3> = (0..win.len()).map(|k| win.point(k)).collect();
    let origin = state[WINDOW];
    let h = 1.0 / steps as f64;
    let axpy = |x: &[V3], k: &[V3], a: f64| -> Vec<V3> { x.iter().zip(k).map(|(x, k)| x + k * a).collect() };
    for step in 0..steps {
        let t = step as f64 * h;
        let k1 = window_field(lp, t, &state)?;
        let k2 = window_field(lp, t + h / 2.0, &axpy(&state, &k1, h / 2.0))?;
        let k3 = window_field(lp, t + h / 2.0, &axpy(&state, &k2, h / 2.0))?;
        let k4 = window_field(lp, t + h, &axpy(&state, &k3, h))?;
        for (n, x) in state.iter_mut().enumerate() {
            *x += (k1[n] + k2[n] * 2.0 + k3[n] * 2.0 + k4[n]) * (h / 6.0);
        }
        if (state[WINDOW] - origin).norm() > r {
            return Err(LabError::NonConvergence(format!(
                "suspension continuation left the tube of radius {r} at t = {}",
                t + h
            )));
        }
    }
    Ok(start.shifted(&(state[WINDOW] - origin)))
}

/// Holonomy of the suspension from the fiber through `p` at time 0 to the
/// fiber at time 1, evaluated at `x` in the horizontal fiber through `p`.
pub fn suspension_holonomy(
    lp: &SuspensionLoop,
    p: &TorusPoint,
    x: &TorusPoint,
    t_steps: usize,
) -> Result<SuspensionImage> {
    const R: f64 = 0.1;
    if lp.f().dim() != 3 || p.dim() != 3 || x.dim() != 3 {
        return Err(LabError::Config("suspension holonomy runs on skew products over T²".into()));
    }
    if t_steps < 16 {
        return Err(LabError::Config(format!("need at least 16 t-steps, got {t_steps}")));
    }
    if height_gap(x.get(2), p.get(2)) > 1e-12 {
        return Err(LabError::Domain(format!("{:?} is not in the fiber through {:?}", x.coords(), p.coords())));
    }
    if torus_dist(x, p)? >= R {
        return Err(LabError::Domain(format!("{:?} is farther than {R} from {:?}", x.coords(), p.coords())));
    }
    let coarse = rk4_transport(lp, x, t_steps, R)?;
    let fine = rk4_transport(lp, x, 2 * t_steps, R)?;
    let halving_change = torus_dist(&coarse, &fine)?;
    if halving_change >= 1e-8 {
        return Err(LabError::NonConvergence(format!(
            "suspension holonomy not step-converged: halving moved it by {halving_change:e}"
        )));
    }
    Ok(SuspensionImage { point: fine, halving_change })
}

/// Separation of the two-point circle leaves `{p, −p}` and `{q, −q}` of the
/// quotient system under iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansivityReport {
    pub p: TorusPoint,
    pub q: TorusPoint,
    /// `(a, b)` with `q = p + a·v_u = −p + b·v_s`.
    pub coefficients: (f64, f64),
    pub initial_distance: f64,
    /// `(k, d_H(f^k P, f^k Q))`
    pub distances: Vec<(i64, f64)>,
    pub max_distance: f64,
}

const LEAF_HEIGHTS: usize = 8;

/// Hausdorff distance between the circle leaves through `(x, ·)` and `(y, ·)`,
/// sampled at a few heights with the quotient metric.
pub fn leaf_distance(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    let circle = |p: &TorusPoint| -> Result<Vec<QuotientPoint>> {
        (0..2 * LEAF_HEIGHTS).map(|j| QuotientPoint::new(p.coords(), j as f64 / LEAF_HEIGHTS as f64)).collect()
    };
    let (a, b) = (circle(x)?, circle(y)?);
    let one_way = |a: &[QuotientPoint], b: &[QuotientPoint]| {
        a.iter().map(|u| b.iter().map(|v| quotient_dist(u, v)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    Ok(one_way(&a, &b).max(one_way(&b, &a)))
}

/// `d_H(f^k P, f^k Q)` for `|k| ≤ k_max`.
pub fn leaf_separation(sys: &SystemSpec, p: &TorusPoint, q: &TorusPoint, k_max: usize) -> Result<Vec<(i64, f64)>> {
    let mut out = vec![(0, leaf_distance(p, q)?)];
    let (mut pf, mut qf, mut pb, mut qb) = (*p, *q, *p, *q);
    for k in 1..=k_max as i64 {
        pf = sys.apply(&pf)?;
        qf = sys.apply(&qf)?;
        pb = sys.apply_inverse(&pb)?;
        qb = sys.apply_inverse(&qb)?;
        out.push((k, leaf_distance(&pf, &qf)?));
        out.push((-k, leaf_distance(&pb, &qb)?));
    }
    out.sort_by_key(|e| e.0);
    Ok(out)
}

pub fn leaf_expansivity_probe(sys: &SystemSpec, p: &TorusPoint, k_max: usize) -> Result<ExpansivityReport> {
    if sys.kind() != SystemKind::QuotientCat || p.dim() != 2 {
        return Err(LabError::Config("the expansivity probe runs on the quotient Cat system".into()));
    }
    let frame = EigenFrame::of(sys)?;
    let (vu, vs) = (frame.e_u(), frame.e_s());
    // Reject points on the stable or unstable lines of the four fixed leaves.
    for w in [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]] {
        let c = frame.coords(&torus_delta(&wrap(&w)?, p)?);
        if c[0].abs() < 1e-12 || c[2].abs() < 1e-12 {
            return Err(LabError::DegenerateInput(format!(
                "{:?} lies on a leaf through the special point {w:?}",
                p.coords()
            )));
        }
    }
    // a·v_u − b·v_s = −2p
    let rhs = -2.0 * p.lift();
    let det = vu[0] * (-vs[1]) - vu[1] * (-vs[0]);
    let a = (rhs[0] * (-vs[1]) - rhs[1] * (-vs[0])) / det;
    let b = (vu[0] * rhs[1] - vu[1] * rhs[0]) / det;
    let q = p.shifted(&(vu * a));
    let distances = leaf_separation(sys, p, &q, k_max)?;
    let max_distance = distances.iter().map(|e| e.1).fold(0.0, f64::max);
    let initial_distance = leaf_distance(p, &q)?;
    Ok(ExpansivityReport { p: *p, q, coefficients: (a, b), initial_distance, distances, max_distance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amalgam_of_identical_maps_is_the_map() {
        let cat = SystemSpec::cat();
        let spec = AmalgamSpec::standard(cat, 0.1).unwrap();
        let x = wrap(&[0.3, 0.71]).unwrap();
        assert!(torus_dist(&amalgam(&spec, &x).unwrap(), &cat.apply(&x).unwrap()).unwrap() < 1e-15);
    }

    #[test]
    fn amalgam_inverse_round_trip() {
        let g = SystemSpec::perturbed_cat(0.01).unwrap();
        let spec = AmalgamSpec::standard(g, 0.1).unwrap();
        let y = wrap(&[0.12, 0.93]).unwrap();
        let x = amalgam_inverse(&spec, &y).unwrap();
        assert!(torus_dist(&amalgam(&spec, &x).unwrap(), &y).unwrap() < 1e-14);
    }

    #[test]
    fn unperturbed_base_conjugacy_is_identity() {
        let c = anosov_base_conjugacy(crate::systems::CAT, &SystemSpec::cat(), 16, 1e-12).unwrap();
        assert_eq!(c.sup_displacement(), 0.0);
    }

    #[test]
    fn probe_rejects_special_leaves() {
        let sys = SystemSpec::quotient_cat();
        let frame = EigenFrame::of(&sys).unwrap();
        let p = wrap(&[0.5 + 0.01 * frame.e_s()[0], 0.01 * frame.e_s()[1]]).unwrap();
        assert!(matches!(leaf_expansivity_probe(&sys, &p, 5), Err(LabError::DegenerateInput(_))));
    }

    #[test]
    fn leaf_distance_identifies_antipodes() {
        let p = wrap(&[0.1, 0.2]).unwrap();
        let m = wrap(&[-0.1, -0.2]).unwrap();
        assert!(leaf_distance(&p, &m).unwrap() < 1e-15);
        let q = wrap(&[0.1, 0.23]).unwrap();
        assert!((leaf_distance(&p, &q).unwrap() - 0.03).abs() < 1e-12);
    }
}
