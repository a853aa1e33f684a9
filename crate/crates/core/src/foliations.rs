//! Strong stable and unstable leaves, center leaves of perturbed skew
//! products, holonomy along computed foliations, and the triangle constant of
//! a pair of transverse foliations.
//!
//! Most leaf computations reduce to one primitive: find a true orbit
//! `y_n = x_n + ξ_n` of a map `g` that stays close to a reference orbit `x_n`
//! over a finite window, with some eigen-coordinates of `ξ` pinned. In the
//! eigenframe of the linear part `L = diag(λ_u, 1, λ_s)` the orbit equation is
//! `ξ_{n+1} = L ξ_n + N_n(ξ_n)`; expanding coordinates are solved backward in
//! time and contracting ones forward, sweeping until the window is consistent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bunching::EigenFrame;
use crate::error::{LabError, Result};
use crate::phasespace::{lift_near, torus_delta, torus_dist, wrap_lift, TorusPoint, Transversal, V3};
use crate::systems::SystemSpec;

/// Orbit window length used for leaf points; `0.45^45 < 1e-15`.
pub const WINDOW: usize = 45;
const MAX_SWEEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LeafSide {
    U,
    S,
    Cu,
    Cs,
    C,
}

impl LeafSide {
    pub fn name(self) -> &'static str {
        match self {
            LeafSide::U => "u",
            LeafSide::S => "s",
            LeafSide::Cu => "cu",
            LeafSide::Cs => "cs",
            LeafSide::C => "c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [LeafSide::U, LeafSide::S, LeafSide::Cu, LeafSide::Cs, LeafSide::C].into_iter().find(|x| x.name() == s)
    }
}

/// Reference orbit segment with lifted image targets: `x_{n+1} ≡ targets[n]`.
pub(crate) struct OrbitWindow {
    points: Vec<V3>,
    targets: Vec<V3>,
}

impl OrbitWindow {
    fn from_points(reference: &SystemSpec, pts: Vec<TorusPoint>) -> Result<Self> {
        let d = reference.dim();
        let mut targets = Vec::with_capacity(pts.len().saturating_sub(1));
        for w in pts.windows(2) {
            let img = reference.lift_apply(&w[0].lift());
            targets.push(lift_near(&w[1], &img.as_slice()[..d])?);
        }
        Ok(OrbitWindow { points: pts.iter().map(TorusPoint::lift).collect(), targets })
    }

    /// `p, f(p), …, f^n(p)`
    pub(crate) fn forward(reference: &SystemSpec, p: &TorusPoint, n: usize) -> Result<Self> {
        let mut pts = vec![*p];
        for k in 0..n {
            pts.push(reference.apply(&pts[k])?);
        }
        Self::from_points(reference, pts)
    }

    /// `f^{-n}(p), …, f^{-1}(p), p`
    pub(crate) fn backward(reference: &SystemSpec, p: &TorusPoint, n: usize) -> Result<Self> {
        let mut pts = vec![*p];
        for k in 0..n {
            pts.push(reference.apply_inverse(&pts[k])?);
        }
        pts.reverse();
        Self::from_points(reference, pts)
    }

    /// `f^{-n}(p), …, p, …, f^n(p)`; `p` sits at index `n`.
    pub(crate) fn centered(reference: &SystemSpec, p: &TorusPoint, n: usize) -> Result<Self> {
        let mut back = vec![*p];
        for k in 0..n {
            back.push(reference.apply_inverse(&back[k])?);
        }
        back.reverse();
        for k in 0..n {
            let next = reference.apply(&back[n + k])?;
            back.push(next);
        }
        Self::from_points(reference, back)
    }

    pub(crate) fn len(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn point(&self, i: usize) -> V3 {
        self.points[i]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Prop {
    Forward,
    Backward,
    Both,
}

/// One eigen-coordinate pinned to `value` at `index`, propagated in `prop`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Anchor {
    pub prop: Prop,
    pub index: usize,
    pub value: f64,
}

/// Solve for frame coordinates `ξ_n` of a `g`-orbit near the window.
pub(crate) fn solve_window(
    g: &SystemSpec,
    frame: &EigenFrame,
    win: &OrbitWindow,
    anchors: [Anchor; 3],
) -> Result<Vec<V3>> {
    let m = win.len();
    let lam = [frame.lambda_u, 1.0, frame.lambda_s];
    let comps: &[usize] = if g.dim() == 3 { &[0, 2, 1] } else { &[0, 2] };
    let remainder = |n: usize, xi: &V3| -> V3 {
        let y = win.points[n] + frame.vector(xi);
        let d = g.lift_apply(&y) - win.targets[n];
        let mut r = frame.coords(&d);
        for k in 0..3 {
            r[k] -= lam[k] * xi[k];
        }
        r
    };
    let mut xi = vec![V3::zeros(); m];
    let mut last = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let old = xi.clone();
        for &k in comps {
            let a = anchors[k];
            xi[a.index][k] = a.value;
            if matches!(a.prop, Prop::Backward | Prop::Both) {
                for n in (0..a.index).rev() {
                    let r = remainder(n, &xi[n]);
                    xi[n][k] = (xi[n + 1][k] - r[k]) / lam[k];
                }
            }
            if matches!(a.prop, Prop::Forward | Prop::Both) {
                for n in a.index..m - 1 {
                    let r = remainder(n, &xi[n]);
                    xi[n + 1][k] = lam[k] * xi[n][k] + r[k];
                }
            }
        }
        let mut change: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (a, b) in xi.iter().zip(&old) {
            change = change.max((a - b).amax());
            size = size.max(a[0].abs()).max(a[2].abs());
        }
        if !size.is_finite() || size > 0.5 {
            return Err(LabError::NonConvergence(format!("orbit window left the tube (|xi| = {size:e})")));
        }
        if change <= 1e-15 || (change >= last && change < 1e-13) {
            return Ok(xi);
        }
        last = change;
    }
    Err(LabError::NonConvergence(format!("orbit window sweeps stalled at change {last:e}")))
}

fn pin(prop: Prop, index: usize, value: f64) -> Anchor {
    Anchor { prop, index, value }
}

/// Lifted displacement from `p` to the point of its strong leaf with
/// eigen-coordinate `t` along the leaf direction.
pub fn strong_offset(sys: &SystemSpec, p: &TorusPoint, side: LeafSide, t: f64) -> Result<V3> {
    let frame = EigenFrame::of(sys)?;
    strong_offset_in(sys, &frame, p, side, t)
}

fn strong_offset_in(sys: &SystemSpec, frame: &EigenFrame, p: &TorusPoint, side: LeafSide, t: f64) -> Result<V3> {
    match side {
        LeafSide::U => {
            let win = OrbitWindow::backward(sys, p, WINDOW)?;
            let last = win.len() - 1;
            let xi = solve_window(
                sys,
                frame,
                &win,
                [pin(Prop::Backward, last, t), pin(Prop::Forward, 0, 0.0), pin(Prop::Forward, 0, 0.0)],
            )?;
            Ok(frame.vector(&xi[last]))
        }
        LeafSide::S => {
            let win = OrbitWindow::forward(sys, p, WINDOW)?;
            let last = win.len() - 1;
            let xi = solve_window(
                sys,
                frame,
                &win,
                [pin(Prop::Backward, last, 0.0), pin(Prop::Backward, last, 0.0), pin(Prop::Forward, 0, t)],
            )?;
            Ok(frame.vector(&xi[0]))
        }
        other => Err(LabError::Domain(format!("strong leaves are u or s, got {}", other.name()))),
    }
}

/// The point of the strong leaf through `p` at eigen-coordinate `t`.
pub fn strong_point(sys: &SystemSpec, p: &TorusPoint, side: LeafSide, t: f64) -> Result<TorusPoint> {
    let off = strong_offset(sys, p, side, t)?;
    Ok(p.shifted(&off))
}

/// Displacement from `p` to the `g`-orbit that shadows the `f`-orbit of `p`
/// for all times in the window, with center coordinate `c` relative to `p`.
pub(crate) fn shadow_offset(
    f: &SystemSpec,
    g: &SystemSpec,
    frame: &EigenFrame,
    p: &TorusPoint,
    c: f64,
    n: usize,
) -> Result<V3> {
    let win = OrbitWindow::centered(f, p, n)?;
    let last = win.len() - 1;
    let xi = solve_window(
        g,
        frame,
        &win,
        [pin(Prop::Backward, last, 0.0), pin(Prop::Both, n, c), pin(Prop::Forward, 0, 0.0)],
    )?;
    Ok(frame.vector(&xi[n]))
}

/// Four-point Lagrange interpolation on increasing nodes.
fn lagrange4(xs: &[f64], ys: &[V3], x: f64) -> V3 {
    let n = xs.len();
    let mut i = xs.partition_point(|&v| v < x);
    i = i.clamp(2, n - 2) - 2;
    let idx = [i, i + 1, i + 2, i + 3];
    let mut out = V3::zeros();
    for &a in &idx {
        let mut w = 1.0;
        for &b in &idx {
            if a != b {
                w *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        out += ys[a] * w;
    }
    out
}

/// Sampled local leaf through `base`, stored as lifted displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPatch {
    pub side: LeafSide,
    pub base: TorusPoint,
    pub radius: f64,
    /// Leaf parameter of each sample (eigen-coordinate, or height for center circles).
    pub params: Vec<f64>,
    pub offsets: Vec<V3>,
    pub tangents: Vec<V3>,
    /// Invariance residual measured against the patch through the image of `base`.
    pub residual: f64,
}

impl LeafPatch {
    fn build(side: LeafSide, base: TorusPoint, radius: f64, params: Vec<f64>, offsets: Vec<V3>) -> Self {
        let n = offsets.len();
        let tangents = (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (offsets[b] - offsets[a]).normalize()
            })
            .collect();
        LeafPatch { side, base, radius, params, offsets, tangents, residual: 0.0 }
    }

    pub fn samples(&self) -> Vec<TorusPoint> {
        self.offsets.iter().map(|o| self.base.shifted(o)).collect()
    }

    /// Interpolated displacement at leaf parameter `t`.
    pub fn offset_at(&self, t: f64) -> Result<V3> {
        let (lo, hi) = (self.params[0], self.params[self.params.len() - 1]);
        if t < lo || t > hi {
            return Err(LabError::OutOfRange(format!("leaf parameter {t} outside [{lo}, {hi}]")));
        }
        Ok(lagrange4(&self.params, &self.offsets, t))
    }

    pub fn point_at(&self, t: f64) -> Result<TorusPoint> {
        Ok(self.base.shifted(&self.offset_at(t)?))
    }

    /// Point of a closed center circle at height `z`, interpolated periodically.
    pub fn circle_point(&self, z: f64) -> Result<TorusPoint> {
        if self.side != LeafSide::C {
            return Err(LabError::Domain(format!("{} patches are not circles", self.side.name())));
        }
        Ok(self.base.shifted(&circle_offset(self, z - z.floor())))
    }

    /// Largest distance from the base point over the samples.
    pub fn max_offset(&self) -> f64 {
        self.offsets.iter().map(|o| o.norm()).fold(0.0, f64::max)
    }
}

const PATCH_CELLS: usize = 200;
const GRAPH_STEPS: usize = 30;

fn is_linear(sys: &SystemSpec) -> bool {
    sys.delta() == 0.0 && (sys.dim() == 2 || sys.epsilon() == 0.0)
}

/// Graph of the strong leaf over `[−r, r]` in the leaf eigendirection, by
/// iterating the graph transform along the orbit.
fn strong_graph(sys: &SystemSpec, frame: &EigenFrame, p: &TorusPoint, side: LeafSide, r: f64) -> Result<LeafPatch> {
    let params: Vec<f64> = (0..=PATCH_CELLS).map(|i| -r + 2.0 * r * i as f64 / PATCH_CELLS as f64).collect();
    let axis = if side == LeafSide::U { 0 } else { 2 };
    let along = |t: f64| {
        let mut c = V3::zeros();
        c[axis] = t;
        c
    };
    if is_linear(sys) {
        let offsets = params.iter().map(|&t| frame.vector(&along(t))).collect();
        return Ok(LeafPatch::build(side, *p, r, params, offsets));
    }
    // Orbit ordered in the direction the graph transform runs.
    let (win, forward_map) = match side {
        LeafSide::U => (OrbitWindow::backward(sys, p, GRAPH_STEPS)?, true),
        _ => {
            let mut w = OrbitWindow::forward(sys, p, GRAPH_STEPS)?;
            w.points.reverse();
            (w, false)
        }
    };
    let mut graph: Vec<V3> = params.iter().map(|&t| along(t)).collect();
    for k in 0..win.len() - 1 {
        let here = win.points[k];
        let next = wrap_lift(&win.points[k + 1], sys.dim())?;
        let mut imgs: Vec<(f64, V3)> = Vec::with_capacity(graph.len());
        for xi in &graph {
            let q = here + frame.vector(xi);
            let img = if forward_map { sys.lift_apply(&q) } else { sys.lift_inverse(&q)?.0 };
            let base = lift_near(&next, &img.as_slice()[..sys.dim()])?;
            imgs.push((frame.coords(&(img - base))[axis], frame.coords(&(img - base))));
        }
        if imgs.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(LabError::NonConvergence("graph transform folded the leaf".into()));
        }
        let xs: Vec<f64> = imgs.iter().map(|v| v.0).collect();
        let ys: Vec<V3> = imgs.iter().map(|v| v.1).collect();
        if xs[0] > -r || xs[xs.len() - 1] < r {
            return Err(LabError::NonConvergence("graph transform image does not cover the patch".into()));
        }
        graph = params
            .iter()
            .map(|&t| {
                let mut v = lagrange4(&xs, &ys, t);
                v[axis] = t;
                v
            })
            .collect();
    }
    let offsets = graph.iter().map(|c| frame.vector(c)).collect();
    Ok(LeafPatch::build(side, *p, r, params, offsets))
}

/// Local strong stable or unstable leaf of radius `r` through `p`, with its
/// invariance residual against the leaf through the image of `p`.
pub fn strong_manifold(sys: &SystemSpec, p: &TorusPoint, side: LeafSide, r: f64, tol: f64) -> Result<LeafPatch> {
    if !matches!(side, LeafSide::U | LeafSide::S) {
        return Err(LabError::Domain(format!("strong leaves are u or s, got {}", side.name())));
    }
    if !(r > 0.0 && r <= 0.25) {
        return Err(LabError::OutOfRange(format!("leaf radius {r} outside (0, 0.25]")));
    }
    let frame = EigenFrame::of(sys)?;
    let mut patch = strong_graph(sys, &frame, p, side, r)?;
    let image = sys.apply(p)?;
    let there = strong_graph(sys, &frame, &image, side, r)?;
    let axis = if side == LeafSide::U { 0 } else { 2 };
    let p_img = sys.lift_apply(&p.lift());
    let mut residual: f64 = 0.0;
    for off in &patch.offsets {
        let img = sys.lift_apply(&(p.lift() + off)) - p_img;
        let c = frame.coords(&img);
        if c[axis].abs() > r {
            continue;
        }
        let expect = there.offset_at(c[axis])?;
        residual = residual.max((img - expect).norm());
    }
    patch.residual = residual;
    if residual > tol {
        return Err(LabError::NonConvergence(format!(
            "{} leaf at {:?} has invariance residual {residual:e} above {tol:e}",
            side.name(),
            p.coords()
        )));
    }
    Ok(patch)
}

/// Center circle of `g` near the vertical circle `{b} × S¹` of the skew
/// product `f`, as the intersection of the center-unstable and center-stable
/// conditions at each height.
pub fn center_patch_g(f: &SystemSpec, g: &SystemSpec, leaf_base: &TorusPoint, r: f64, tol: f64) -> Result<LeafPatch> {
    let patch = center_circle(f, g, leaf_base, r)?;
    let image = center_circle(f, g, &f.apply(leaf_base)?, r)?;
    let mut residual: f64 = 0.0;
    for s in patch.samples() {
        let gs = g.apply(&s)?;
        // The image leaf is sampled by height; compare at the image height.
        let dz = gs.get(2) - image.base.get(2);
        let z = dz - dz.floor();
        let expect = image.base.shifted(&circle_offset(&image, z));
        residual = residual.max(torus_dist(&gs, &expect)?);
    }
    if residual > tol {
        return Err(LabError::Coherence(format!(
            "center leaf at {:?} has invariance residual {residual:e} above {tol:e}",
            leaf_base.coords()
        )));
    }
    Ok(LeafPatch { residual, ..patch })
}

const CIRCLE_SAMPLES: usize = 32;

fn circle_offset(patch: &LeafPatch, z: f64) -> V3 {
    // Periodic cubic interpolation in height.
    let n = patch.offsets.len();
    let t = z * n as f64;
    let i = t.floor() as isize;
    let w = t - i as f64;
    let at = |k: isize| {
        let k = k.rem_euclid(n as isize) as usize;
        let mut o = patch.offsets[k];
        o[2] = 0.0;
        o
    };
    let (a, b, c, d) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let mut v = a * (-w * (w - 1.0) * (w - 2.0) / 6.0)
        + b * ((w + 1.0) * (w - 1.0) * (w - 2.0) / 2.0)
        + c * (-(w + 1.0) * w * (w - 2.0) / 2.0)
        + d * ((w + 1.0) * w * (w - 1.0) / 6.0);
    v[2] = z;
    v
}

fn center_circle(f: &SystemSpec, g: &SystemSpec, leaf_base: &TorusPoint, r: f64) -> Result<LeafPatch> {
    if f.dim() != 3 || g.dim() != 3 || leaf_base.dim() != 3 {
        return Err(LabError::Domain("center circles need skew products on T³".into()));
    }
    if f.matrix() != g.matrix() {
        return Err(LabError::Config("f and g must share the linear part".into()));
    }
    let frame = EigenFrame::of(f)?;
    let base = TorusPoint::new(&[leaf_base.get(0), leaf_base.get(1), 0.0])?;
    let mut params = Vec::with_capacity(CIRCLE_SAMPLES);
    let mut offsets = Vec::with_capacity(CIRCLE_SAMPLES);
    for j in 0..CIRCLE_SAMPLES {
        let z = j as f64 / CIRCLE_SAMPLES as f64;
        let p = TorusPoint::new(&[base.get(0), base.get(1), z])?;
        let off = shadow_offset(f, g, &frame, &p, 0.0, WINDOW).map_err(|e| {
            LabError::Coherence(format!("no center leaf through height {z} at {:?}: {e}", base.coords()))
        })?;
        let horizontal = (off[0] * off[0] + off[1] * off[1]).sqrt();
        if horizontal > r {
            return Err(LabError::Coherence(format!(
                "center leaf at {:?} leaves the tube of radius {r} (tilt {horizontal})",
                base.coords()
            )));
        }
        params.push(z);
        offsets.push(V3::new(off[0], off[1], z + off[2]));
    }
    Ok(LeafPatch::build(LeafSide::C, base, r, params, offsets))
}

/// A foliation that can be walked along locally.
pub trait FoliationModel: Sync {
    fn dim(&self) -> usize;
    fn plaque_radius(&self) -> f64;
    /// Lifted displacement from `p` to the point at leaf parameter `t`.
    fn leaf_offset(&self, p: &TorusPoint, t: f64) -> Result<V3>;
    /// Unit tangent of the leaf at `p`.
    fn tangent(&self, p: &TorusPoint) -> Result<V3> {
        let h = 1e-5;
        let a = self.leaf_offset(p, -h)?;
        let b = self.leaf_offset(p, h)?;
        Ok((b - a).normalize())
    }
}

/// Straight parallel lines in a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFoliation {
    pub direction: V3,
    pub radius: f64,
    pub dim: usize,
}

impl LinearFoliation {
    pub fn new(direction: &[f64], radius: f64) -> Result<Self> {
        let mut v = V3::zeros();
        v.as_mut_slice()[..direction.len()].copy_from_slice(direction);
        if v.norm() == 0.0 {
            return Err(LabError::Domain("zero foliation direction".into()));
        }
        Ok(LinearFoliation { direction: v.normalize(), radius, dim: direction.len() })
    }
}

impl FoliationModel for LinearFoliation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn plaque_radius(&self) -> f64 {
        self.radius
    }

    fn leaf_offset(&self, _p: &TorusPoint, t: f64) -> Result<V3> {
        Ok(self.direction * t)
    }

    fn tangent(&self, _p: &TorusPoint) -> Result<V3> {
        Ok(self.direction)
    }
}

/// Strong stable or unstable foliation of a system, walked pointwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongFoliation {
    pub system: SystemSpec,
    pub side: LeafSide,
    pub radius: f64,
    frame: EigenFrame,
}

impl StrongFoliation {
    pub fn new(system: SystemSpec, side: LeafSide, radius: f64) -> Result<Self> {
        if !matches!(side, LeafSide::U | LeafSide::S) {
            return Err(LabError::Domain(format!("strong foliations are u or s, got {}", side.name())));
        }
        if !(radius > 0.0 && radius <= 0.25) {
            return Err(LabError::OutOfRange(format!("plaque radius {radius} outside (0, 0.25]")));
        }
        Ok(StrongFoliation { system, side, radius, frame: EigenFrame::of(&system)? })
    }
}

impl FoliationModel for StrongFoliation {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn plaque_radius(&self) -> f64 {
        self.radius
    }

    fn leaf_offset(&self, p: &TorusPoint, t: f64) -> Result<V3> {
        if t.abs() > self.radius {
            return Err(LabError::OutOfRange(format!("leaf parameter {t} beyond plaque radius {}", self.radius)));
        }
        if is_linear(&self.system) {
            let axis = if self.side == LeafSide::U { 0 } else { 2 };
            let mut c = V3::zeros();
            c[axis] = t;
            return Ok(self.frame.vector(&c));
        }
        strong_offset_in(&self.system, &self.frame, p, self.side, t)
    }
}

fn perp(v: &V3) -> V3 {
    V3::new(-v[1], v[0], 0.0)
}

/// Walk from `y` along its leaf to the line through `q` with normal `nu`.
fn slide_to(model: &dyn FoliationModel, y: &TorusPoint, q: &TorusPoint, nu: &V3) -> Result<(TorusPoint, f64)> {
    let r = model.plaque_radius();
    let gap = torus_delta(y, q)?;
    let tan = model.tangent(y)?;
    let denom = tan.dot(nu);
    if denom.abs() < 1e-3 {
        return Err(LabError::HolonomyUndefined(format!(
            "leaf through {:?} is tangent to the local transversal",
            y.coords()
        )));
    }
    let miss = |t: f64| -> Result<f64> { Ok((model.leaf_offset(y, t)? - gap).dot(nu)) };
    let mut t0 = gap.dot(nu) / denom;
    if t0.abs() > r {
        return Err(LabError::HolonomyUndefined(format!(
            "lifted leaf exits the plaque near {:?} (needs t = {t0})",
            y.coords()
        )));
    }
    let mut f0 = miss(t0)?;
    let mut t1 = t0 - f0 / denom;
    for _ in 0..30 {
        if t1.abs() > r {
            return Err(LabError::HolonomyUndefined(format!(
                "lifted leaf exits the plaque near {:?} (t = {t1})",
                y.coords()
            )));
        }
        let f1 = miss(t1)?;
        if f1.abs() < 1e-15 || t1 == t0 {
            let off = model.leaf_offset(y, t1)?;
            return Ok((y.shifted(&off), t1));
        }
        let t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
        (t0, f0, t1) = (t1, f1, t2);
    }
    Err(LabError::NonConvergence(format!("secant solve on the leaf through {:?} stalled", y.coords())))
}

/// Holonomy of a foliation of T² from `tau_from` to `tau_to` along `path`.
///
/// `path` is a polyline in the leaf through `tau_from`'s base, ending on
/// `tau_to`; consecutive vertices must be closer than 1/2 in each coordinate
/// so that each segment is the short one. The leaf through `x` is lifted plaque by plaque onto lines
/// parallel to `tau_from` placed every half plaque along the path.
pub fn holonomy_map(
    model: &dyn FoliationModel,
    tau_from: &Transversal,
    tau_to: &Transversal,
    path: &[TorusPoint],
    x: &TorusPoint,
) -> Result<TorusPoint> {
    if model.dim() != 2 || x.dim() != 2 {
        return Err(LabError::DimensionMismatch { expected: 2, got: x.dim() });
    }
    if path.is_empty() {
        return Err(LabError::Domain("holonomy path is empty".into()));
    }
    let s = tau_from.coordinate_of(x)?;
    if s.abs() > tau_from.radius() || torus_dist(&tau_from.base(), &path[0])? > 1e-9 {
        return Err(LabError::Domain(format!("start point {:?} is not within the source transversal", x.coords())));
    }
    if path.len() == 1 {
        return Ok(*x);
    }
    // Refine the path so consecutive stations are half a plaque apart.
    let step = model.plaque_radius() / 2.0;
    let mut stations = vec![path[0]];
    for w in path.windows(2) {
        let d = torus_delta(&w[0], &w[1])?;
        let k = (d.norm() / step).ceil().max(1.0) as usize;
        for i in 1..=k {
            stations.push(w[0].shifted(&(d * (i as f64 / k as f64))));
        }
    }
    let nu_mid = perp(&tau_from.direction());
    let nu_end = perp(&tau_to.direction());
    let mut y = *x;
    let last = stations.len() - 1;
    for (i, q) in stations.iter().enumerate().skip(1) {
        let nu = if i == last { nu_end } else { nu_mid };
        y = slide_to(model, &y, q, &nu)?.0;
    }
    let out = tau_to.coordinate_of(&y)?;
    if out.abs() > tau_to.radius() {
        return Err(LabError::HolonomyUndefined(format!(
            "lifted leaf meets the target line outside the transversal at {:?}",
            y.coords()
        )));
    }
    Ok(y)
}

/// Round disc in T² on which triangle constants are sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: TorusPoint,
    pub radius: f64,
}

/// Walk both leaves until they meet: returns `(a, b)` with
/// `p + F(a) = q + G(b)` in lifted coordinates.
fn leaf_intersection(
    fm: &dyn FoliationModel,
    gm: &dyn FoliationModel,
    p: &TorusPoint,
    q: &TorusPoint,
) -> Result<(f64, f64)> {
    let gap = torus_delta(p, q)?;
    let (tf, tg) = (fm.tangent(p)?, gm.tangent(q)?);
    let solve = |tf: &V3, tg: &V3, rhs: &V3| -> Result<(f64, f64)> {
        let det = tf[0] * (-tg[1]) - tf[1] * (-tg[0]);
        if det.abs() < 1e-12 {
            return Err(LabError::Transversality("leaves are parallel".into()));
        }
        let a = (rhs[0] * (-tg[1]) - rhs[1] * (-tg[0])) / det;
        let b = (tf[0] * rhs[1] - tf[1] * rhs[0]) / det;
        Ok((a, b))
    };
    let (mut a, mut b) = solve(&tf, &tg, &gap)?;
    for _ in 0..30 {
        let res = fm.leaf_offset(p, a)? - gm.leaf_offset(q, b)? - gap;
        if res.amax() < 1e-15 {
            break;
        }
        let h = 1e-7;
        let da = (fm.leaf_offset(p, a + h)? - fm.leaf_offset(p, a - h)?) / (2.0 * h);
        let db = (gm.leaf_offset(q, b + h)? - gm.leaf_offset(q, b - h)?) / (2.0 * h);
        let (ea, eb) = solve(&da, &db, &(-res))?;
        a += ea;
        b += eb;
    }
    Ok((a, b))
}

/// Smallest `D ≥ 1` with `max{d_F, d_G}/D ≤ d_τ ≤ D·(d_F + d_G)` over sampled
/// triples `(p, y, q)`, `y = F(p) ∩ G(q)`.
pub fn triangle_constant(
    fm: &dyn FoliationModel,
    gm: &dyn FoliationModel,
    disc: &Disc,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if fm.dim() != 2 || gm.dim() != 2 {
        return Err(LabError::DimensionMismatch { expected: 2, got: fm.dim().max(gm.dim()) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let rad = disc.radius * rng.random::<f64>().sqrt();
        let ang = rng.random::<f64>() * std::f64::consts::TAU;
        disc.center.shifted(&V3::new(rad * ang.cos(), rad * ang.sin(), 0.0))
    };
    let mut d: f64 = 1.0;
    for _ in 0..n_pairs {
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let (tf, tg) = (fm.tangent(&p)?, gm.tangent(&p)?);
        let sin = (tf[0] * tg[1] - tf[1] * tg[0]).abs();
        if sin < 1e-3 {
            return Err(LabError::Transversality(format!(
                "foliations nearly tangent at {:?} (angle {sin:e})",
                p.coords()
            )));
        }
        let dt = torus_dist(&p, &q)?;
        if dt < 1e-12 {
            continue;
        }
        let (a, b) = leaf_intersection(fm, gm, &p, &q)?;
        let (df, dg) = (a.abs(), b.abs());
        d = d.max(df.max(dg) / dt).max(dt / (df + dg));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::wrap;

    #[test]
    fn linear_strong_points_are_on_eigenlines() {
        let cat = SystemSpec::cat();
        let p = wrap(&[0.3, 0.4]).unwrap();
        let off = strong_offset(&cat, &p, LeafSide::U, 0.05).unwrap();
        assert!((off[1] / off[0] - 0.6180340).abs() < 1e-7);
        assert!((off.norm() - 0.05).abs() < 1e-14);
        let off = strong_offset(&cat, &p, LeafSide::S, 0.05).unwrap();
        assert!((off[1] / off[0] + 1.6180340).abs() < 1e-7);
    }

    #[test]
    fn pointwise_and_graph_leaves_agree() {
        let g = SystemSpec::perturbed_cat(0.01).unwrap();
        let p = wrap(&[0.21, 0.67]).unwrap();
        for side in [LeafSide::U, LeafSide::S] {
            let patch = strong_manifold(&g, &p, side, 0.1, 1e-8).unwrap();
            for &t in &[-0.08, -0.013, 0.04, 0.1] {
                let a = patch.offset_at(t).unwrap();
                let b = strong_offset(&g, &p, side, t).unwrap();
                assert!((a - b).norm() < 1e-9, "{side:?} t={t}: {}", (a - b).norm());
            }
        }
    }

    #[test]
    fn orthogonal_triangle_constant_is_one() {
        let f = LinearFoliation::new(&[1.0, 0.0], 0.2).unwrap();
        let g = LinearFoliation::new(&[0.0, 1.0], 0.2).unwrap();
        let disc = Disc { center: wrap(&[0.5, 0.5]).unwrap(), radius: 0.05 };
        let d = triangle_constant(&f, &g, &disc, 2000, 1).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        let h = LinearFoliation::new(&[1.0, 1e-5], 0.2).unwrap();
        assert!(matches!(triangle_constant(&f, &h, &disc, 10, 1), Err(LabError::Transversality(_))));
    }

    #[test]
    fn trivial_path_is_identity() {
        let f = LinearFoliation::new(&[1.0, 0.0], 0.2).unwrap();
        let tau = Transversal::new(wrap(&[0.0, 0.0]).unwrap(), &[0.0, 1.0], 0.1).unwrap();
        let x = wrap(&[0.0, 0.03]).unwrap();
        assert_eq!(holonomy_map(&f, &tau, &tau, &[tau.base()], &x).unwrap(), x);
    }
}
