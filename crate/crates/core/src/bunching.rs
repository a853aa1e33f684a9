//! Invariant splittings, bracketing rates and predicted Hölder exponents.

use std::fmt;

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::phasespace::{TorusPoint, V3};
use crate::systems::{check_hyperbolic, grid_points, SystemSpec};

/// Default outward relaxation applied to measured rates.
pub const DEFAULT_MARGIN: f64 = 1e-6;

/// Smallest singular value of a square matrix.
pub fn conorm(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(LabError::Domain(format!("conorm needs a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(min > 1e-14 * max.max(1.0)) {
        return Err(LabError::Singular(format!("smallest singular value {min:e}")));
    }
    Ok(min)
}

/// Eigen-data of a hyperbolic 2×2 integer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSplitting {
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub e_u: V3,
    pub e_s: V3,
}

fn eigenvector(m: [[f64; 2]; 2], lambda: f64) -> V3 {
    let [[a, b], [c, d]] = m;
    // Pick the better conditioned of the two row equations.
    let v = if b.abs() >= c.abs() { V3::new(b, lambda - a, 0.0) } else { V3::new(lambda - d, c, 0.0) };
    let v = v.normalize();
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        -v
    } else {
        v
    }
}

pub fn exact_splitting_linear(matrix: [[i64; 2]; 2]) -> Result<LinearSplitting> {
    check_hyperbolic(matrix)?;
    let m = [[matrix[0][0] as f64, matrix[0][1] as f64], [matrix[1][0] as f64, matrix[1][1] as f64]];
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    // The root of larger modulus, computed without cancellation.
    let big = (tr + tr.signum() * disc) / 2.0;
    let small = det / big;
    Ok(LinearSplitting { lambda_u: big, lambda_s: small, e_u: eigenvector(m, big), e_s: eigenvector(m, small) })
}

/// Constant frame `(e_u, e_c, e_s)` of a system's linear part, with
/// coordinate changes in both directions. In 2D `e_c` is the unused third axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFrame {
    pub basis: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    pub lambda_u: f64,
    pub lambda_s: f64,
}

impl EigenFrame {
    pub fn of(sys: &SystemSpec) -> Result<Self> {
        let lin = exact_splitting_linear(sys.matrix())?;
        let basis = Matrix3::from_columns(&[lin.e_u, V3::z(), lin.e_s]);
        let inverse = basis.try_inverse().ok_or_else(|| LabError::Singular("eigenframe is degenerate".into()))?;
        Ok(EigenFrame { basis, inverse, lambda_u: lin.lambda_u, lambda_s: lin.lambda_s })
    }

    pub fn e_u(&self) -> V3 {
        self.basis.column(0).into()
    }

    pub fn e_c(&self) -> V3 {
        self.basis.column(1).into()
    }

    pub fn e_s(&self) -> V3 {
        self.basis.column(2).into()
    }

    /// `(u, c, s)` coordinates of a lifted vector.
    pub fn coords(&self, v: &V3) -> V3 {
        self.inverse * v
    }

    pub fn vector(&self, c: &V3) -> V3 {
        self.basis * c
    }
}

/// Pointwise invariant splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingFrame {
    pub point: TorusPoint,
    pub e_u: V3,
    pub e_c: Option<V3>,
    pub e_s: V3,
    /// Largest mismatch between the pushed frame at `p` and the frame at `f(p)`.
    pub residual: f64,
}

pub fn exact_frame_linear(sys: &SystemSpec, p: &TorusPoint) -> Result<SplittingFrame> {
    let lin = exact_splitting_linear(sys.matrix())?;
    Ok(SplittingFrame { point: *p, e_u: lin.e_u, e_c: (sys.dim() == 3).then(V3::z), e_s: lin.e_s, residual: 0.0 })
}

struct RawFrame {
    e_u: V3,
    e_c: Option<V3>,
    e_s: V3,
}

fn orbit(sys: &SystemSpec, p: &TorusPoint, n: usize, backward: bool) -> Result<Vec<TorusPoint>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(*p);
    for k in 0..n {
        let next = if backward { sys.apply_inverse(&out[k])? } else { sys.apply(&out[k])? };
        out.push(next);
    }
    Ok(out)
}

fn align(v: V3, reference: &V3) -> V3 {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

fn gram_schmidt(a: V3, b: V3) -> (V3, V3) {
    let a = a.normalize();
    let b = (b - a * a.dot(&b)).normalize();
    (a, b)
}

fn raw_frame(sys: &SystemSpec, p: &TorusPoint, n: usize) -> Result<RawFrame> {
    let lin = EigenFrame::of(sys)?;
    let (eu, ec, es) = (lin.e_u(), lin.e_c(), lin.e_s());
    let back = orbit(sys, p, n, true)?;
    let fwd = orbit(sys, p, n, false)?;
    let three = sys.dim() == 3;
    let tilt = if three { 0.1 } else { 0.0 };

    let mut u = eu + es * 0.1 + ec * tilt;
    for k in (1..=n).rev() {
        u = (sys.lift_derivative(&back[k].lift()) * u).normalize();
    }
    let mut s = es + eu * 0.1 + ec * tilt;
    for k in (1..=n).rev() {
        let j = sys.lift_derivative(&fwd[k - 1].lift());
        let inv = j.try_inverse().ok_or_else(|| LabError::Singular("derivative singular along orbit".into()))?;
        s = (inv * s).normalize();
    }
    let e_c = if three {
        let (mut a, mut b) = gram_schmidt(eu + es * 0.1, ec + es * 0.1);
        for k in (1..=n).rev() {
            let j = sys.lift_derivative(&back[k].lift());
            (a, b) = gram_schmidt(j * a, j * b);
        }
        let n_cu = a.cross(&b);
        let (mut a, mut b) = gram_schmidt(es + eu * 0.1, ec + eu * 0.1);
        for k in (1..=n).rev() {
            let inv = sys
                .lift_derivative(&fwd[k - 1].lift())
                .try_inverse()
                .ok_or_else(|| LabError::Singular("derivative singular along orbit".into()))?;
            (a, b) = gram_schmidt(inv * a, inv * b);
        }
        let n_cs = a.cross(&b);
        Some(align(n_cu.cross(&n_cs).normalize(), &ec))
    } else {
        None
    };
    Ok(RawFrame { e_u: align(u, &eu), e_c, e_s: align(s, &es) })
}

fn pushed_mismatch(j: &Matrix3<f64>, v: &V3, target: &V3) -> f64 {
    let w = (j * v).normalize();
    (w - target).norm().min((w + target).norm())
}

fn frame_residual(sys: &SystemSpec, p: &TorusPoint, here: &RawFrame, there: &RawFrame) -> f64 {
    let j = sys.lift_derivative(&p.lift());
    let mut r = pushed_mismatch(&j, &here.e_u, &there.e_u).max(pushed_mismatch(&j, &here.e_s, &there.e_s));
    if let (Some(a), Some(b)) = (here.e_c, there.e_c) {
        r = r.max(pushed_mismatch(&j, &a, &b));
    }
    r
}

/// Splitting at `p` by pushing vectors along orbit segments of length `n_iters`.
pub fn estimate_splitting(sys: &SystemSpec, p: &TorusPoint, n_iters: usize) -> Result<SplittingFrame> {
    if n_iters < 20 {
        return Err(LabError::OutOfRange(format!("estimate_splitting needs n_iters >= 20, got {n_iters}")));
    }
    let here = raw_frame(sys, p, n_iters)?;
    let there = raw_frame(sys, &sys.apply(p)?, n_iters)?;
    let residual = frame_residual(sys, p, &here, &there);
    if residual > 1e-8 {
        return Err(LabError::NonConvergence(format!(
            "splitting residual {residual:e} at {:?} after {n_iters} iterations",
            p.coords()
        )));
    }
    Ok(SplittingFrame { point: *p, e_u: here.e_u, e_c: here.e_c, e_s: here.e_s, residual })
}

/// Invariance residual of the pushed frame for `n = 1..=max_n`.
pub fn splitting_convergence(sys: &SystemSpec, p: &TorusPoint, max_n: usize) -> Result<Vec<(usize, f64)>> {
    let image = sys.apply(p)?;
    (1..=max_n)
        .map(|n| {
            let here = raw_frame(sys, p, n)?;
            let there = raw_frame(sys, &image, n)?;
            Ok((n, frame_residual(sys, p, &here, &there)))
        })
        .collect()
}

/// Bracketing rates at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointBracket {
    pub mu: f64,
    pub nu: f64,
    pub gamma: f64,
    pub gamma_hat: f64,
    pub nu_hat: f64,
    pub mu_hat: f64,
}

impl PointBracket {
    /// `λ = ν̂⁻¹`
    pub fn lambda(&self) -> f64 {
        1.0 / self.nu_hat
    }

    /// `ω = μ̂⁻¹`
    pub fn omega(&self) -> f64 {
        1.0 / self.mu_hat
    }

    /// One-dimensional contraction data: fiber rate `k` against base rate `base`,
    /// mirrored onto the unstable side so every condition is defined.
    pub fn contraction_pair(k: f64, base: f64) -> Self {
        PointBracket { mu: base, nu: k, gamma: 1.0, gamma_hat: 1.0, nu_hat: k, mu_hat: base }
    }

    fn check_order(&self) -> std::result::Result<(), String> {
        let b = self;
        let ok = 0.0 < b.mu
            && b.mu <= b.nu
            && b.nu < 1.0
            && b.nu < b.gamma
            && b.gamma <= 1.0 / b.gamma_hat
            && 1.0 / b.gamma_hat < 1.0 / b.nu_hat
            && 1.0 / b.nu_hat <= 1.0 / b.mu_hat;
        if ok {
            Ok(())
        } else {
            Err(format!(
                "mu={} nu={} gamma={} gamma_hat^-1={} nu_hat^-1={} mu_hat^-1={}",
                b.mu,
                b.nu,
                b.gamma,
                1.0 / b.gamma_hat,
                1.0 / b.nu_hat,
                1.0 / b.mu_hat
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketingReport {
    pub grid: Vec<TorusPoint>,
    pub pointwise: Vec<PointBracket>,
    /// `(sup ν, inf μ, inf γ, inf γ̂, sup ν̂, inf μ̂)`
    pub uniform: PointBracket,
    pub margin: f64,
}

impl BracketingReport {
    /// A report holding only constants, for one-dimensional model problems.
    pub fn from_constants(b: PointBracket) -> Self {
        BracketingReport { grid: Vec::new(), pointwise: vec![b], uniform: b, margin: 0.0 }
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.pointwise.iter().map(PointBracket::lambda).collect()
    }

    pub fn omega(&self) -> Vec<f64> {
        self.pointwise.iter().map(PointBracket::omega).collect()
    }
}

fn uniform_of(points: &[PointBracket]) -> PointBracket {
    let mut u = PointBracket {
        mu: f64::INFINITY,
        nu: f64::NEG_INFINITY,
        gamma: f64::INFINITY,
        gamma_hat: f64::INFINITY,
        nu_hat: f64::NEG_INFINITY,
        mu_hat: f64::INFINITY,
    };
    for b in points {
        u.mu = u.mu.min(b.mu);
        u.nu = u.nu.max(b.nu);
        u.gamma = u.gamma.min(b.gamma);
        u.gamma_hat = u.gamma_hat.min(b.gamma_hat);
        u.nu_hat = u.nu_hat.max(b.nu_hat);
        u.mu_hat = u.mu_hat.min(b.mu_hat);
    }
    u
}

/// Rates of `Tf` restricted to each line of the frames, relaxed by `margin`.
pub fn bracketing(sys: &SystemSpec, frames: &[SplittingFrame], margin: f64) -> Result<BracketingReport> {
    if !(margin >= 0.0) {
        return Err(LabError::Domain(format!("margin must be >= 0, got {margin}")));
    }
    if frames.is_empty() {
        return Err(LabError::InsufficientData("no frames to bracket".into()));
    }
    let mut pointwise = Vec::with_capacity(frames.len());
    for fr in frames {
        let j = sys.lift_derivative(&fr.point.lift());
        let ts = (j * fr.e_s).norm();
        let tu = (j * fr.e_u).norm();
        let (gamma, gamma_hat) = match fr.e_c {
            Some(c) => {
                let tc = (j * c).norm();
                (tc - margin, 1.0 / (tc + margin))
            }
            None => (1.0, 1.0),
        };
        let b = PointBracket {
            mu: ts - margin,
            nu: ts + margin,
            gamma,
            gamma_hat,
            nu_hat: 1.0 / (tu - margin),
            mu_hat: 1.0 / (tu + margin),
        };
        b.check_order().map_err(|msg| {
            LabError::NotHyperbolic(format!("bracketing order fails at {:?}: {msg}", fr.point.coords()))
        })?;
        pointwise.push(b);
    }
    Ok(BracketingReport {
        grid: frames.iter().map(|f| f.point).collect(),
        uniform: uniform_of(&pointwise),
        pointwise,
        margin,
    })
}

/// Frames and bracketing over the `n^d` grid, in grid order.
pub fn bracketing_on_grid(sys: &SystemSpec, n: usize, n_iters: usize, margin: f64) -> Result<BracketingReport> {
    let grid = grid_points(sys.dim(), n);
    let frames: Vec<SplittingFrame> =
        grid.par_iter().map(|p| estimate_splitting(sys, p, n_iters)).collect::<Result<_>>()?;
    bracketing(sys, &frames, margin)
}

/// Coarse-grid admission check: domination must hold with 10% to spare.
pub fn admission_check(sys: &SystemSpec) -> Result<BracketingReport> {
    let n = if sys.dim() == 2 { 16 } else { 8 };
    let report = bracketing_on_grid(sys, n, 30, DEFAULT_MARGIN)?;
    let u = report.uniform;
    if !(1.1 * u.nu < u.gamma) || !(1.1 / u.gamma_hat < 1.0 / u.nu_hat) {
        return Err(LabError::NotHyperbolic(format!(
            "{} with delta={} epsilon={} misses the 10% domination margin \
             (nu={:.4}, gamma={:.4}, gamma_hat^-1={:.4}, nu_hat^-1={:.4})",
            sys.kind(),
            sys.delta(),
            sys.epsilon(),
            u.nu,
            u.gamma,
            1.0 / u.gamma_hat,
            1.0 / u.nu_hat
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExponentCondition {
    Eu,
    Es,
    Ecu,
    Ecs,
    Ec,
    WuC2,
    WsC2,
    WuC1,
    WsC1,
    ThmACu,
    ThmACs,
    ThmAC,
    ThmBInCu,
    ThmBInCs,
    ThmBFull,
}

impl ExponentCondition {
    pub const ALL: [ExponentCondition; 15] = [
        ExponentCondition::Eu,
        ExponentCondition::Es,
        ExponentCondition::Ecu,
        ExponentCondition::Ecs,
        ExponentCondition::Ec,
        ExponentCondition::WuC2,
        ExponentCondition::WsC2,
        ExponentCondition::WuC1,
        ExponentCondition::WsC1,
        ExponentCondition::ThmACu,
        ExponentCondition::ThmACs,
        ExponentCondition::ThmAC,
        ExponentCondition::ThmBInCu,
        ExponentCondition::ThmBInCs,
        ExponentCondition::ThmBFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExponentCondition::Eu => "Eu",
            ExponentCondition::Es => "Es",
            ExponentCondition::Ecu => "Ecu",
            ExponentCondition::Ecs => "Ecs",
            ExponentCondition::Ec => "Ec",
            ExponentCondition::WuC2 => "Wu_C2",
            ExponentCondition::WsC2 => "Ws_C2",
            ExponentCondition::WuC1 => "Wu_C1",
            ExponentCondition::WsC1 => "Ws_C1",
            ExponentCondition::ThmACu => "ThmA_cu",
            ExponentCondition::ThmACs => "ThmA_cs",
            ExponentCondition::ThmAC => "ThmA_c",
            ExponentCondition::ThmBInCu => "ThmB_in_cu",
            ExponentCondition::ThmBInCs => "ThmB_in_cs",
            ExponentCondition::ThmBFull => "ThmB_full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Clauses `lhs < C·base^θ`, each as `(lhs, C, base)`.
    fn clauses(self, b: &PointBracket) -> Vec<(f64, f64, f64)> {
        use ExponentCondition::*;
        let eu = (b.nu_hat, b.gamma_hat, b.mu);
        let es = (b.nu, b.gamma, b.mu_hat);
        let ecu = (b.nu, b.gamma, b.mu);
        let ecs = (b.nu_hat, b.gamma_hat, b.mu_hat);
        let a_cu = (b.nu, 1.0, b.mu);
        let a_cs = (b.nu_hat, 1.0, b.mu_hat);
        match self {
            Eu | WuC2 => vec![eu],
            Es | WsC2 => vec![es],
            Ecu => vec![ecu],
            Ecs => vec![ecs],
            Ec => vec![ecu, ecs],
            WuC1 => vec![(b.nu_hat, b.gamma_hat, b.nu_hat * b.mu)],
            WsC1 => vec![(b.nu, b.gamma, b.nu * b.mu_hat)],
            ThmACu | ThmBInCs => vec![a_cu],
            ThmACs | ThmBInCu => vec![a_cs],
            ThmAC | ThmBFull => vec![a_cu, a_cs],
        }
    }

    /// Whether the strict inequalities hold at exponent `theta`.
    pub fn holds(self, b: &PointBracket, theta: f64) -> bool {
        self.clauses(b).iter().all(|&(lhs, c, base)| lhs < c * base.powf(theta))
    }
}

impl fmt::Display for ExponentCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ExponentMode {
    #[default]
    Uniform,
    Pointwise,
}

impl ExponentMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(ExponentMode::Uniform),
            "pointwise" => Some(ExponentMode::Pointwise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedExponent {
    pub condition: ExponentCondition,
    pub theta_max: f64,
    pub mode: ExponentMode,
    pub warning: Option<String>,
}

fn solve_clauses(cond: ExponentCondition, b: &PointBracket) -> Result<f64> {
    let mut theta: f64 = 1.0;
    for (lhs, c, base) in cond.clauses(b) {
        if !(base > 0.0 && base < 1.0) || !(lhs > 0.0) || !(c > 0.0) {
            return Err(LabError::Domain(format!("{cond}: rates out of range (lhs={lhs}, C={c}, base={base})")));
        }
        let ratio = lhs / c;
        let t = if ratio >= 1.0 { 0.0 } else { ratio.ln() / base.ln() };
        theta = theta.min(t);
    }
    Ok(theta)
}

pub fn predicted_exponent(
    report: &BracketingReport,
    condition: ExponentCondition,
    mode: ExponentMode,
) -> Result<PredictedExponent> {
    let theta_max = match mode {
        ExponentMode::Uniform => solve_clauses(condition, &report.uniform)?,
        ExponentMode::Pointwise => {
            let mut t: f64 = 1.0;
            for b in &report.pointwise {
                t = t.min(solve_clauses(condition, b)?);
            }
            t
        }
    };
    let warning =
        (theta_max <= 0.0).then(|| format!("{condition} cannot hold for any positive exponent with these rates"));
    Ok(PredictedExponent { condition, theta_max, mode, warning })
}
