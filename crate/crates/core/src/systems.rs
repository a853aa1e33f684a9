//! Concrete maps of T² and T³: hyperbolic toral automorphisms, their smooth
//! trigonometric perturbations, skew products over them, the twisted quotient
//! system and one-parameter loops of such maps.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{LabError, Result};
use crate::phasespace::{wrap_lift, QuotientPoint, TorusPoint, V3};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    LinearAnosov,
    PerturbedAnosov,
    SkewProduct,
    PerturbedSkew,
    QuotientCat,
}

impl SystemKind {
    pub const ALL: [SystemKind; 5] = [
        SystemKind::LinearAnosov,
        SystemKind::PerturbedAnosov,
        SystemKind::SkewProduct,
        SystemKind::PerturbedSkew,
        SystemKind::QuotientCat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::LinearAnosov => "linear_anosov",
            SystemKind::PerturbedAnosov => "perturbed_anosov",
            SystemKind::SkewProduct => "skew_product",
            SystemKind::PerturbedSkew => "perturbed_skew",
            SystemKind::QuotientCat => "quotient_cat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn dim(self) -> usize {
        match self {
            SystemKind::SkewProduct | SystemKind::PerturbedSkew => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Base perturbation family, scaled by δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseShape {
    /// `δ·(sin 2πx₂, sin 2πx₁)`
    SinCross,
}

impl BaseShape {
    pub fn name(self) -> &'static str {
        "sin_cross"
    }

    pub fn parse(s: &str) -> Option<Self> {
        (s == "sin_cross").then_some(BaseShape::SinCross)
    }
}

/// Fiber rule `z ↦ z + ε·φ(b, z)` of a skew product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FiberShape {
    /// `φ = sin 2πb₁`
    SinB1,
    /// `φ = sin(2πz)·cos(2πb₁)`
    SinZCosB1,
}

impl FiberShape {
    pub fn name(self) -> &'static str {
        match self {
            FiberShape::SinB1 => "sin_b1",
            FiberShape::SinZCosB1 => "sin_z_cos_b1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sin_b1" => Some(FiberShape::SinB1),
            "sin_z_cos_b1" => Some(FiberShape::SinZCosB1),
            _ => None,
        }
    }

    fn value(self, b1: f64, z: f64) -> f64 {
        match self {
            FiberShape::SinB1 => (TAU * b1).sin(),
            FiberShape::SinZCosB1 => (TAU * z).sin() * (TAU * b1).cos(),
        }
    }

    /// `(∂φ/∂b₁, ∂φ/∂z)`
    fn gradient(self, b1: f64, z: f64) -> (f64, f64) {
        match self {
            FiberShape::SinB1 => (TAU * (TAU * b1).cos(), 0.0),
            FiberShape::SinZCosB1 => {
                (-TAU * (TAU * z).sin() * (TAU * b1).sin(), TAU * (TAU * z).cos() * (TAU * b1).cos())
            }
        }
    }
}

/// Image point together with the derivative at the source point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub image: TorusPoint,
    pub derivative: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    kind: SystemKind,
    matrix: [[i64; 2]; 2],
    delta: f64,
    epsilon: f64,
    base_shape: BaseShape,
    fiber_shape: FiberShape,
}

pub const CAT: [[i64; 2]; 2] = [[2, 1], [1, 1]];

/// Integer inverse of a unimodular 2×2 matrix.
pub fn integer_inverse(m: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] * det, -m[0][1] * det], [-m[1][0] * det, m[0][0] * det]]
}

pub fn check_hyperbolic(m: [[i64; 2]; 2]) -> Result<()> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    if det.abs() != 1 {
        return Err(LabError::NotHyperbolic(format!("matrix {m:?} has determinant {det}, need ±1")));
    }
    if tr.abs() <= 2 {
        return Err(LabError::NotHyperbolic(format!("matrix {m:?} has trace {tr}, need |trace| > 2")));
    }
    Ok(())
}

impl SystemSpec {
    pub fn new(
        kind: SystemKind,
        matrix: [[i64; 2]; 2],
        delta: f64,
        epsilon: f64,
        base_shape: BaseShape,
        fiber_shape: FiberShape,
    ) -> Result<Self> {
        check_hyperbolic(matrix)?;
        for (name, v) in [("delta", delta), ("epsilon", epsilon)] {
            if !v.is_finite() || v < 0.0 {
                return Err(LabError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let no_base = matches!(kind, SystemKind::LinearAnosov | SystemKind::SkewProduct | SystemKind::QuotientCat);
        if no_base && delta != 0.0 {
            return Err(LabError::Config(format!("delta must be 0 for kind {kind}, got {delta}")));
        }
        if kind.dim() == 2 && epsilon != 0.0 {
            return Err(LabError::Config(format!(
                "epsilon only applies to skew products, got {epsilon} for kind {kind}"
            )));
        }
        Ok(SystemSpec { kind, matrix, delta, epsilon, base_shape, fiber_shape })
    }

    pub fn cat() -> Self {
        Self::new(SystemKind::LinearAnosov, CAT, 0.0, 0.0, BaseShape::SinCross, FiberShape::SinB1)
            .expect("cat map is hyperbolic")
    }

    pub fn perturbed_cat(delta: f64) -> Result<Self> {
        Self::new(SystemKind::PerturbedAnosov, CAT, delta, 0.0, BaseShape::SinCross, FiberShape::SinB1)
    }

    pub fn skew(epsilon: f64, fiber: FiberShape) -> Result<Self> {
        Self::new(SystemKind::SkewProduct, CAT, 0.0, epsilon, BaseShape::SinCross, fiber)
    }

    pub fn perturbed_skew(delta: f64, epsilon: f64, fiber: FiberShape) -> Result<Self> {
        Self::new(SystemKind::PerturbedSkew, CAT, delta, epsilon, BaseShape::SinCross, fiber)
    }

    pub fn quotient_cat() -> Self {
        Self::new(SystemKind::QuotientCat, CAT, 0.0, 0.0, BaseShape::SinCross, FiberShape::SinB1)
            .expect("cat map is hyperbolic")
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.matrix
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base_shape(&self) -> BaseShape {
        self.base_shape
    }

    pub fn fiber_shape(&self) -> FiberShape {
        self.fiber_shape
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Same system with different amplitudes; the kind is kept.
    pub fn with_amplitudes(&self, delta: f64, epsilon: f64) -> Result<Self> {
        Self::new(self.kind, self.matrix, delta, epsilon, self.base_shape, self.fiber_shape)
    }

    /// The unperturbed linear map on the same torus (block `diag(A, 1)` in 3D).
    pub fn linear_part(&self) -> SystemSpec {
        let kind = match self.dim() {
            3 => SystemKind::SkewProduct,
            _ if self.kind == SystemKind::QuotientCat => SystemKind::QuotientCat,
            _ => SystemKind::LinearAnosov,
        };
        SystemSpec { kind, delta: 0.0, epsilon: 0.0, ..*self }
    }

    pub fn linear_matrix(&self) -> Matrix3<f64> {
        let a = self.matrix;
        let mut m = Matrix3::zeros();
        m[(0, 0)] = a[0][0] as f64;
        m[(0, 1)] = a[0][1] as f64;
        m[(1, 0)] = a[1][0] as f64;
        m[(1, 1)] = a[1][1] as f64;
        m[(2, 2)] = 1.0;
        m
    }

    fn linear_inverse_matrix(&self) -> Matrix3<f64> {
        let a = integer_inverse(self.matrix);
        let mut m = Matrix3::zeros();
        m[(0, 0)] = a[0][0] as f64;
        m[(0, 1)] = a[0][1] as f64;
        m[(1, 0)] = a[1][0] as f64;
        m[(1, 1)] = a[1][1] as f64;
        m[(2, 2)] = 1.0;
        m
    }

    /// `g(v) − Lv` for the linear part `L`, on lifted coordinates.
    pub fn perturbation(&self, v: &V3) -> V3 {
        let mut p = V3::zeros();
        if self.delta != 0.0 {
            p[0] = self.delta * (TAU * v[1]).sin();
            p[1] = self.delta * (TAU * v[0]).sin();
        }
        if self.dim() == 3 && self.epsilon != 0.0 {
            p[2] = self.epsilon * self.fiber_shape.value(v[0], v[2]);
        }
        p
    }

    /// The lift of the map to R^d.
    pub fn lift_apply(&self, v: &V3) -> V3 {
        let mut out = self.linear_matrix() * v;
        if self.dim() == 2 {
            out[2] = 0.0;
        }
        out + self.perturbation(v)
    }

    /// Derivative of the lift; in 2D the unused block is the identity.
    pub fn lift_derivative(&self, v: &V3) -> Matrix3<f64> {
        let mut m = self.linear_matrix();
        if self.delta != 0.0 {
            m[(0, 1)] += TAU * self.delta * (TAU * v[1]).cos();
            m[(1, 0)] += TAU * self.delta * (TAU * v[0]).cos();
        }
        if self.dim() == 3 && self.epsilon != 0.0 {
            let (db, dz) = self.fiber_shape.gradient(v[0], v[2]);
            m[(2, 0)] += self.epsilon * db;
            m[(2, 2)] += self.epsilon * dz;
        }
        m
    }

    fn check_point(&self, p: &TorusPoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(LabError::DimensionMismatch { expected: self.dim(), got: p.dim() });
        }
        Ok(())
    }

    pub fn apply(&self, p: &TorusPoint) -> Result<TorusPoint> {
        self.check_point(p)?;
        wrap_lift(&self.lift_apply(&p.lift()), self.dim())
    }

    pub fn derivative(&self, p: &TorusPoint) -> Result<Jet> {
        let image = self.apply(p)?;
        let d = self.dim();
        let m = self.lift_derivative(&p.lift());
        Ok(Jet { image, derivative: DMatrix::from_fn(d, d, |i, j| m[(i, j)]) })
    }

    /// Preimage of a lifted point, as a lifted point near `A⁻¹·y`.
    pub fn lift_inverse(&self, y: &V3) -> Result<(V3, usize)> {
        let mut v = self.linear_inverse_matrix() * y;
        if self.dim() == 2 {
            v[2] = 0.0;
        }
        for step in 0..=50 {
            let r = self.lift_apply(&v) - y;
            if r.amax() <= 1e-14 {
                return Ok((v, step));
            }
            if step == 50 {
                break;
            }
            let j = self.lift_derivative(&v);
            let dv = j
                .try_inverse()
                .ok_or_else(|| LabError::Singular(format!("derivative singular at {:?}", v.as_slice())))?
                * r;
            v -= dv;
        }
        Err(LabError::NonConvergence(format!(
            "inverse Newton iteration did not converge in 50 steps at {:?}; perturbation too large",
            y.as_slice()
        )))
    }

    pub fn apply_inverse(&self, p: &TorusPoint) -> Result<TorusPoint> {
        Ok(self.apply_inverse_counted(p)?.0)
    }

    /// Inverse together with the number of Newton updates it took.
    pub fn apply_inverse_counted(&self, p: &TorusPoint) -> Result<(TorusPoint, usize)> {
        self.check_point(p)?;
        let (v, steps) = self.lift_inverse(&p.lift())?;
        Ok((wrap_lift(&v, self.dim())?, steps))
    }

    /// The quotient system `(x, t) ↦ (Ax, t)`.
    pub fn apply_quotient(&self, q: &QuotientPoint) -> Result<QuotientPoint> {
        if self.kind != SystemKind::QuotientCat {
            return Err(LabError::Domain(format!("{} does not act on the quotient", self.kind)));
        }
        let x = self.lift_apply(&q.base().lift());
        QuotientPoint::new(&[x[0], x[1]], q.height())
    }
}

/// Largest pointwise distance between two systems on an `n^d` grid.
pub fn c0_distance(a: &SystemSpec, b: &SystemSpec, n: usize) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(LabError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let mut best: f64 = 0.0;
    for p in grid_points(a.dim(), n) {
        let v = p.lift();
        best = best.max((a.lift_apply(&v) - b.lift_apply(&v)).norm());
    }
    Ok(best)
}

/// Row-major grid `{i/n}` in each coordinate.
pub fn grid_points(dim: usize, n: usize) -> Vec<TorusPoint> {
    let h = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n.pow(dim as u32));
    for i in 0..n {
        for j in 0..n {
            if dim == 2 {
                out.push(TorusPoint::new(&[i as f64 * h, j as f64 * h]).expect("grid point"));
            } else {
                for k in 0..n {
                    out.push(TorusPoint::new(&[i as f64 * h, j as f64 * h, k as f64 * h]).expect("grid point"));
                }
            }
        }
    }
    out
}

/// Loop of systems `t ↦ g_t`, `t ∈ [0, 2)`, with `g_0 = f` and `g_1 = g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionLoop {
    f: SystemSpec,
    g: SystemSpec,
}

impl SuspensionLoop {
    pub fn new(f: SystemSpec, g: SystemSpec) -> Result<Self> {
        if f.dim() != g.dim() || f.matrix != g.matrix {
            return Err(LabError::Config("loop endpoints must share the torus and the linear part".into()));
        }
        if f.base_shape != g.base_shape || (f.dim() == 3 && f.fiber_shape != g.fiber_shape) {
            return Err(LabError::Config("loop endpoints must share perturbation shapes".into()));
        }
        Ok(SuspensionLoop { f, g })
    }

    pub fn f(&self) -> &SystemSpec {
        &self.f
    }

    pub fn g(&self) -> &SystemSpec {
        &self.g
    }

    /// `β(t) = sin²(πt/2)`: vanishes at 0 and 2, equals 1 at 1.
    pub fn bump(t: f64) -> f64 {
        let s = (PI * t / 2.0).sin();
        s * s
    }

    pub fn bump_derivative(t: f64) -> f64 {
        PI / 2.0 * (PI * t).sin()
    }

    /// `∂g_t/∂t` at a lifted point.
    pub fn time_derivative(&self, t: f64, v: &V3) -> V3 {
        (self.g.perturbation(v) - self.f.perturbation(v)) * Self::bump_derivative(t)
    }
}

pub fn suspension_slice(lp: &SuspensionLoop, t: f64) -> Result<SystemSpec> {
    if !(0.0..2.0).contains(&t) {
        return Err(LabError::OutOfRange(format!("loop parameter {t} outside [0, 2)")));
    }
    let b = SuspensionLoop::bump(t);
    if b == 0.0 {
        return Ok(lp.f);
    }
    if b == 1.0 {
        return Ok(lp.g);
    }
    let delta = lp.f.delta + b * (lp.g.delta - lp.f.delta);
    let epsilon = lp.f.epsilon + b * (lp.g.epsilon - lp.f.epsilon);
    let kind = if lp.g.delta != 0.0 { lp.g.kind } else { lp.f.kind };
    SystemSpec::new(kind, lp.f.matrix, delta, epsilon, lp.f.base_shape, lp.f.fiber_shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::{torus_dist, wrap};

    #[test]
    fn cat_examples() {
        let cat = SystemSpec::cat();
        let p = wrap(&[0.5, 0.5]).unwrap();
        let q = cat.apply(&p).unwrap();
        assert!(torus_dist(&q, &wrap(&[0.5, 0.0]).unwrap()).unwrap() < 1e-15);
        let back = cat.apply_inverse(&wrap(&[0.5, 0.0]).unwrap()).unwrap();
        assert!(torus_dist(&back, &p).unwrap() < 1e-15);
        assert_eq!(integer_inverse(CAT), [[1, -1], [-1, 2]]);
        let jet = cat.derivative(&p).unwrap();
        assert_eq!(jet.derivative, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn skew_fiber_example() {
        let s = SystemSpec::skew(0.1, FiberShape::SinB1).unwrap();
        let q = s.apply(&wrap(&[0.25, 0.0, 0.5]).unwrap()).unwrap();
        assert!((q.get(2) - 0.6).abs() < 1e-12);
        let d = s.linear_part().derivative(&wrap(&[0.1, 0.2, 0.3]).unwrap()).unwrap();
        assert_eq!(d.derivative[(2, 2)], 1.0);
        assert_eq!(d.derivative[(2, 0)], 0.0);
        assert_eq!(d.derivative[(0, 2)], 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(
            SystemSpec::new(
                SystemKind::LinearAnosov,
                [[1, 1], [0, 1]],
                0.0,
                0.0,
                BaseShape::SinCross,
                FiberShape::SinB1
            ),
            Err(LabError::NotHyperbolic(_))
        ));
        assert!(matches!(
            SystemSpec::new(
                SystemKind::LinearAnosov,
                [[2, 0], [0, 2]],
                0.0,
                0.0,
                BaseShape::SinCross,
                FiberShape::SinB1
            ),
            Err(LabError::NotHyperbolic(_))
        ));
        assert!(
            SystemSpec::new(SystemKind::LinearAnosov, CAT, 0.1, 0.0, BaseShape::SinCross, FiberShape::SinB1).is_err()
        );
        assert!(SystemSpec::perturbed_cat(-0.1).is_err());
        assert!(SystemSpec::new(SystemKind::PerturbedAnosov, CAT, 0.1, 0.1, BaseShape::SinCross, FiberShape::SinB1)
            .is_err());
    }

    #[test]
    fn newton_steps_on_grid() {
        let g = SystemSpec::perturbed_cat(0.01).unwrap();
        let worst = grid_points(2, 64).iter().map(|p| g.apply_inverse_counted(p).unwrap().1).max().unwrap();
        assert!(worst <= 6, "worst Newton count {worst}");
    }

    #[test]
    fn slices_hit_endpoints() {
        let f = SystemSpec::perturbed_cat(0.0).unwrap();
        let g = SystemSpec::perturbed_cat(0.01).unwrap();
        let lp = SuspensionLoop::new(f, g).unwrap();
        assert_eq!(suspension_slice(&lp, 0.0).unwrap(), f);
        assert_eq!(suspension_slice(&lp, 1.0).unwrap(), g);
        assert!(suspension_slice(&lp, 2.0).is_err());
        assert!(suspension_slice(&lp, -0.1).is_err());
        let mid = suspension_slice(&lp, 0.5).unwrap();
        assert!((mid.delta() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn quotient_commutes_with_gluing() {
        let q = SystemSpec::quotient_cat();
        let a = QuotientPoint::new(&[0.13, 0.71], 0.0).unwrap();
        let b = QuotientPoint::new(&[-0.13, -0.71], 1.0).unwrap();
        assert_eq!(q.apply_quotient(&a).unwrap(), q.apply_quotient(&b).unwrap());
        assert!(SystemSpec::cat().apply_quotient(&a).is_err());
    }
}
