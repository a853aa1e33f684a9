//! Points, distances and transversals on the flat tori T² and T³, plus the
//! twisted quotient `T² × [0,1] / (x,0) ~ (−x,1)`.
//!
//! Lifted (unwrapped) vectors are carried as [`V3`]; two-dimensional data
//! keeps its third component at zero so the same arithmetic serves both.

use nalgebra::Vector3;

use crate::error::{LabError, Result};

/// Lifted vector in R³. Two-dimensional quantities use `z = 0`.
pub type V3 = Vector3<f64>;

/// A point of the d-torus (d = 2 or 3) with every coordinate in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    coords: [f64; 3],
    dim: usize,
}

fn reduce(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(LabError::Domain(format!("torus dimension must be 2 or 3, got {dim}")))
    }
}

/// Reduce a real vector modulo the integer lattice.
pub fn wrap(v: &[f64]) -> Result<TorusPoint> {
    check_dim(v.len())?;
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(LabError::Domain(format!("non-finite coordinate {bad}")));
    }
    let mut coords = [0.0; 3];
    for (c, x) in coords.iter_mut().zip(v) {
        *c = reduce(*x);
    }
    Ok(TorusPoint { coords, dim: v.len() })
}

/// Wrap a lifted vector, keeping only the first `dim` components.
pub fn wrap_lift(v: &V3, dim: usize) -> Result<TorusPoint> {
    wrap(&v.as_slice()[..dim])
}

impl TorusPoint {
    pub fn new(v: &[f64]) -> Result<Self> {
        wrap(v)
    }

    pub fn origin(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(TorusPoint { coords: [0.0; 3], dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// The representative in `[0,1)^d`, as a lifted vector.
    pub fn lift(&self) -> V3 {
        V3::new(self.coords[0], self.coords[1], self.coords[2])
    }

    /// Translate by a lifted vector and wrap.
    pub fn shifted(&self, v: &V3) -> TorusPoint {
        let mut coords = [0.0; 3];
        for i in 0..self.dim {
            coords[i] = reduce(self.coords[i] + v[i]);
        }
        TorusPoint { coords, dim: self.dim }
    }
}

/// Shortest lifted displacement `q − p`, each component in `[−1/2, 1/2]`.
pub fn torus_delta(p: &TorusPoint, q: &TorusPoint) -> Result<V3> {
    if p.dim != q.dim {
        return Err(LabError::DimensionMismatch { expected: p.dim, got: q.dim });
    }
    let mut d = V3::zeros();
    for i in 0..p.dim {
        let x = q.coords[i] - p.coords[i];
        d[i] = x - x.round();
    }
    Ok(d)
}

/// Flat distance: the shortest Euclidean length over lattice translates.
pub fn torus_dist(p: &TorusPoint, q: &TorusPoint) -> Result<f64> {
    Ok(torus_delta(p, q)?.norm())
}

/// Distance between a lifted vector and a torus point.
pub fn lift_dist(v: &V3, q: &TorusPoint) -> f64 {
    let mut d = 0.0;
    for i in 0..q.dim {
        let x = q.coords[i] - v[i];
        let x = x - x.round();
        d += x * x;
    }
    d.sqrt()
}

/// The lattice translate of `p` closest to `reference`.
pub fn lift_near(p: &TorusPoint, reference: &[f64]) -> Result<V3> {
    if reference.len() != p.dim {
        return Err(LabError::DimensionMismatch { expected: p.dim, got: reference.len() });
    }
    let mut v = V3::zeros();
    for i in 0..p.dim {
        v[i] = p.coords[i] + (reference[i] - p.coords[i]).round();
    }
    Ok(v)
}

/// A straight transversal segment `base + s·direction`, `|s| ≤ radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transversal {
    base: TorusPoint,
    direction: V3,
    radius: f64,
}

impl Transversal {
    pub fn new(base: TorusPoint, direction: &[f64], radius: f64) -> Result<Self> {
        if direction.len() != base.dim() {
            return Err(LabError::DimensionMismatch { expected: base.dim(), got: direction.len() });
        }
        let mut dir = V3::zeros();
        dir.as_mut_slice()[..direction.len()].copy_from_slice(direction);
        if (dir.norm() - 1.0).abs() > 1e-12 {
            return Err(LabError::Domain(format!("transversal direction must be a unit vector, |v| = {}", dir.norm())));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::Domain(format!("transversal radius must be positive, got {radius}")));
        }
        Ok(Transversal { base, direction: dir, radius })
    }

    /// Build from an arbitrary nonzero direction, normalising it first.
    pub fn through(base: TorusPoint, direction: &[f64], radius: f64) -> Result<Self> {
        let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(LabError::Domain("zero transversal direction".into()));
        }
        let unit: Vec<f64> = direction.iter().map(|x| x / n).collect();
        Self::new(base, &unit, radius)
    }

    pub fn base(&self) -> TorusPoint {
        self.base
    }

    pub fn direction(&self) -> V3 {
        self.direction
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Signed coordinate of the orthogonal projection of `q` onto the segment line.
    pub fn coordinate_of(&self, q: &TorusPoint) -> Result<f64> {
        Ok(torus_delta(&self.base, q)?.dot(&self.direction))
    }
}

pub fn transversal_point(t: &Transversal, s: f64) -> Result<TorusPoint> {
    if !(s.abs() <= t.radius) {
        return Err(LabError::OutOfRange(format!("transversal parameter {s} outside [-{r}, {r}]", r = t.radius)));
    }
    Ok(t.base.shifted(&(t.direction * s)))
}

/// A point of `M = T² × [0,1]` with `(x, 0)` glued to `(−x, 1)`.
///
/// The stored representative always has `height ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientPoint {
    base: TorusPoint,
    height: f64,
}

impl QuotientPoint {
    /// Canonical representative of the class of `(x, t)` for any real `t`.
    pub fn new(x: &[f64], t: f64) -> Result<Self> {
        if x.len() != 2 {
            return Err(LabError::DimensionMismatch { expected: 2, got: x.len() });
        }
        if !t.is_finite() {
            return Err(LabError::Domain(format!("non-finite height {t}")));
        }
        let n = t.floor();
        let mut h = t - n;
        let mut flip = (n as i64).rem_euclid(2) == 1;
        if h >= 1.0 {
            h = 0.0;
            flip = !flip;
        }
        let base = if flip { wrap(&[-x[0], -x[1]])? } else { wrap(x)? };
        Ok(QuotientPoint { base, height: h })
    }

    pub fn base(&self) -> TorusPoint {
        self.base
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// The other representative in the double cover `T² × [1, 2)`.
    pub fn twin(&self) -> (TorusPoint, f64) {
        let b = self.base.coords();
        let flipped = wrap(&[-b[0], -b[1]]).expect("finite coordinates");
        (flipped, self.height + 1.0)
    }
}

/// Flat distance on the quotient, computed on the double cover.
pub fn quotient_dist(p: &QuotientPoint, q: &QuotientPoint) -> f64 {
    let qb = q.base.coords();
    let flipped = wrap(&[-qb[0], -qb[1]]).expect("finite coordinates");
    let mut best = f64::INFINITY;
    for k in -2i32..=2 {
        let img = if k.rem_euclid(2) == 0 { q.base } else { flipped };
        let dt = q.height + f64::from(k) - p.height;
        let dx = torus_dist(&p.base, &img).expect("both points are 2-dimensional");
        best = best.min((dx * dx + dt * dt).sqrt());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(v: &[f64]) -> TorusPoint {
        wrap(v).unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(tp(&[0.3, 0.7]).coords(), &[0.3, 0.7]);
        assert_eq!(tp(&[1.25, -0.5]).coords(), &[0.25, 0.5]);
        assert_eq!(tp(&[2.0, 3.0]).coords(), &[0.0, 0.0]);
        assert_eq!(tp(&[-1e-20, 0.5]).coords(), &[0.0, 0.5]);
        assert!(matches!(wrap(&[f64::NAN, 0.0]), Err(LabError::Domain(_))));
        assert!(wrap(&[0.1]).is_err());
    }

    #[test]
    fn distance_examples() {
        let d = |a: &[f64], b: &[f64]| torus_dist(&tp(a), &tp(b)).unwrap();
        assert_eq!(d(&[0.1, 0.2], &[0.1, 0.2]), 0.0);
        assert!((d(&[0.05, 0.0], &[0.95, 0.0]) - 0.1).abs() < 1e-12);
        assert!((d(&[0.1, 0.9], &[0.9, 0.1]) - 0.2828427).abs() < 1e-7);
        assert!(torus_dist(&tp(&[0.1, 0.1]), &tp(&[0.1, 0.1, 0.1])).is_err());
    }

    #[test]
    fn lift_examples() {
        let v = lift_near(&tp(&[0.95, 0.0]), &[0.0, 0.0]).unwrap();
        assert!((v[0] + 0.05).abs() < 1e-12 && v[1] == 0.0);
        let v = lift_near(&tp(&[0.3, 0.3]), &[5.0, 5.0]).unwrap();
        assert!((v[0] - 5.3).abs() < 1e-12 && (v[1] - 5.3).abs() < 1e-12);
    }

    #[test]
    fn transversal_examples() {
        let t = Transversal::new(tp(&[0.0, 0.0]), &[0.0, 1.0], 0.1).unwrap();
        let q = transversal_point(&t, 0.05).unwrap();
        assert!((q.get(1) - 0.05).abs() < 1e-15 && q.get(0) == 0.0);
        assert_eq!(transversal_point(&t, 0.0).unwrap(), t.base());
        assert!(matches!(transversal_point(&t, 0.2), Err(LabError::OutOfRange(_))));
        let t = Transversal::new(tp(&[0.05, 0.0]), &[1.0, 0.0], 0.1).unwrap();
        let q = transversal_point(&t, -0.1).unwrap();
        assert!((q.get(0) - 0.95).abs() < 1e-12);
        assert!(Transversal::new(tp(&[0.0, 0.0]), &[1.0, 1.0], 0.1).is_err());
        assert!(Transversal::new(tp(&[0.0, 0.0]), &[1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn quotient_gluing() {
        let a = QuotientPoint::new(&[0.2, 0.3], 0.0).unwrap();
        let b = QuotientPoint::new(&[-0.2, -0.3], 1.0).unwrap();
        assert_eq!(a, b);
        let c = QuotientPoint::new(&[0.2, 0.3], 2.5).unwrap();
        assert_eq!(c.base().coords(), &[0.2, 0.3]);
        assert_eq!(c.height(), 0.5);
        assert!(quotient_dist(&a, &b) < 1e-15);
        // Across the seam the flat metric stays small.
        let top = QuotientPoint::new(&[-0.2, -0.3], 0.99).unwrap();
        assert!((quotient_dist(&a, &top) - 0.01).abs() < 1e-12);
    }
}
