//! Convex bodies, convex rings, and the space-time segment constructions.
//!
//! Bodies are given by defining functions `φ` with `body = {φ < 0}`. Every
//! built-in defining function is normalised so that `|∇φ| ≈ 1` near the
//! boundary, which lets band tolerances be read in length units.
//!
//! Positions are stored as [`Point`] for both supported dimensions; in the
//! one-dimensional case the second coordinate is identically zero.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Number of boundary samples used for clearance and distance estimates.
pub const BOUNDARY_SAMPLES: usize = 512;

/// Tolerance of the random midpoint convexity test on analytic bodies.
pub const EPS_GEOM: f64 = 1e-9;

/// Serializable description of a body: a kind tag plus numeric parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    /// One-dimensional body `(lo, hi)`.
    Interval { lo: f64, hi: f64 },
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        #[serde(default)]
        center: [f64; 2],
        semi_axes: [f64; 2],
    },
    /// `|x/a|^q + |y/b|^q < 1` with exponent `q ≥ 2`.
    Superellipse {
        #[serde(default)]
        center: [f64; 2],
        semi_axes: [f64; 2],
        exponent: f64,
    },
    /// Convex polygon whose edge half-planes are combined by a soft maximum
    /// of width `smoothing`.
    SmoothedPolygon {
        vertices: Vec<[f64; 2]>,
        smoothing: f64,
    },
}

impl BodySpec {
    pub fn dim(&self) -> usize {
        match self {
            BodySpec::Interval { .. } => 1,
            _ => 2,
        }
    }
}

/// Result of a containment query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Inside,
    BoundaryBand,
    Outside,
}

#[derive(Clone, Debug)]
struct HalfPlane {
    normal: Point,
    offset: f64,
}

#[derive(Clone, Debug)]
enum Shape {
    Interval { center: f64, half: f64 },
    Disk { center: Point, radius: f64 },
    Ellipse { center: Point, axes: Point, scale: f64 },
    Superellipse { center: Point, axes: Point, exponent: f64, scale: f64 },
    Polygon { edges: Vec<HalfPlane>, smoothing: f64, centroid: Point },
}

/// A smooth bounded convex body.
#[derive(Clone, Debug)]
pub struct ConvexBody {
    spec: BodySpec,
    shape: Shape,
    bound: f64,
    band: f64,
    boundary: Vec<Point>,
}

impl ConvexBody {
    pub fn new(spec: BodySpec) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let (shape, bound) = match &spec {
            BodySpec::Interval { lo, hi } => {
                if !finite(&[*lo, *hi]) || hi <= lo {
                    return Err(Error::InvalidBody(format!("interval ({lo}, {hi}) is empty")));
                }
                let center = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                (Shape::Interval { center, half }, center.abs() + half)
            }
            BodySpec::Disk { center, radius } => {
                if !finite(center) || !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::InvalidBody(format!("disk radius {radius} must be positive")));
                }
                let c = Point::new(center[0], center[1]);
                (Shape::Disk { center: c, radius: *radius }, c.norm() + radius)
            }
            BodySpec::Ellipse { center, semi_axes } => {
                if !finite(center) || !finite(semi_axes) || semi_axes.iter().any(|&a| a <= 0.0) {
                    return Err(Error::InvalidBody("ellipse semi-axes must be positive".into()));
                }
                let c = Point::new(center[0], center[1]);
                let axes = Point::new(semi_axes[0], semi_axes[1]);
                let scale = axes.min();
                (Shape::Ellipse { center: c, axes, scale }, c.norm() + axes.max())
            }
            BodySpec::Superellipse {
                center,
                semi_axes,
                exponent,
            } => {
                if !finite(center) || !finite(semi_axes) || semi_axes.iter().any(|&a| a <= 0.0) {
                    return Err(Error::InvalidBody("superellipse semi-axes must be positive".into()));
                }
                if !exponent.is_finite() || *exponent < 2.0 {
                    return Err(Error::InvalidBody(format!(
                        "superellipse exponent {exponent} must be at least 2"
                    )));
                }
                let c = Point::new(center[0], center[1]);
                let axes = Point::new(semi_axes[0], semi_axes[1]);
                let scale = axes.min();
                (
                    Shape::Superellipse {
                        center: c,
                        axes,
                        exponent: *exponent,
                        scale,
                    },
                    c.norm() + axes.norm(),
                )
            }
            BodySpec::SmoothedPolygon { vertices, smoothing } => {
                let (shape, bound) = polygon_shape(vertices, *smoothing)?;
                (shape, bound)
            }
        };
        let mut body = ConvexBody {
            spec,
            shape,
            bound,
            band: 1e-9 * bound,
            boundary: Vec::new(),
        };
        if body.phi(&body.reference_point()) >= 0.0 {
            return Err(Error::InvalidBody("body has empty interior".into()));
        }
        body.boundary = body.sample_boundary(BOUNDARY_SAMPLES);
        Ok(body)
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        Self::new(BodySpec::Disk { center, radius })
    }

    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2]) -> Result<Self> {
        Self::new(BodySpec::Ellipse { center, semi_axes })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(BodySpec::Interval { lo, hi })
    }

    pub fn spec(&self) -> &BodySpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Radius `R` of a centred ball containing the body.
    pub fn bounding_radius(&self) -> f64 {
        self.bound
    }

    /// Band half-width `ε_b` used by [`ConvexBody::contains`].
    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn with_band(mut self, band: f64) -> Self {
        self.band = band.abs();
        self
    }

    /// Boundary samples (ordered counter-clockwise in 2D, `[lo, hi]` in 1D).
    pub fn boundary_samples(&self) -> &[Point] {
        &self.boundary
    }

    /// A point strictly inside the body from which it is star-shaped.
    pub fn reference_point(&self) -> Point {
        match &self.shape {
            Shape::Interval { center, .. } => Point::new(*center, 0.0),
            Shape::Disk { center, .. }
            | Shape::Ellipse { center, .. }
            | Shape::Superellipse { center, .. } => *center,
            Shape::Polygon { centroid, .. } => *centroid,
        }
    }

    /// Defining function; negative inside.
    pub fn phi(&self, x: &Point) -> f64 {
        match &self.shape {
            Shape::Interval { center, half } => (x[0] - center).abs() - half,
            Shape::Disk { center, radius } => (x - center).norm() - radius,
            Shape::Ellipse { center, axes, scale } => {
                let d = x - center;
                let q = (d[0] / axes[0]).hypot(d[1] / axes[1]);
                scale * (q - 1.0)
            }
            Shape::Superellipse {
                center,
                axes,
                exponent,
                scale,
            } => {
                let d = x - center;
                let n = superellipse_norm(d[0] / axes[0], d[1] / axes[1], *exponent);
                scale * (n - 1.0)
            }
            Shape::Polygon { edges, smoothing, .. } => {
                let g: Vec<f64> = edges.iter().map(|e| e.normal.dot(x) - e.offset).collect();
                let m = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = g.iter().map(|gi| ((gi - m) / smoothing).exp()).sum();
                m + smoothing * s.ln()
            }
        }
    }

    /// Gradient of the defining function (zero where it is undefined).
    pub fn grad(&self, x: &Point) -> Point {
        match &self.shape {
            Shape::Interval { center, .. } => {
                let d = x[0] - center;
                Point::new(if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 }, 0.0)
            }
            Shape::Disk { center, .. } => {
                let d = x - center;
                let r = d.norm();
                if r > 0.0 {
                    d / r
                } else {
                    Point::zeros()
                }
            }
            Shape::Ellipse { center, axes, scale } => {
                let d = x - center;
                let q = (d[0] / axes[0]).hypot(d[1] / axes[1]);
                if q > 0.0 {
                    Point::new(d[0] / (axes[0] * axes[0]), d[1] / (axes[1] * axes[1])) * (scale / q)
                } else {
                    Point::zeros()
                }
            }
            Shape::Superellipse {
                center,
                axes,
                exponent,
                scale,
            } => {
                let d = x - center;
                let z = Point::new(d[0] / axes[0], d[1] / axes[1]);
                let n = superellipse_norm(z[0], z[1], *exponent);
                if n > 0.0 {
                    let f = |zi: f64, ai: f64| zi.signum() * (zi.abs() / n).powf(exponent - 1.0) / ai;
                    Point::new(f(z[0], axes[0]), f(z[1], axes[1])) * *scale
                } else {
                    Point::zeros()
                }
            }
            Shape::Polygon { edges, smoothing, .. } => {
                let g: Vec<f64> = edges.iter().map(|e| e.normal.dot(x) - e.offset).collect();
                let m = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = g.iter().map(|gi| ((gi - m) / smoothing).exp()).collect();
                let total: f64 = w.iter().sum();
                edges
                    .iter()
                    .zip(&w)
                    .fold(Point::zeros(), |acc, (e, wi)| acc + e.normal * (wi / total))
            }
        }
    }

    /// Outward unit normal at (or near) a boundary point.
    pub fn outward_normal(&self, x: &Point) -> Option<Point> {
        let g = self.grad(x);
        let n = g.norm();
        (n > 0.0).then(|| g / n)
    }

    pub fn contains(&self, x: &Point) -> Location {
        let v = self.phi(x);
        if v.abs() <= self.band {
            Location::BoundaryBand
        } else if v < 0.0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    /// Fraction `s ∈ [0, 1]` at which the segment `a → b` crosses `{φ = 0}`.
    /// Requires `φ(a)` and `φ(b)` to have opposite signs (zero counts as either).
    pub fn crossing(&self, a: &Point, b: &Point, tol: f64) -> Option<f64> {
        let fa = self.phi(a);
        let fb = self.phi(b);
        if fa == 0.0 {
            return Some(0.0);
        }
        if fb == 0.0 {
            return Some(1.0);
        }
        if fa.signum() == fb.signum() {
            return None;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let lo_sign = fa.signum();
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let fm = self.phi(&(a + (b - a) * mid));
            if fm == 0.0 {
                return Some(mid);
            }
            if fm.signum() == lo_sign {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Distance from `x` to the boundary, measured against the sampled
    /// boundary polygon (exact for intervals).
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        match &self.shape {
            Shape::Interval { center, half } => ((x[0] - center).abs() - half).abs(),
            Shape::Disk { center, radius } => ((x - center).norm() - radius).abs(),
            _ => polyline_distance(&self.boundary, x),
        }
    }

    fn sample_boundary(&self, count: usize) -> Vec<Point> {
        if let Shape::Interval { center, half } = self.shape {
            return vec![Point::new(center - half, 0.0), Point::new(center + half, 0.0)];
        }
        let c = self.reference_point();
        let reach = 2.0 * self.bound + 1.0;
        (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                let dir = Point::new(a.cos(), a.sin());
                let far = c + dir * reach;
                let s = self.crossing(&c, &far, 1e-15).unwrap_or(1.0);
                c + dir * (reach * s)
            })
            .collect()
    }
}

fn superellipse_norm(a: f64, b: f64, q: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        return 0.0;
    }
    m * ((a.abs() / m).powf(q) + (b.abs() / m).powf(q)).powf(1.0 / q)
}

fn polygon_shape(vertices: &[[f64; 2]], smoothing: f64) -> Result<(Shape, f64)> {
    if vertices.len() < 3 {
        return Err(Error::InvalidBody("polygon needs at least three vertices".into()));
    }
    if !smoothing.is_finite() || smoothing <= 0.0 {
        return Err(Error::InvalidBody("polygon smoothing must be positive".into()));
    }
    let mut pts: Vec<Point> = vertices.iter().map(|v| Point::new(v[0], v[1])).collect();
    if pts.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidBody("polygon vertices must be finite".into()));
    }
    let area2: f64 = (0..pts.len())
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    if area2.abs() < 1e-14 {
        return Err(Error::InvalidBody("polygon is degenerate".into()));
    }
    if area2 < 0.0 {
        pts.reverse();
    }
    let n = pts.len();
    let mut edges = Vec::with_capacity(n);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        let e = b - a;
        let f = c - b;
        let len = e.norm();
        if len == 0.0 {
            return Err(Error::InvalidBody("polygon has repeated vertices".into()));
        }
        if e[0] * f[1] - e[1] * f[0] <= 0.0 {
            return Err(Error::InvalidBody("polygon is not strictly convex".into()));
        }
        let normal = Point::new(e[1], -e[0]) / len;
        edges.push(HalfPlane {
            normal,
            offset: normal.dot(&a),
        });
    }
    let centroid = pts.iter().fold(Point::zeros(), |acc, p| acc + p) / n as f64;
    let bound = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    Ok((
        Shape::Polygon {
            edges,
            smoothing,
            centroid,
        },
        bound,
    ))
}

fn polyline_distance(loop_pts: &[Point], x: &Point) -> f64 {
    let n = loop_pts.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = loop_pts[i];
        let b = loop_pts[(i + 1) % n];
        let ab = b - a;
        let len2 = ab.norm_squared();
        let s = if len2 > 0.0 {
            ((x - a).dot(&ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        best = best.min((a + ab * s - x).norm());
    }
    best
}

/// Largest violation of `φ((1-λ)a + λb) ≤ max(φ(a), φ(b))` over random
/// pairs of points inside the body.
pub fn midpoint_convexity_defect<R: rand::Rng>(body: &ConvexBody, samples: usize, rng: &mut R) -> f64 {
    let r = body.bounding_radius();
    let dim = body.dim();
    let draw = |rng: &mut R| loop {
        let p = Point::new(
            rng.gen_range(-r..=r),
            if dim == 2 { rng.gen_range(-r..=r) } else { 0.0 },
        );
        if body.phi(&p) <= 0.0 {
            return p;
        }
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let a = draw(rng);
        let b = draw(rng);
        let lam: f64 = rng.gen();
        let m = a * (1.0 - lam) + b * lam;
        worst = worst.max(body.phi(&m) - body.phi(&a).max(body.phi(&b)));
    }
    worst
}

/// Serializable pair of bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub outer: BodySpec,
    pub inner: BodySpec,
}

/// The PDE domain `Ω = Ω₀ \ Ω̄₁` given by an outer and an inner body.
#[derive(Clone, Debug)]
pub struct RingDomain {
    outer: ConvexBody,
    inner: ConvexBody,
    clearance: f64,
}

impl RingDomain {
    pub fn from_spec(spec: &RingSpec) -> Result<Self> {
        make_ring(ConvexBody::new(spec.outer.clone())?, ConvexBody::new(spec.inner.clone())?)
    }

    pub fn spec(&self) -> RingSpec {
        RingSpec {
            outer: self.outer.spec().clone(),
            inner: self.inner.spec().clone(),
        }
    }

    pub fn outer(&self) -> &ConvexBody {
        &self.outer
    }

    pub fn inner(&self) -> &ConvexBody {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.outer.dim()
    }

    /// Estimated minimum distance between `∂Ω₁` and `∂Ω₀`.
    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    /// Whether `x` lies in the open ring `Ω`.
    pub fn in_ring(&self, x: &Point) -> bool {
        self.outer.phi(x) < 0.0 && self.inner.phi(x) > 0.0
    }

    /// Whether `x` lies in the closed ring `Ω̄`.
    pub fn in_closed_ring(&self, x: &Point) -> bool {
        self.outer.phi(x) <= self.outer.band() && self.inner.phi(x) >= -self.inner.band()
    }

    /// Distance to the nearer of the two boundaries.
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        self.outer.boundary_distance(x).min(self.inner.boundary_distance(x))
    }
}

/// Validate that `inner` is compactly contained in `outer` and contains the origin.
pub fn make_ring(outer: ConvexBody, inner: ConvexBody) -> Result<RingDomain> {
    if outer.dim() != inner.dim() {
        return Err(Error::InvalidRing(format!(
            "dimension mismatch: outer is {}D, inner is {}D",
            outer.dim(),
            inner.dim()
        )));
    }
    let origin = Point::zeros();
    if inner.phi(&origin) >= 0.0 {
        return Err(Error::InvalidRing("origin is not inside the inner body".into()));
    }
    let mut clearance = f64::INFINITY;
    for p in inner.boundary_samples() {
        if outer.phi(p) >= 0.0 {
            return Err(Error::InvalidRing(format!(
                "inner boundary point ({:.4}, {:.4}) is not inside the outer body",
                p[0], p[1]
            )));
        }
        clearance = clearance.min(outer.boundary_distance(p));
    }
    if !(clearance > 0.0) {
        return Err(Error::InvalidRing("inner body touches the outer boundary".into()));
    }
    Ok(RingDomain {
        outer,
        inner,
        clearance,
    })
}

/// A point of space-time `ℝⁿ × (0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Point,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Point, t: f64) -> Self {
        SpaceTimePoint { x, t }
    }

    pub fn at(x: f64, y: f64, t: f64) -> Self {
        SpaceTimePoint {
            x: Point::new(x, y),
            t,
        }
    }

    /// Lexicographic key used for deterministic tie-breaking.
    pub fn key(&self) -> [f64; 3] {
        [self.x[0], self.x[1], self.t]
    }
}

/// Point `λ` of the parabolic segment from `X` to `Y`:
/// `((1-λ)x + λy, ((1-λ)√s + λ√t)²)`.
///
/// The weights are formed so that swapping the endpoints and replacing `λ`
/// by `1 - λ` reproduces the same floating-point result.
pub fn parabolic_segment(from: &SpaceTimePoint, to: &SpaceTimePoint, lambda: f64) -> SpaceTimePoint {
    let (a, b) = if lambda >= 0.5 {
        (1.0 - lambda, lambda)
    } else {
        let a = 1.0 - lambda;
        (a, 1.0 - a)
    };
    if b == 0.0 {
        return *from;
    }
    if a == 0.0 {
        return *to;
    }
    let x = from.x * a + to.x * b;
    let rho = a * from.t.sqrt() + b * to.t.sqrt();
    SpaceTimePoint { x, t: rho * rho }
}

/// Power mean `((s^{1/p} + t^{1/p}) / 2)^p`.
pub fn p_mean_time(s: f64, t: f64, p: f64) -> f64 {
    if s == t {
        return s;
    }
    if p == 1.0 {
        0.5 * (s + t)
    } else if p == 2.0 {
        let r = 0.5 * s.sqrt() + 0.5 * t.sqrt();
        r * r
    } else {
        (0.5 * (s.powf(1.0 / p) + t.powf(1.0 / p))).powf(p)
    }
}

/// Partial derivative of [`p_mean_time`] with respect to `s`.
pub fn p_mean_time_ds(s: f64, t: f64, p: f64) -> f64 {
    let m = 0.5 * (s.powf(1.0 / p) + t.powf(1.0 / p));
    0.5 * m.powf(p - 1.0) * s.powf(1.0 / p - 1.0)
}

/// Spatial midpoint paired with the `p`-mean of the two times.
pub fn p_midpoint(a: &SpaceTimePoint, b: &SpaceTimePoint, p: f64) -> SpaceTimePoint {
    SpaceTimePoint {
        x: a.x * 0.5 + b.x * 0.5,
        t: p_mean_time(a.t, b.t, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_disk() -> ConvexBody {
        ConvexBody::disk([0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn disk_containment() {
        let d = unit_disk().with_band(1e-9);
        assert_eq!(d.contains(&Point::new(0.0, 0.0)), Location::Inside);
        assert_eq!(d.contains(&Point::new(2.0, 0.0)), Location::Outside);
        assert_eq!(d.contains(&Point::new(1.0, 0.0)), Location::BoundaryBand);
    }

    #[test]
    fn concentric_ring_clearance() {
        let ring = make_ring(unit_disk(), ConvexBody::disk([0.0, 0.0], 0.3).unwrap()).unwrap();
        assert!((ring.clearance() - 0.7).abs() < 1e-6, "{}", ring.clearance());
    }

    #[test]
    fn oversized_inner_is_rejected() {
        let err = make_ring(unit_disk(), ConvexBody::disk([0.0, 0.0], 1.5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidRing(_)));
    }

    #[test]
    fn swapped_bodies_are_rejected() {
        let outer = ConvexBody::ellipse([0.0, 0.0], [1.2, 1.0]).unwrap();
        let inner = ConvexBody::disk([0.1, 0.0], 0.25).unwrap();
        let ring = make_ring(outer.clone(), inner.clone()).unwrap();
        assert!(ring.clearance() > 0.0);
        // Direct φ evaluation on the sampled inner boundary.
        for p in inner.boundary_samples() {
            assert!(outer.phi(p) < 0.0);
        }
        assert!(make_ring(inner, outer).is_err());
    }

    #[test]
    fn origin_must_be_inside_inner() {
        let err = make_ring(unit_disk(), ConvexBody::disk([0.5, 0.0], 0.2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidRing(_)));
    }

    #[test]
    fn dimension_mismatch() {
        let err = make_ring(unit_disk(), ConvexBody::interval(-0.2, 0.2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidRing(_)));
    }

    #[test]
    fn built_in_bodies_are_convex_and_bounded() {
        let bodies = vec![
            unit_disk(),
            ConvexBody::ellipse([0.1, -0.2], [1.5, 0.7]).unwrap(),
            ConvexBody::new(BodySpec::Superellipse {
                center: [0.0, 0.0],
                semi_axes: [1.0, 0.8],
                exponent: 4.0,
            })
            .unwrap(),
            ConvexBody::new(BodySpec::SmoothedPolygon {
                vertices: vec![[-1.0, -1.0], [1.2, -0.9], [1.0, 1.0], [-0.8, 1.1]],
                smoothing: 0.05,
            })
            .unwrap(),
            ConvexBody::interval(-0.5, 1.0).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for body in &bodies {
            let defect = midpoint_convexity_defect(body, 10_000, &mut rng);
            assert!(defect <= EPS_GEOM, "{:?}: defect {defect}", body.spec());
            let r = body.bounding_radius();
            for k in 0..64 {
                let a = 2.0 * PI * k as f64 / 64.0;
                let p = Point::new(a.cos(), if body.dim() == 2 { a.sin() } else { 0.0 }) * (r * 1.001 + 1e-9);
                if p.norm() > r {
                    assert!(body.phi(&p) > 0.0);
                }
            }
            for p in body.boundary_samples() {
                assert!(body.phi(p).abs() < 1e-12);
                let g = body.grad(p);
                assert!(g.norm() > 0.1, "gradient vanishes at {p:?}");
                let fd = Point::new(
                    (body.phi(&(p + Point::new(1e-6, 0.0))) - body.phi(&(p - Point::new(1e-6, 0.0)))) / 2e-6,
                    (body.phi(&(p + Point::new(0.0, 1e-6))) - body.phi(&(p - Point::new(0.0, 1e-6)))) / 2e-6,
                );
                if body.dim() == 2 {
                    assert!((g - fd).norm() < 1e-5, "{:?}: grad {g:?} vs fd {fd:?}", body.spec());
                }
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(ConvexBody::disk([0.0, 0.0], -1.0).is_err());
        assert!(ConvexBody::new(BodySpec::Superellipse {
            center: [0.0, 0.0],
            semi_axes: [1.0, 1.0],
            exponent: 1.5
        })
        .is_err());
        assert!(ConvexBody::new(BodySpec::SmoothedPolygon {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [1.0, 1.0]],
            smoothing: 0.01
        })
        .is_err());
        assert!(ConvexBody::interval(1.0, 0.0).is_err());
    }

    #[test]
    fn crossing_finds_boundary() {
        let d = unit_disk();
        let s = d.crossing(&Point::new(0.5, 0.0), &Point::new(1.5, 0.0), 1e-14).unwrap();
        assert!((s - 0.5).abs() < 1e-13);
        assert!(d.crossing(&Point::new(0.1, 0.0), &Point::new(0.2, 0.0), 1e-14).is_none());
    }

    #[test]
    fn segment_endpoints_and_midpoints() {
        let x = SpaceTimePoint::at(0.0, 0.0, 1.0);
        let y = SpaceTimePoint::at(1.0, 0.0, 4.0);
        assert_eq!(parabolic_segment(&x, &y, 0.0), x);
        assert_eq!(parabolic_segment(&x, &y, 1.0), y);
        let m = parabolic_segment(&x, &y, 0.5);
        assert_eq!(m.x[0], 0.5);
        assert!((m.t - 2.25).abs() < 1e-15);

        let a = SpaceTimePoint::at(0.3, 0.1, 1.0);
        let b = SpaceTimePoint::at(0.9, -0.4, 1.0);
        let m = parabolic_segment(&a, &b, 0.5);
        assert!((m.t - 1.0).abs() < 1e-15);
        assert!((m.x - (a.x + b.x) / 2.0).norm() < 1e-15);

        let s = SpaceTimePoint::at(0.0, 0.0, 1.0);
        assert_eq!(p_midpoint(&s, &SpaceTimePoint::at(0.0, 0.0, 3.0), 1.0).t, 2.0);
        assert!((p_midpoint(&s, &y, 2.0).t - 2.25).abs() < 1e-15);
        let expected = ((1.0 + 4f64.powf(1.0 / 3.0)) / 2.0).powi(3);
        let p3 = p_midpoint(&s, &y, 3.0).t;
        assert!((p3 - expected).abs() < 1e-14);
        assert!((p3 - 2.1652).abs() < 1e-4 && p3 < 2.25);
        assert_eq!(p_midpoint(&s, &y, 2.0), parabolic_segment(&s, &y, 0.5));
    }

    #[test]
    fn p_mean_derivative_matches_finite_difference() {
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            let (s, t) = (0.3, 0.7);
            let fd = (p_mean_time(s + 1e-7, t, p) - p_mean_time(s - 1e-7, t, p)) / 2e-7;
            assert!((fd - p_mean_time_ds(s, t, p)).abs() < 1e-7);
        }
    }
}
