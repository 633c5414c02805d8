//! Analytic and quasi-analytic reference solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::field::spline::{spread_to_range, time_weights, AxisWeights};
use crate::field::{Exclusion, Jet, SamplingLattice, ScalarField};
use crate::geometry::{Point, SpaceTimePoint};
use crate::solver::SpaceTimeField;

// Gauss-Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let (fp, fm) = (f(c + r * XGK[i]), f(c - r * XGK[i]));
        k += WGK[i] * (fp + fm);
        if i % 2 == 1 {
            g += WG[i / 2] * (fp + fm);
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss-Kronrod quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> f64 {
        let (v, err) = whole;
        if err <= tol || depth >= 60 {
            return v;
        }
        let m = 0.5 * (a + b);
        let left = kronrod(f, a, m);
        let right = kronrod(f, m, b);
        rec(f, a, m, 0.5 * tol, left, depth + 1) + rec(f, m, b, 0.5 * tol, right, depth + 1)
    }
    rec(f, a, b, tol, kronrod(f, a, b), 0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("psi needs λ > 0, got {lambda}")))
    }
}

/// `Ψ(λ) = ∫₀^{1/λ} (4πσ³)^{-1/2} e^{-1/(4σ)} dσ` by adaptive quadrature.
///
/// With `r = 1/(2√σ)` the integrand becomes `(2/√π) e^{-r²}` on
/// `[√λ/2, ∞)`; the tail beyond `√λ/2 + 12` is below `1e-60`.
pub fn psi_quadrature(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let r0 = 0.5 * lambda.sqrt();
    let f = |r: f64| 2.0 / PI.sqrt() * (-r * r).exp();
    Ok(integrate(&f, r0, r0 + 12.0, 1e-14))
}

/// Quadrature of the defining integral in the original variable `σ`.
pub fn psi_quadrature_sigma(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let f = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (4.0 * PI * s * s * s).powf(-0.5) * (-0.25 / s).exp()
        }
    };
    Ok(integrate(&f, 0.0, 1.0 / lambda, 1e-13))
}

/// Closed form `Ψ(λ) = erfc(√λ / 2)`.
pub fn psi(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(libm::erfc(0.5 * lambda.sqrt()))
}

fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// The half-space solution `v(w, t) = Ψ(w₁²/t)` for `w₁ ≥ 0`, `v = 1` for `w₁ ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpaceSolution {
    dim: usize,
    window: (f64, f64),
    extent: f64,
    h: f64,
}

impl HalfSpaceSolution {
    pub fn new(dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("dimension {dim} is not 1 or 2")));
        }
        Ok(HalfSpaceSolution {
            dim,
            window: (0.05, 5.0),
            extent: 4.0,
            h: 0.02,
        })
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = (lo, hi);
        self
    }

    /// Half-width of the sampling box.
    pub fn with_extent(mut self, extent: f64) -> Self {
        self.extent = extent;
        self
    }

    pub fn with_spacing(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    /// `v` at `(w₁, t)`; defined for every `t ≥ 0`.
    pub fn v(&self, w1: f64, t: f64) -> f64 {
        if w1 <= 0.0 {
            1.0
        } else if t <= 0.0 {
            0.0
        } else {
            erfc(w1 / (2.0 * t.sqrt()))
        }
    }

    /// Closed-form jet for `w₁ > 0`, `t > 0`.
    pub fn closed_jet(&self, w1: f64, t: f64) -> Jet {
        if w1 <= 0.0 {
            return Jet {
                u: 1.0,
                ..Jet::default()
            };
        }
        let e = (-w1 * w1 / (4.0 * t)).exp();
        let sp = PI.sqrt();
        let t12 = t.sqrt();
        let t32 = t * t12;
        let t52 = t32 * t;
        let t72 = t52 * t;
        let vw = -e / (sp * t12);
        let vww = w1 * e / (2.0 * sp * t32);
        let vt = vww;
        let vwt = e / sp * (0.5 / t32 - w1 * w1 / (4.0 * t52));
        let vtt = w1 / (2.0 * sp) * e * (-1.5 / t52 + w1 * w1 / (4.0 * t72));
        let mut d2u = Matrix2::zeros();
        d2u[(0, 0)] = vww;
        Jet {
            u: erfc(w1 / (2.0 * t12)),
            du: Point::new(vw, 0.0),
            d2u,
            ut: vt,
            utt: vtt,
            dut: Point::new(vwt, 0.0),
        }
    }

    /// `c` with `{v = Ψ(1/c)}` equal to the parabola `t = c w₁²`.
    pub fn parabola_constant(level: f64, lo: f64, hi: f64) -> f64 {
        // Ψ(λ) decreasing in λ; bisection on λ.
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if erfc(0.5 * m.sqrt()) > level {
                a = m;
            } else {
                b = m;
            }
        }
        1.0 / (0.5 * (a + b))
    }
}

/// Half-space field in dimension `n`.
pub fn halfspace_field(n: usize) -> Result<HalfSpaceSolution> {
    HalfSpaceSolution::new(n)
}

impl ScalarField for HalfSpaceSolution {
    fn dim(&self) -> usize {
        self.dim
    }

    fn time_window(&self) -> (f64, f64) {
        self.window
    }

    fn spacing(&self) -> f64 {
        self.h
    }

    fn sampling_lattice(&self) -> SamplingLattice {
        let nx = ((self.extent + 4.0 * self.h) / self.h).ceil() as usize + 1;
        if self.dim == 1 {
            SamplingLattice {
                origin: Point::new(-4.0 * self.h, 0.0),
                h: self.h,
                nx,
                ny: 1,
            }
        } else {
            SamplingLattice {
                origin: Point::new(-4.0 * self.h, -self.extent),
                h: self.h,
                nx,
                ny: (2.0 * self.extent / self.h).ceil() as usize + 1,
            }
        }
    }

    fn exclusion(&self, p: &SpaceTimePoint) -> Option<Exclusion> {
        if !(p.t >= self.window.0) {
            return Some(Exclusion::BeforeWindow);
        }
        if p.t > self.window.1 {
            return Some(Exclusion::AfterWindow);
        }
        if !(p.x[0] > 0.0) {
            return Some(Exclusion::InnerBand);
        }
        let off = if self.dim == 2 { p.x[1].abs() } else { 0.0 };
        if !(p.x[0] <= self.extent && off <= self.extent) {
            return Some(Exclusion::OuterBand);
        }
        None
    }

    fn value(&self, p: &SpaceTimePoint) -> Result<f64> {
        if self.exclusion(p).is_some() {
            return Err(Error::out_of_domain(&p.x, p.t));
        }
        Ok(self.v(p.x[0], p.t))
    }

    fn jet(&self, p: &SpaceTimePoint) -> Result<Jet> {
        if self.exclusion(p).is_some() {
            return Err(Error::out_of_domain(&p.x, p.t));
        }
        Ok(self.closed_jet(p.x[0], p.t))
    }

    fn extended_value(&self, p: &SpaceTimePoint) -> f64 {
        self.v(p.x[0], p.t)
    }

    fn inner_boundary_samples(&self) -> Vec<Point> {
        if self.dim == 1 {
            return vec![Point::zeros()];
        }
        (0..33)
            .map(|k| Point::new(0.0, -0.5 * self.extent + self.extent * k as f64 / 32.0))
            .collect()
    }

    fn boundary_clearance(&self, x: &Point) -> f64 {
        x[0].max(0.0)
    }
}

/// Radially reduced reference solution on a fine 1D grid.
#[derive(Clone, Debug)]
pub struct RadialReference {
    r1: f64,
    r0: f64,
    dim: usize,
    hr: f64,
    dtau: f64,
    t_lo: f64,
    profiles: Vec<Vec<f64>>,
}

/// Backward-Euler solve of `u_t = u_rr + (n-1)/r u_r` with `u(r₁) = 1`,
/// `u(r₀) = 0`, `u(·, 0) = 0`, on `nodes` radial intervals and `steps`
/// time steps, keeping every `stride`-th profile.
pub fn radial_reference(r1: f64, r0: f64, n: usize, t_final: f64, nodes: usize, steps: usize, stride: usize) -> Result<RadialReference> {
    if !(r1 > 0.0 && r1 < r0) {
        return Err(Error::InvalidArgument(format!("radii must satisfy 0 < r1 < r0 (got {r1}, {r0})")));
    }
    if n != 1 && n != 2 {
        return Err(Error::InvalidArgument(format!("dimension {n} is not 1 or 2")));
    }
    if nodes < 8 || steps == 0 || stride == 0 || !steps.is_multiple_of(stride) || steps / stride < 6 {
        return Err(Error::InvalidGrid("radial reference needs ≥ 8 intervals and ≥ 6 stored profiles".into()));
    }
    let hr = (r0 - r1) / nodes as f64;
    let dt = t_final / steps as f64;
    let m = nodes - 1; // interior unknowns
    let nm1 = (n - 1) as f64;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for k in 0..m {
        let r = r1 + (k + 1) as f64 * hr;
        let a = 1.0 / (hr * hr);
        let b = nm1 / (2.0 * r * hr);
        lower[k] = -dt * (a - b);
        upper[k] = -dt * (a + b);
        diag[k] = 1.0 + 2.0 * dt * a;
    }
    let boundary_in = dt * (1.0 / (hr * hr) - nm1 / (2.0 * (r1 + hr) * hr));

    let mut u = vec![0.0; m];
    let mut profiles = Vec::with_capacity(steps / stride + 1);
    let full = |u: &[f64]| {
        let mut p = Vec::with_capacity(nodes + 1);
        p.push(1.0);
        p.extend_from_slice(u);
        p.push(0.0);
        p
    };
    profiles.push(full(&u));
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for step in 1..=steps {
        // Thomas algorithm.
        let mut rhs = u.clone();
        rhs[0] += boundary_in;
        c[0] = upper[0] / diag[0];
        d[0] = rhs[0] / diag[0];
        for k in 1..m {
            let den = diag[k] - lower[k] * c[k - 1];
            c[k] = upper[k] / den;
            d[k] = (rhs[k] - lower[k] * d[k - 1]) / den;
        }
        u[m - 1] = d[m - 1];
        for k in (0..m - 1).rev() {
            u[k] = d[k] - c[k] * u[k + 1];
        }
        if step % stride == 0 {
            profiles.push(full(&u));
        }
    }
    Ok(RadialReference {
        r1,
        r0,
        dim: n,
        hr,
        dtau: dt * stride as f64,
        t_lo: 10.0 * dt * stride as f64,
        profiles,
    })
}

impl RadialReference {
    pub fn radii(&self) -> (f64, f64) {
        (self.r1, self.r0)
    }

    pub fn radial_spacing(&self) -> f64 {
        self.hr
    }

    pub fn horizon(&self) -> f64 {
        (self.profiles.len() - 1) as f64 * self.dtau
    }

    pub fn profile_count(&self) -> usize {
        self.profiles.len()
    }

    /// Stored nodal profile `k` on `r₁ + i h_r`, `i = 0..=N`.
    pub fn profile(&self, k: usize) -> &[f64] {
        &self.profiles[k]
    }

    /// Radial jet `(f, f_r, f_rr, f_t, f_tt, f_rt)` by spline quasi-interpolation.
    fn radial_jet(&self, r: f64, t: f64) -> [f64; 6] {
        let last_r = (self.profiles[0].len() - 1) as i64;
        let ar = spread_to_range(AxisWeights::cubic(r - self.r1, self.hr, Some(last_r)), last_r);
        let at = time_weights(t, self.dtau, self.profiles.len() - 1);
        let mut s = [[0.0; 3]; 3];
        let last_t = self.profiles.len() as i64 - 1;
        for (c, k) in at.nodes().filter(|&(_, k)| (0..=last_t).contains(&k)) {
            let prof = &self.profiles[k as usize];
            for (a, i) in ar.nodes().filter(|&(_, i)| (0..=last_r).contains(&i)) {
                let v = prof[i as usize];
                for dt in 0..3 {
                    for dr in 0..3 - dt {
                        s[dt][dr] += at.w[dt][c] * ar.w[dr][a] * v;
                    }
                }
            }
        }
        [s[0][0], s[0][1], s[0][2], s[1][0], s[2][0], s[1][1]]
    }

    /// `u(r, t)`, clamped to the boundary data outside `[r₁, r₀]`.
    pub fn value_at(&self, r: f64, t: f64) -> f64 {
        if r <= self.r1 {
            return 1.0;
        }
        if r >= self.r0 {
            return 0.0;
        }
        if t <= 0.0 {
            return 0.0;
        }
        self.radial_jet(r, t.min(self.horizon()))[0]
    }

    /// `max |U_k(node) − u(|node|, τ_k)|` over fluid nodes and stored
    /// snapshots with `τ_k ≥ t_from`, for a field centred at the origin.
    pub fn nodal_error(&self, field: &SpaceTimeField, t_from: f64) -> f64 {
        let cls = field.classification();
        (0..field.snapshot_count())
            .filter(|&k| field.snapshot_time(k) >= t_from && field.snapshot_time(k) > 0.0)
            .map(|k| {
                let t = field.snapshot_time(k);
                let snap = field.snapshot(k);
                (0..cls.fluid_count())
                    .map(|f| (snap[f] - self.value_at(self.radius(&cls.fluid_position(f)), t)).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    fn radius(&self, x: &Point) -> f64 {
        if self.dim == 1 {
            x[0].abs()
        } else {
            x.norm()
        }
    }

    fn margin(&self) -> f64 {
        2.0 * self.hr
    }
}

impl ScalarField for RadialReference {
    fn dim(&self) -> usize {
        self.dim
    }

    fn time_window(&self) -> (f64, f64) {
        (self.t_lo, self.horizon())
    }

    fn spacing(&self) -> f64 {
        self.hr
    }

    fn sampling_lattice(&self) -> SamplingLattice {
        let h = (self.r0 / 200.0).max(self.hr);
        let n = (2.0 * self.r0 / h).ceil() as usize + 3;
        SamplingLattice {
            origin: Point::new(-self.r0 - h, if self.dim == 1 { 0.0 } else { -self.r0 - h }),
            h,
            nx: n,
            ny: if self.dim == 1 { 1 } else { n },
        }
    }

    fn exclusion(&self, p: &SpaceTimePoint) -> Option<Exclusion> {
        let (lo, hi) = self.time_window();
        if !(p.t >= lo) {
            return Some(Exclusion::BeforeWindow);
        }
        if p.t > hi * (1.0 + 1e-12) {
            return Some(Exclusion::AfterWindow);
        }
        let r = self.radius(&p.x);
        if !(r >= self.r1 + self.margin()) {
            return Some(Exclusion::InnerBand);
        }
        if !(r <= self.r0 - self.margin()) {
            return Some(Exclusion::OuterBand);
        }
        None
    }

    fn value(&self, p: &SpaceTimePoint) -> Result<f64> {
        if self.exclusion(p).is_some() {
            return Err(Error::out_of_domain(&p.x, p.t));
        }
        Ok(self.radial_jet(self.radius(&p.x), p.t)[0])
    }

    fn jet(&self, p: &SpaceTimePoint) -> Result<Jet> {
        if self.exclusion(p).is_some() {
            return Err(Error::out_of_domain(&p.x, p.t));
        }
        let r = self.radius(&p.x);
        let [f, fr, frr, ft, ftt, frt] = self.radial_jet(r, p.t);
        let xhat = if self.dim == 1 {
            Point::new(p.x[0].signum(), 0.0)
        } else {
            p.x / r
        };
        let proj = xhat * xhat.transpose();
        let d2u = if self.dim == 1 {
            let mut m = Matrix2::zeros();
            m[(0, 0)] = frr;
            m
        } else {
            proj * frr + (Matrix2::identity() - proj) * (fr / r)
        };
        Ok(Jet {
            u: f,
            du: xhat * fr,
            d2u,
            ut: ft,
            utt: ftt,
            dut: xhat * frt,
        })
    }

    fn extended_value(&self, p: &SpaceTimePoint) -> f64 {
        self.value_at(self.radius(&p.x), p.t)
    }

    fn inner_boundary_samples(&self) -> Vec<Point> {
        if self.dim == 1 {
            return vec![Point::new(self.r1, 0.0), Point::new(-self.r1, 0.0)];
        }
        (0..crate::geometry::BOUNDARY_SAMPLES)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / crate::geometry::BOUNDARY_SAMPLES as f64;
                Point::new(a.cos(), a.sin()) * self.r1
            })
            .collect()
    }

    fn boundary_clearance(&self, x: &Point) -> f64 {
        let r = self.radius(x);
        (r - self.r1).min(self.r0 - r)
    }
}

/// `(w, t) ↦ u(z + a R w, a² t)` with `R e₁` the given outward normal.
#[derive(Clone)]
pub struct RescaledField {
    base: Arc<dyn ScalarField>,
    z: Point,
    a: f64,
    rot: Matrix2<f64>,
}

impl std::fmt::Debug for RescaledField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RescaledField").field("z", &self.z).field("a", &self.a).finish()
    }
}

/// Parabolic blow-up of `field` at `z` with outward normal `normal` of the
/// inner body, by the scale `a`.
pub fn rescale(field: Arc<dyn ScalarField>, z: Point, normal: Point, a: f64) -> Result<RescaledField> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!("scale {a} must be positive")));
    }
    let rot = if field.dim() == 1 {
        let s = if normal[0] < 0.0 { -1.0 } else { 1.0 };
        Matrix2::new(s, 0.0, 0.0, 1.0)
    } else {
        let n = normal.normalize();
        if !n.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("normal must be nonzero".into()));
        }
        Matrix2::new(n[0], -n[1], n[1], n[0])
    };
    Ok(RescaledField { base: field, z, a, rot })
}

/// [`rescale`] at a point of `∂Ω₁`, with the normal taken from the ring.
pub fn rescale_at_inner_boundary(field: Arc<SpaceTimeField>, z: Point, a: f64) -> Result<RescaledField> {
    let normal = field
        .ring()
        .inner()
        .outward_normal(&z)
        .ok_or_else(|| Error::InvalidArgument("no well-defined normal at z".into()))?;
    rescale(field, z, normal, a)
}

impl RescaledField {
    pub fn scale(&self) -> f64 {
        self.a
    }

    fn pull(&self, p: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint::new(self.z + self.rot * p.x * self.a, self.a * self.a * p.t)
    }
}

impl ScalarField for RescaledField {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn time_window(&self) -> (f64, f64) {
        let (lo, hi) = self.base.time_window();
        let a2 = self.a * self.a;
        (lo / a2, hi / a2)
    }

    fn spacing(&self) -> f64 {
        self.base.spacing() / self.a
    }

    fn sampling_lattice(&self) -> SamplingLattice {
        let b = self.base.sampling_lattice();
        let h = b.h / self.a;
        let half = 0.5 * (b.nx.max(b.ny) as f64) * b.h / self.a;
        let n = (2.0 * half / h).ceil() as usize + 1;
        SamplingLattice {
            origin: Point::new(-half, if self.dim() == 1 { 0.0 } else { -half }),
            h,
            nx: n,
            ny: if self.dim() == 1 { 1 } else { n },
        }
    }

    fn exclusion(&self, p: &SpaceTimePoint) -> Option<Exclusion> {
        self.base.exclusion(&self.pull(p))
    }

    fn value(&self, p: &SpaceTimePoint) -> Result<f64> {
        self.base
            .value(&self.pull(p))
            .map_err(|_| Error::out_of_domain(&p.x, p.t))
    }

    fn jet(&self, p: &SpaceTimePoint) -> Result<Jet> {
        let j = self.base.jet(&self.pull(p)).map_err(|_| Error::out_of_domain(&p.x, p.t))?;
        let (a, r) = (self.a, self.rot);
        let rt = r.transpose();
        Ok(Jet {
            u: j.u,
            du: rt * j.du * a,
            d2u: rt * j.d2u * r * (a * a),
            ut: j.ut * a * a,
            utt: j.utt * a * a * a * a,
            dut: rt * j.dut * (a * a * a),
        })
    }

    fn extended_value(&self, p: &SpaceTimePoint) -> f64 {
        self.base.extended_value(&self.pull(p))
    }

    fn inner_boundary_samples(&self) -> Vec<Point> {
        let rt = self.rot.transpose();
        self.base
            .inner_boundary_samples()
            .iter()
            .map(|x| rt * (x - self.z) / self.a)
            .collect()
    }

    fn boundary_clearance(&self, x: &Point) -> f64 {
        self.base.boundary_clearance(&(self.z + self.rot * x * self.a)) / self.a
    }

    fn zero_initial_data(&self) -> bool {
        self.base.zero_initial_data()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::residual;

    #[test]
    fn psi_forms_agree() {
        for &l in &[0.01, 0.1, 1.0, 10.0, 100.0] {
            let q = psi_quadrature(l).unwrap();
            let c = psi(l).unwrap();
            let s = psi_quadrature_sigma(l).unwrap();
            assert!((q - c).abs() <= 1e-10, "{l}: {q} vs {c}");
            assert!((s - c).abs() <= 1e-9, "{l}: {s} vs {c}");
        }
        assert!((psi(1.0).unwrap() - 0.4795).abs() < 1e-4);
        assert!(psi(0.0).is_err() && psi_quadrature(-1.0).is_err());
    }

    #[test]
    fn psi_limits() {
        assert!(psi(1e6).unwrap() < 1e-100);
        assert!((psi(1e-12).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn halfspace_jet_is_exact() {
        let v = halfspace_field(2).unwrap();
        let p = SpaceTimePoint::at(0.7, 0.3, 0.8);
        let j = v.jet(&p).unwrap();
        // Borell identity w·Dv + 2t v_t = 0.
        assert!((0.7 * j.du[0] + 2.0 * 0.8 * j.ut).abs() < 1e-15);
        assert!(residual(&v, &p).unwrap() < 1e-14);
        let d = crate::field::finite_difference_defect(&v, &p, 1e-4).unwrap();
        assert!(d < 1e-6, "{d}");
        assert_eq!(v.value(&SpaceTimePoint::at(0.5, 0.0, 1.0)).unwrap(), psi(0.25).unwrap());
    }

    #[test]
    fn halfspace_level_is_parabola() {
        let v = halfspace_field(1).unwrap().with_window(0.05, 10.0);
        let mu = psi(1.0).unwrap();
        for &w in &[0.5, 1.0, 2.0, 3.0] {
            let u = v.value(&SpaceTimePoint::at(w, 0.0, w * w)).unwrap();
            assert!((u - mu).abs() < 1e-15);
        }
        let c = HalfSpaceSolution::parabola_constant(mu, 1e-6, 1e3);
        assert!((c - 1.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn radial_reference_stationary_limit() {
        let rr = radial_reference(0.3, 1.0, 2, 5.0, 700, 5000, 50).unwrap();
        let last = rr.profile_count() - 1;
        let prof = rr.profile(last);
        let hr = rr.radial_spacing();
        let mut worst: f64 = 0.0;
        for (i, &u) in prof.iter().enumerate() {
            let r = 0.3 + i as f64 * hr;
            let exact = (r / 1.0_f64).ln() / (0.3_f64 / 1.0).ln();
            worst = worst.max((u - exact).abs());
        }
        assert!(worst < 1e-4, "{worst}");
        assert_eq!(prof[0], 1.0);
        assert_eq!(*prof.last().unwrap(), 0.0);
    }

    #[test]
    fn radial_reference_is_monotone() {
        let rr = radial_reference(0.3, 1.0, 2, 0.5, 280, 2000, 20).unwrap();
        for k in 0..rr.profile_count() {
            let p = rr.profile(k);
            assert!(p.windows(2).all(|w| w[1] <= w[0] + 1e-14));
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            if k > 0 {
                let q = rr.profile(k - 1);
                assert!(p.iter().zip(q).all(|(a, b)| *a >= *b - 1e-14));
            }
        }
    }

    #[test]
    fn dyadic_rescale_of_halfspace_is_identity() {
        let v: Arc<dyn ScalarField> = Arc::new(halfspace_field(2).unwrap().with_window(1e-4, 50.0));
        let resc = rescale(v.clone(), Point::zeros(), Point::new(1.0, 0.0), 0.25).unwrap();
        for &(w1, w2, t) in &[(0.3, 0.1, 0.5), (1.7, -0.4, 2.0), (0.05, 0.0, 0.3)] {
            let p = SpaceTimePoint::at(w1, w2, t);
            assert_eq!(resc.value(&p).unwrap(), v.value(&p).unwrap());
            let (a, b) = (resc.jet(&p).unwrap(), v.jet(&p).unwrap());
            assert!((a.du - b.du).norm() <= 1e-14 * b.du.norm().max(1e-300));
            assert!((a.ut - b.ut).abs() <= 1e-14 * b.ut.abs().max(1e-300));
        }
    }

    #[test]
    fn rescale_identity_scale_translates() {
        let rr: Arc<dyn ScalarField> = Arc::new(radial_reference(0.3, 1.0, 2, 0.5, 280, 2000, 20).unwrap());
        let z = Point::new(0.3, 0.0);
        let f = rescale(rr.clone(), z, Point::new(1.0, 0.0), 1.0).unwrap();
        let p = SpaceTimePoint::at(0.2, 0.1, 0.3);
        assert_eq!(
            f.value(&p).unwrap(),
            rr.value(&SpaceTimePoint::at(0.5, 0.1, 0.3)).unwrap()
        );
        assert!(f.value(&SpaceTimePoint::at(0.2, 0.0, 0.6)).is_err());
    }
}
