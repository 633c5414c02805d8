//! Smooth evaluation of solutions, level-set extraction and Σ pairs.

pub mod extension;
mod grid_field;
mod level;
mod pairs;
mod sff;
pub mod spline;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{Point, SpaceTimePoint};

pub use extension::Extension;
pub use level::{extract_level, polish_to_level, Contour, LevelSample, LevelSetPatch};
pub use pairs::{sample_sigma_pairs, PairSampling, SigmaPair};
pub use sff::{second_fundamental_form, shape_spectrum};

/// Level-set polishing tolerance.
pub const EPS_LS: f64 = 1e-10;
/// Tolerance on `|u(X) - u(Y)|` for pairs on a common level.
pub const EPS_PAIR: f64 = 2.0 * EPS_LS;
/// Default safe level band.
pub const SAFE_LEVELS: (f64, f64) = (0.05, 0.95);
/// Admissible points keep this many spacings from both boundaries.
pub const ADMISSIBLE_CLEARANCE: f64 = 2.0;

/// Value and derivatives of a field at one space-time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub du: Point,
    pub d2u: Matrix2<f64>,
    pub ut: f64,
    pub utt: f64,
    /// `∂_t Du`.
    pub dut: Point,
}

impl Default for Jet {
    fn default() -> Self {
        Jet {
            u: 0.0,
            du: Point::zeros(),
            d2u: Matrix2::zeros(),
            ut: 0.0,
            utt: 0.0,
            dut: Point::zeros(),
        }
    }
}

impl Jet {
    pub fn laplacian(&self, dim: usize) -> f64 {
        (0..dim).map(|k| self.d2u[(k, k)]).sum()
    }

    /// Space-time gradient `(Du, u_t)`.
    pub fn st_gradient(&self, dim: usize) -> DVector<f64> {
        let mut g = DVector::zeros(dim + 1);
        for k in 0..dim {
            g[k] = self.du[k];
        }
        g[dim] = self.ut;
        g
    }

    /// Space-time Hessian `[[D²u, Du_t], [Du_tᵀ, u_tt]]`.
    pub fn st_hessian(&self, dim: usize) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(dim + 1, dim + 1);
        for a in 0..dim {
            for b in 0..dim {
                h[(a, b)] = self.d2u[(a, b)];
            }
            h[(a, dim)] = self.dut[a];
            h[(dim, a)] = self.dut[a];
        }
        h[(dim, dim)] = self.utt;
        h
    }
}

/// Why a point is outside the admissible query region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// `t < t_min`.
    BeforeWindow,
    /// `t > T`.
    AfterWindow,
    /// In `Ω̄₁` or within the clearance band of `∂Ω₁`.
    InnerBand,
    /// Outside `Ω₀` or within the clearance band of `∂Ω₀`.
    OuterBand,
    /// The interpolation stencil reaches undefined nodes.
    Stencil,
}

/// Uniform spatial lattice used for contour extraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingLattice {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl SamplingLattice {
    pub fn point(&self, i: usize, j: usize) -> Point {
        self.origin + Point::new(i as f64 * self.h, j as f64 * self.h)
    }
}

/// The evaluation interface shared by discrete solutions and analytic oracles.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    /// Admissible time window `[t_lo, t_hi]`.
    fn time_window(&self) -> (f64, f64);

    /// Characteristic spatial resolution.
    fn spacing(&self) -> f64;

    fn sampling_lattice(&self) -> SamplingLattice;

    fn exclusion(&self, p: &SpaceTimePoint) -> Option<Exclusion>;

    fn is_admissible(&self, p: &SpaceTimePoint) -> bool {
        self.exclusion(p).is_none()
    }

    fn value(&self, p: &SpaceTimePoint) -> Result<f64>;

    fn jet(&self, p: &SpaceTimePoint) -> Result<Jet>;

    /// Value continued by the boundary data outside the ring, defined for
    /// every `t ≥ 0` up to the horizon without admissibility restrictions.
    fn extended_value(&self, p: &SpaceTimePoint) -> f64;

    /// Points on the inner boundary (`∂Ω₁` or the half-space boundary).
    fn inner_boundary_samples(&self) -> Vec<Point>;

    /// Distance from `x` to the nearest boundary.
    fn boundary_clearance(&self, x: &Point) -> f64;

    /// `false` for exploratory runs with nonzero initial data.
    fn zero_initial_data(&self) -> bool {
        true
    }

    /// Nodewise extremes over the admissible window, for discrete solutions.
    fn nodal_bounds(&self) -> Option<crate::solver::DiscreteBounds> {
        None
    }
}

pub fn eval(field: &dyn ScalarField, x: &Point, t: f64) -> Result<f64> {
    field.value(&SpaceTimePoint::new(*x, t))
}

pub fn eval_grad(field: &dyn ScalarField, x: &Point, t: f64) -> Result<Point> {
    Ok(field.jet(&SpaceTimePoint::new(*x, t))?.du)
}

pub fn eval_ut(field: &dyn ScalarField, x: &Point, t: f64) -> Result<f64> {
    Ok(field.jet(&SpaceTimePoint::new(*x, t))?.ut)
}

pub fn eval_hess(field: &dyn ScalarField, x: &Point, t: f64) -> Result<Matrix2<f64>> {
    Ok(field.jet(&SpaceTimePoint::new(*x, t))?.d2u)
}

pub fn eval_utt(field: &dyn ScalarField, x: &Point, t: f64) -> Result<f64> {
    Ok(field.jet(&SpaceTimePoint::new(*x, t))?.utt)
}

pub fn eval_dut(field: &dyn ScalarField, x: &Point, t: f64) -> Result<Point> {
    Ok(field.jet(&SpaceTimePoint::new(*x, t))?.dut)
}

/// `|u_t - Δu|` at a point at least three spacings from both boundaries.
pub fn residual(field: &dyn ScalarField, p: &SpaceTimePoint) -> Result<f64> {
    if field.boundary_clearance(&p.x) < 3.0 * field.spacing() {
        return Err(crate::error::Error::out_of_domain(&p.x, p.t));
    }
    let j = field.jet(p)?;
    Ok((j.ut - j.laplacian(field.dim())).abs())
}

/// Largest relative discrepancy between the jet and central differences
/// with step `step`. Spline fields are only C² across knots, so points within
/// `step` of a knot show `O(step)` defects in the second derivatives.
pub fn finite_difference_defect(field: &dyn ScalarField, p: &SpaceTimePoint, step: f64) -> Result<f64> {
    let n = field.dim();
    let j = field.jet(p)?;
    let at = |dx: Point, dt: f64| field.value(&SpaceTimePoint::new(p.x + dx, p.t + dt));
    let jet_at = |dx: Point, dt: f64| field.jet(&SpaceTimePoint::new(p.x + dx, p.t + dt));
    let mut worst: f64 = 0.0;
    let mut cmp = |analytic: f64, numeric: f64, scale: f64| {
        let d = (analytic - numeric).abs() / scale.max(1e-3);
        worst = worst.max(d);
    };
    let gscale = j.du.norm() + j.ut.abs();
    for k in 0..n {
        let mut e = Point::zeros();
        e[k] = step;
        let fd = (at(e, 0.0)? - at(-e, 0.0)?) / (2.0 * step);
        cmp(j.du[k], fd, gscale);
        let (jp, jm) = (jet_at(e, 0.0)?, jet_at(-e, 0.0)?);
        let hscale = j.d2u.norm() + j.dut.norm();
        for m in 0..n {
            cmp(j.d2u[(m, k)], (jp.du[m] - jm.du[m]) / (2.0 * step), hscale);
        }
        cmp(j.dut[k], (jp.ut - jm.ut) / (2.0 * step), hscale);
    }
    let fd_t = (at(Point::zeros(), step)? - at(Point::zeros(), -step)?) / (2.0 * step);
    cmp(j.ut, fd_t, gscale);
    let (jp, jm) = (jet_at(Point::zeros(), step)?, jet_at(Point::zeros(), -step)?);
    cmp(j.utt, (jp.ut - jm.ut) / (2.0 * step), j.utt.abs() + j.dut.norm());
    Ok(worst)
}
