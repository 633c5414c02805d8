use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{q_functional, CaloricFunction};
use crate::error::{Error, Result};
use crate::field::{Exclusion, ScalarField, SigmaPair};
use crate::geometry::{p_mean_time_ds, p_midpoint, Point, SpaceTimePoint};

/// How a climb ended. The boundary variants follow the four cases of the
/// boundary of `Σ`, plus the initial-time boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `x` or `y` reached the band of `∂Ω₁` (case 1).
    InnerBoundary,
    /// `x` or `y` reached the band of `∂Ω₀` (case 2).
    OuterBoundary,
    /// The midpoint reached the band of `∂Ω₀` (case 3).
    MidpointOuterBoundary,
    /// The midpoint reached the band of `∂Ω₁` (case 4).
    MidpointInnerBoundary,
    /// A time reached `t_min`.
    InitialTime,
    /// An interpolation stencil left the defined nodes next to a boundary.
    Stencil,
    /// No further ascent: an interior stationary point.
    Stationary,
    IterationLimit,
    /// Newton projection back onto the level failed.
    RetractionFailure,
}

impl Termination {
    pub fn is_boundary(&self) -> bool {
        !matches!(self, Termination::Stationary | Termination::IterationLimit | Termination::RetractionFailure)
    }

    /// Index of the boundary case of `Σ`, where one applies.
    pub fn boundary_case(&self) -> Option<u8> {
        match self {
            Termination::InnerBoundary => Some(1),
            Termination::OuterBoundary => Some(2),
            Termination::MidpointOuterBoundary => Some(3),
            Termination::MidpointInnerBoundary => Some(4),
            _ => None,
        }
    }

    fn from_exclusion(e: Exclusion, midpoint: bool) -> Self {
        match (e, midpoint) {
            (Exclusion::InnerBand, false) => Termination::InnerBoundary,
            (Exclusion::OuterBand, false) => Termination::OuterBoundary,
            (Exclusion::InnerBand, true) => Termination::MidpointInnerBoundary,
            (Exclusion::OuterBand, true) => Termination::MidpointOuterBoundary,
            (Exclusion::BeforeWindow, _) => Termination::InitialTime,
            (Exclusion::Stencil, _) => Termination::Stencil,
            (Exclusion::AfterWindow, _) => Termination::RetractionFailure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClimbSettings {
    pub p: f64,
    pub hs: Vec<CaloricFunction>,
    pub delta: f64,
    /// Initial step; `None` means a quarter of the field spacing.
    pub step: Option<f64>,
    pub max_iterations: usize,
    pub min_improvement: f64,
    /// Climb `−Q` instead (negative control).
    pub negate: bool,
}

impl Default for ClimbSettings {
    fn default() -> Self {
        ClimbSettings {
            p: 2.0,
            hs: Vec::new(),
            delta: 0.0,
            step: None,
            max_iterations: 4000,
            min_improvement: 1e-12,
            negate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClimbOutcome {
    pub start: SigmaPair,
    pub start_value: f64,
    /// Best pair reached.
    pub pair: SigmaPair,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
}

type V3 = Vector3<f64>;

/// Below this projected-gradient norm a negligible gain counts as stationary.
const GRADIENT_FLOOR: f64 = 1e-8;

fn st(p: &SpaceTimePoint) -> V3 {
    V3::new(p.x[0], p.x[1], p.t)
}

fn from_st(v: &V3, dim: usize) -> SpaceTimePoint {
    SpaceTimePoint::at(v[0], if dim == 1 { 0.0 } else { v[1] }, v[2])
}

enum Exit {
    Hit(Termination),
    Fatal(Error),
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        Exit::Fatal(e)
    }
}

/// Newton projection onto `{u = μ}` along the space-time gradient, capped at
/// the top of the window where the correction becomes purely spatial.
fn retract(field: &dyn ScalarField, p: SpaceTimePoint, mu: f64, t_hi: f64) -> std::result::Result<SpaceTimePoint, Exit> {
    let mut q = p;
    q.t = q.t.min(t_hi);
    for _ in 0..24 {
        if let Some(e) = field.exclusion(&q) {
            return Err(Exit::Hit(Termination::from_exclusion(e, false)));
        }
        let j = field.jet(&q)?;
        let r = j.u - mu;
        if r.abs() <= 1e-14 {
            return Ok(q);
        }
        let capped = q.t >= t_hi;
        let g2 = j.du.norm_squared() + if capped { 0.0 } else { j.ut * j.ut };
        if !(g2 > 0.0) {
            return Err(Exit::Hit(Termination::RetractionFailure));
        }
        q.x -= j.du * (r / g2);
        if !capped {
            q.t = (q.t - j.ut * r / g2).min(t_hi);
        }
    }
    match field.value(&q) {
        Ok(u) if (u - mu).abs() <= crate::field::EPS_LS => Ok(q),
        Ok(_) => Err(Exit::Hit(Termination::RetractionFailure)),
        Err(_) => Err(Exit::Hit(field.exclusion(&q).map_or(Termination::RetractionFailure, |e| Termination::from_exclusion(e, false)))),
    }
}

/// Tangential ascent direction of `Q` at `pair`.
fn direction(field: &dyn ScalarField, pair: &SigmaPair, s: &ClimbSettings, t_hi: f64) -> Result<(V3, V3)> {
    let (x, y) = (pair.x, pair.y);
    let z = p_midpoint(&x, &y, s.p);
    let jz = field.jet(&z)?;
    let (jx, jy) = (field.jet(&x)?, field.jet(&y)?);
    let mut gx = V3::new(-0.5 * jz.du[0], -0.5 * jz.du[1], -jz.ut * p_mean_time_ds(x.t, y.t, s.p) - s.delta);
    let mut gy = V3::new(-0.5 * jz.du[0], -0.5 * jz.du[1], -jz.ut * p_mean_time_ds(y.t, x.t, s.p));
    for h in &s.hs {
        let diff = 2.0 * (h.value(&x) - h.value(&y));
        let (dhx, htx) = h.gradient(&x);
        let (dhy, hty) = h.gradient(&y);
        gx += V3::new(dhx[0], dhx[1], htx) * diff;
        gy -= V3::new(dhy[0], dhy[1], hty) * diff;
    }
    let project = |g: &mut V3, du: Point, ut: f64, capped: bool| {
        if field.dim() == 1 {
            g[1] = 0.0;
        }
        let capped = capped && g[2] > 0.0;
        if capped {
            g[2] = 0.0;
        }
        let n = V3::new(du[0], du[1], if capped { 0.0 } else { ut });
        let n2 = n.norm_squared();
        if n2 > 0.0 {
            *g -= n * (g.dot(&n) / n2);
        }
    };
    project(&mut gx, jx.du, jx.ut, x.t >= t_hi);
    project(&mut gy, jy.du, jy.ut, y.t >= t_hi);
    Ok((gx, gy))
}

/// Projected conjugate-gradient ascent of `Q` keeping both points on the
/// seed's level. Steps start at `settings.step`, halve on failure and grow
/// back on success. The climb stops at the first step that leaves the
/// admissible region, or once the gain falls below `min_improvement` with a
/// vanishing projected gradient.
pub fn climb(field: &dyn ScalarField, seed: &SigmaPair, settings: &ClimbSettings) -> Result<ClimbOutcome> {
    let h = field.spacing();
    let step0 = settings.step.unwrap_or(0.25 * h);
    let t_hi = field.time_window().1;
    let sign = if settings.negate { -1.0 } else { 1.0 };
    let q = |p: &SigmaPair| q_functional(field, p, settings.p, &settings.hs, settings.delta).map(|v| sign * v);
    let start_value = q(seed)?;
    let mut cur = *seed;
    let mut val = start_value;
    let mut sigma = step0;
    let mut iterations = 0;
    let dim = field.dim();
    let outcome = |cur: SigmaPair, val: f64, iterations: usize, termination: Termination| ClimbOutcome {
        start: *seed,
        start_value,
        pair: cur,
        value: val,
        iterations,
        termination,
    };
    // Polak-Ribière directions, reset to steepest ascent after a rejected step.
    let mut prev: Option<(V3, V3, V3, V3)> = None;
    while iterations < settings.max_iterations {
        iterations += 1;
        let (gx, gy) = direction(field, &cur, settings, t_hi)?;
        let (gx, gy) = (gx * sign, gy * sign);
        let (mut dx, mut dy) = (gx, gy);
        if let Some((pgx, pgy, pdx, pdy)) = prev {
            let den = pgx.norm_squared() + pgy.norm_squared();
            let beta = if den > 0.0 { ((gx.dot(&(gx - pgx)) + gy.dot(&(gy - pgy))) / den).max(0.0) } else { 0.0 };
            dx += pdx * beta;
            dy += pdy * beta;
            if dx.dot(&gx) + dy.dot(&gy) <= 0.0 {
                (dx, dy) = (gx, gy);
            }
        }
        let gn = (gx.norm_squared() + gy.norm_squared()).sqrt();
        let dn = (dx.norm_squared() + dy.norm_squared()).sqrt();
        if !(dn > 0.0) {
            return Ok(outcome(cur, val, iterations, Termination::Stationary));
        }
        let trial = (|| -> std::result::Result<SigmaPair, Exit> {
            let x = retract(field, from_st(&(st(&cur.x) + dx * (sigma / dn)), dim), cur.level, t_hi)?;
            let y = retract(field, from_st(&(st(&cur.y) + dy * (sigma / dn)), dim), cur.level, t_hi)?;
            let z = p_midpoint(&x, &y, settings.p);
            if let Some(e) = field.exclusion(&z) {
                return Err(Exit::Hit(Termination::from_exclusion(e, true)));
            }
            Ok(SigmaPair { x, y, ..cur })
        })();
        let trial = match trial {
            Ok(t) => t,
            Err(Exit::Hit(t)) => return Ok(outcome(cur, val, iterations, t)),
            Err(Exit::Fatal(e)) => return Err(e),
        };
        let v = q(&trial)?;
        if v > val {
            let gain = v - val;
            cur = trial;
            val = v;
            if gain < settings.min_improvement && gn < GRADIENT_FLOOR {
                return Ok(outcome(cur, val, iterations, Termination::Stationary));
            }
            prev = Some((gx, gy, dx, dy));
            sigma = (1.25 * sigma).min(step0);
        } else {
            sigma *= 0.5;
            if sigma < step0 * 1e-6 {
                return Ok(outcome(cur, val, iterations, Termination::Stationary));
            }
        }
    }
    Ok(outcome(cur, val, iterations, Termination::IterationLimit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{halfspace_field, psi};

    #[test]
    fn halfspace_p3_climb_increases_and_exits_through_the_window() {
        let f = halfspace_field(1).unwrap().with_window(0.05, 10.0);
        let mu = psi(1.0).unwrap();
        let seed = SigmaPair {
            x: SpaceTimePoint::at(1.0, 0.0, 1.0),
            y: SpaceTimePoint::at(2.0, 0.0, 4.0),
            level: mu,
            midpoint_admissible: true,
        };
        let out = climb(&f, &seed, &ClimbSettings { p: 3.0, step: Some(0.05), ..Default::default() }).unwrap();
        assert!(out.value > out.start_value + 1e-3, "{out:?}");
        assert!(out.termination.is_boundary(), "{out:?}");
        for p in [out.pair.x, out.pair.y] {
            assert!((f.value(&p).unwrap() - mu).abs() < 1e-12);
        }
    }

    #[test]
    fn large_delta_drives_s_to_the_initial_time() {
        let f = halfspace_field(1).unwrap().with_window(0.05, 10.0);
        let mu = psi(1.0).unwrap();
        let seed = SigmaPair {
            x: SpaceTimePoint::at(1.0, 0.0, 1.0),
            y: SpaceTimePoint::at(1.5, 0.0, 2.25),
            level: mu,
            midpoint_admissible: true,
        };
        let out = climb(&f, &seed, &ClimbSettings { delta: 1.0, step: Some(0.05), ..Default::default() }).unwrap();
        assert_eq!(out.termination, Termination::InitialTime);
        assert!(out.pair.x.t < 0.1);
    }
}
