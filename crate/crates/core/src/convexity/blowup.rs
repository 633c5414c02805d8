use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CheckOptions, ConvexityReport, RankedEntry, Witness};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Point, RingDomain, SpaceTimePoint};
use crate::oracle::{rescale, HalfSpaceSolution};
use crate::solver::{solve_heat, GridSpec, SpaceTimeField};

/// Compact sample set `[w₁ range] × [w₂ range] × [t range]` in blow-up
/// coordinates, sampled on an even grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupSet {
    pub w1: (f64, f64),
    pub w2: (f64, f64),
    pub t: (f64, f64),
    pub counts: [usize; 3],
}

impl Default for BlowupSet {
    fn default() -> Self {
        BlowupSet {
            w1: (0.0, 2.0),
            w2: (-1.0, 1.0),
            t: (0.25, 1.0),
            counts: [21, 11, 7],
        }
    }
}

fn spread(r: (f64, f64), n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![r.0];
    }
    (0..n).map(|k| r.0 + (r.1 - r.0) * k as f64 / (n - 1) as f64).collect()
}

impl BlowupSet {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w1.0 >= 0.0
            && self.w1.1 >= self.w1.0
            && self.w2.1 >= self.w2.0
            && self.t.0 > 0.0
            && self.t.1 >= self.t.0
            && [self.w1.1, self.w2.0, self.w2.1, self.t.1].iter().all(|v| v.is_finite())
            && self.counts.iter().all(|&n| n > 0);
        if !ok {
            return Err(Error::InvalidArgument("blow-up set must lie in {w₁ ≥ 0} × [δ, T] with δ > 0".into()));
        }
        Ok(())
    }

    pub fn points(&self, dim: usize) -> Vec<SpaceTimePoint> {
        let w2 = if dim == 1 { vec![0.0] } else { spread(self.w2, self.counts[1]) };
        let mut out = Vec::new();
        for &t in &spread(self.t, self.counts[2]) {
            for &b in &w2 {
                for &a in &spread(self.w1, self.counts[0]) {
                    out.push(SpaceTimePoint::at(a, b, t));
                }
            }
        }
        out
    }
}

/// `sup_K |u(z + a R w, a² t) − v(w₁, t)|` for each scale, on one field.
/// Values outside `Ω` are the boundary data.
pub fn blowup_errors(field: Arc<dyn ScalarField>, z: Point, normal: Point, scales: &[f64], set: &BlowupSet) -> Result<Vec<(f64, f64)>> {
    set.validate()?;
    let dim = field.dim();
    let v = HalfSpaceSolution::new(dim)?;
    let pts = set.points(dim);
    let mut out = Vec::with_capacity(scales.len());
    for &a in scales {
        let r = rescale(field.clone(), z, normal, a)?;
        let hi = r.time_window().1;
        let mut e: f64 = 0.0;
        for p in &pts {
            if p.t > hi * (1.0 + 1e-12) {
                return Err(Error::out_of_domain(&p.x, p.t));
            }
            e = e.max((r.extended_value(p) - v.v(p.x[0], p.t)).abs());
        }
        out.push((a, e));
    }
    Ok(out)
}

/// Resolution of the per-scale solves, in units of the scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupResolution {
    /// `h = a / cells`.
    pub cells: usize,
    /// `Δt = a² T_K / steps`.
    pub steps: usize,
    pub snapshot_every: usize,
}

impl Default for BlowupResolution {
    fn default() -> Self {
        BlowupResolution {
            cells: 16,
            steps: 400,
            snapshot_every: 4,
        }
    }
}

/// One scale: the solve at that scale and its half-resolution companion.
#[derive(Clone, Debug)]
pub struct BlowupRun {
    pub scale: f64,
    pub fine: Arc<SpaceTimeField>,
    pub coarse: Arc<SpaceTimeField>,
}

/// Solves the ring once per scale on a grid refined with the scale, plus a
/// run at twice the spacing (and four times the step) for the noise floor.
pub fn blowup_runs(ring: &RingDomain, scales: &[f64], set: &BlowupSet, res: &BlowupResolution) -> Result<Vec<BlowupRun>> {
    set.validate()?;
    if res.cells < 2 || res.steps < 4 || res.snapshot_every == 0 {
        return Err(Error::InvalidArgument("blow-up resolution is too coarse".into()));
    }
    let mut out = Vec::with_capacity(scales.len());
    for &a in scales {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {a} must be positive")));
        }
        let horizon = a * a * set.t.1;
        let h = a / res.cells as f64;
        let dt = horizon / res.steps as f64;
        let fine = solve_heat(ring, &GridSpec::new(h, dt, horizon).with_snapshot_every(res.snapshot_every), None)?;
        let coarse = solve_heat(
            ring,
            &GridSpec::new(2.0 * h, 4.0 * dt, horizon).with_snapshot_every(res.snapshot_every.div_ceil(4).max(1)),
            None,
        )?;
        out.push(BlowupRun {
            scale: a,
            fine: Arc::new(fine),
            coarse: Arc::new(coarse),
        });
    }
    Ok(out)
}

/// Per-scale errors against the half-space profile with the noise floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupResult {
    pub z: Point,
    pub scales: Vec<f64>,
    pub errors: Vec<f64>,
    pub coarse_errors: Vec<f64>,
    /// Largest sup-difference between the fine and coarse runs over `K`.
    pub noise_floor: f64,
    /// `max_i (e_{i+1} − e_i − floor)`; nonpositive when the sequence is
    /// nonincreasing beyond the floor.
    pub excess: f64,
    /// Argmax of the error at each scale.
    pub worst_points: Vec<SpaceTimePoint>,
    pub runtime_s: f64,
}

/// Errors `e_i` at `z ∈ ∂Ω₁` with the outward normal of the inner body.
pub fn blowup_convergence(runs: &[BlowupRun], z: Point, set: &BlowupSet) -> Result<BlowupResult> {
    let started = Instant::now();
    set.validate()?;
    let first = runs.first().ok_or_else(|| Error::InvalidArgument("no blow-up runs".into()))?;
    let normal = first
        .fine
        .ring()
        .inner()
        .outward_normal(&z)
        .ok_or_else(|| Error::InvalidArgument("no well-defined normal at z".into()))?;
    let dim = first.fine.dim();
    let v = HalfSpaceSolution::new(dim)?;
    let pts = set.points(dim);
    let mut errors = Vec::new();
    let mut coarse_errors = Vec::new();
    let mut worst_points = Vec::new();
    let mut floor: f64 = 0.0;
    for run in runs {
        let fine = rescale(run.fine.clone(), z, normal, run.scale)?;
        let coarse = rescale(run.coarse.clone(), z, normal, run.scale)?;
        let hi = fine.time_window().1.min(coarse.time_window().1);
        let (mut e, mut ec, mut at) = (0.0f64, 0.0f64, pts[0]);
        for p in &pts {
            if p.t > hi * (1.0 + 1e-12) {
                return Err(Error::out_of_domain(&p.x, p.t));
            }
            let exact = v.v(p.x[0], p.t);
            let (uf, uc) = (fine.extended_value(p), coarse.extended_value(p));
            if (uf - exact).abs() > e {
                e = (uf - exact).abs();
                at = *p;
            }
            ec = ec.max((uc - exact).abs());
            floor = floor.max((uf - uc).abs());
        }
        errors.push(e);
        coarse_errors.push(ec);
        worst_points.push(at);
    }
    let excess = errors.windows(2).map(|w| w[1] - w[0] - floor).fold(f64::NEG_INFINITY, f64::max);
    Ok(BlowupResult {
        z,
        scales: runs.iter().map(|r| r.scale).collect(),
        errors,
        coarse_errors,
        noise_floor: floor,
        excess: if excess.is_finite() { excess } else { 0.0 },
        worst_points,
        runtime_s: started.elapsed().as_secs_f64(),
    })
}

impl BlowupResult {
    /// Report with `worst = excess` and tolerance 0.
    pub fn to_report(&self, field: &dyn ScalarField, opts: &CheckOptions) -> ConvexityReport {
        let started = Instant::now();
        let mut report = ConvexityReport::new("blowup", field, opts, 0.0);
        report.absorb(
            self.errors
                .iter()
                .zip(&self.worst_points)
                .map(|(&e, p)| RankedEntry {
                    value: e,
                    witness: Witness::point(*p, Some(self.z)),
                })
                .collect(),
        );
        report.worst = self.excess;
        report.params = json!({ "z": [self.z[0], self.z[1]], "scales": self.scales });
        report.details = json!({
            "errors": self.errors,
            "coarse_errors": self.coarse_errors,
            "noise_floor": self.noise_floor,
        });
        let mut report = report.finish(started);
        report.runtime_s += self.runtime_s;
        report
    }
}
