use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{admissible_samples, CheckOptions, ConvexityReport, RankedEntry, Witness};
use crate::error::{Error, Result};
use crate::field::{Exclusion, ScalarField};
use crate::geometry::{parabolic_segment, Point, SpaceTimePoint};

/// Positivity, radial monotonicity and time monotonicity:
/// `0 < u < 1`, `(w − x)·Du < ε`, `u_t > −ε`.
///
/// The sampled value is the largest of `(w − x)·Du`, `−u_t` and the excess
/// of `u` outside `[0, 1]`. A nodal bound violation of a discrete solution
/// saturates `worst`.
pub fn check_monotonicity(field: &dyn ScalarField, budget: usize, opts: &CheckOptions) -> ConvexityReport {
    let started = Instant::now();
    let tol = opts.tolerance_for(field);
    let mut report = ConvexityReport::new("monotonicity", field, opts, tol);
    let samples = admissible_samples(field, budget, &mut opts.rng(1));
    let sign = opts.sign();
    let evals: Vec<(RankedEntry, [f64; 3])> = samples
        .par_iter()
        .map(|&(p, a)| {
            let (radial, neg_ut, u) = match field.jet(&p) {
                Ok(j) => (sign * (p.x - a).dot(&j.du), -sign * j.ut, j.u),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            let range = (-u).max(u - 1.0);
            let value = radial.max(neg_ut).max(range);
            (
                RankedEntry {
                    value: if value.is_nan() { f64::NAN } else { value },
                    witness: Witness::point(p, Some(a)),
                },
                [radial, neg_ut, u],
            )
        })
        .collect();
    let fold = |k: usize, f: fn(f64, f64) -> f64, init: f64| evals.iter().map(|e| e.1[k]).fold(init, f);
    let max_radial = fold(0, f64::max, f64::NEG_INFINITY);
    let max_neg_ut = fold(1, f64::max, f64::NEG_INFINITY);
    let min_u = fold(2, f64::min, f64::INFINITY);
    let max_u = fold(2, f64::max, f64::NEG_INFINITY);
    report.absorb(evals.into_iter().map(|e| e.0).collect());
    let nodal = field.nodal_bounds();
    let nodal_ok = nodal.map(|b| b.min_value > 0.0 && b.max_value < 1.0 && b.min_increment >= 0.0);
    if nodal_ok == Some(false) {
        report.worst = f64::MAX;
    }
    report.params = json!({ "budget": budget, "negate": opts.negate });
    report.details = json!({
        "max_radial_derivative": finite(max_radial),
        "max_negative_ut": finite(max_neg_ut),
        "min_u": finite(min_u),
        "max_u": finite(max_u),
        "nodal": nodal,
        "nodal_strict_bounds": nodal_ok,
    });
    report.finish(started)
}

/// `max (w − x)·Du(w, t) + 2t u_t(w, t)` over admissible `(w, t)` and
/// boundary anchors `x`.
pub fn check_borell_inequality(field: &dyn ScalarField, budget: usize, opts: &CheckOptions) -> ConvexityReport {
    let started = Instant::now();
    let tol = opts.tolerance_for(field);
    let mut report = ConvexityReport::new("borell", field, opts, tol);
    let samples = admissible_samples(field, budget, &mut opts.rng(2));
    let sign = opts.sign();
    let entries: Vec<RankedEntry> = samples
        .par_iter()
        .map(|&(p, a)| {
            let value = match field.jet(&p) {
                Ok(j) => sign * ((p.x - a).dot(&j.du) + 2.0 * p.t * j.ut),
                Err(_) => f64::NAN,
            };
            RankedEntry {
                value,
                witness: Witness::point(p, Some(a)),
            }
        })
        .collect();
    report.absorb(entries);
    report.params = json!({ "budget": budget, "negate": opts.negate });
    report.finish(started)
}

/// `d/dλ u(P(λ))` along the parabolic segment from `(x, s)` to `Y`, on
/// `λ = k / budget`. Points still inside the clearance band of `∂Ω₁` (or
/// before the window) at the start of the segment are skipped.
pub fn check_segment_monotonicity(
    field: &dyn ScalarField,
    x: Point,
    y: SpaceTimePoint,
    s: f64,
    budget: usize,
    opts: &CheckOptions,
) -> Result<ConvexityReport> {
    let started = Instant::now();
    if !(s >= 0.0 && s <= y.t) || budget == 0 {
        return Err(Error::InvalidArgument(format!("need 0 ≤ s ≤ t and a positive budget, got s = {s}, t = {}", y.t)));
    }
    let tol = opts.tolerance_for(field);
    let mut report = ConvexityReport::new("segment_monotonicity", field, opts, tol);
    let from = SpaceTimePoint::new(x, s);
    let (rs, rt) = (s.sqrt(), y.t.sqrt());
    let mut entered = false;
    let mut points = Vec::new();
    for k in 1..=budget {
        let lambda = k as f64 / budget as f64;
        let p = parabolic_segment(&from, &y, lambda);
        match field.exclusion(&p) {
            None => {
                entered = true;
                points.push((lambda, p));
            }
            Some(Exclusion::InnerBand | Exclusion::BeforeWindow) if !entered => {}
            Some(_) => return Err(Error::out_of_domain(&p.x, p.t)),
        }
    }
    let sign = opts.sign();
    let evals: Vec<Result<(RankedEntry, f64)>> = points
        .par_iter()
        .map(|&(lambda, p)| {
            let j = field.jet(&p)?;
            let rho = (1.0 - lambda) * rs + lambda * rt;
            let d = (y.x - x).dot(&j.du) + 2.0 * rho * (rt - rs) * j.ut;
            Ok((
                RankedEntry {
                    value: sign * d,
                    witness: Witness::point(p, Some(x)),
                },
                j.u,
            ))
        })
        .collect();
    let evals = evals.into_iter().collect::<Result<Vec<_>>>()?;
    let max_increase = evals.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    report.absorb(evals.into_iter().map(|e| e.0).collect());
    report.params = json!({
        "x": [x[0], x[1]], "y": [y.x[0], y.x[1]], "s": s, "t": y.t, "budget": budget, "negate": opts.negate,
    });
    report.details = json!({ "max_increase": finite(max_increase), "skipped": budget - report.samples });
    Ok(report.finish(started))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
