use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{c_p, CheckOptions, ConvexityReport, RankedEntry, Witness, WORST_KEPT};
use crate::error::{Error, Result};
use crate::field::{extract_level, sample_sigma_pairs, second_fundamental_form, PairSampling, ScalarField, SigmaPair};
use crate::geometry::{p_midpoint, parabolic_segment, SpaceTimePoint};
use crate::oracle::HalfSpaceSolution;

/// Parameters for the dyadic closure spot-check.
const CLOSURE_LAMBDAS: [f64; 2] = [0.25, 0.75];

/// `max(C₂, (u(X)+u(Y))/2 − u(P(λ)))` over the admissible dyadic points.
fn parabolic_entry(field: &dyn ScalarField, pair: &SigmaPair, sign: f64) -> Result<[f64; 3]> {
    let c2 = c_p(field, pair, 2.0)?;
    let c1 = c_p(field, pair, 1.0)?;
    let mut closure = f64::NEG_INFINITY;
    if pair.x != pair.y {
        let mean = 0.5 * (field.value(&pair.x)? + field.value(&pair.y)?);
        for l in CLOSURE_LAMBDAS {
            let p = parabolic_segment(&pair.x, &pair.y, l);
            if field.is_admissible(&p) {
                closure = closure.max(sign * (mean - field.value(&p)?));
            }
        }
    }
    Ok([sign * c2, c1, closure])
}

/// `C₂ ≤ ε` over Σ pairs on each level, with the dyadic closure defect
/// `u(P(λ)) ≥ μ − ε` at `λ ∈ {1/4, 3/4}` folded into the same maximum.
pub fn verify_parabolic_convexity(
    field: &dyn ScalarField,
    levels: &[f64],
    window: Option<(f64, f64)>,
    budget: usize,
    opts: &CheckOptions,
) -> Result<ConvexityReport> {
    let started = Instant::now();
    let tol = opts.tolerance_for(field);
    let window = window.unwrap_or_else(|| field.time_window());
    let mut report = ConvexityReport::new("parabolic_convexity", field, opts, tol);
    report.p = Some(2.0);
    report.levels = levels.to_vec();
    let sign = opts.sign();
    let strict_sep = 4.0 * field.spacing();
    let mut per_level = Vec::new();
    for (li, &mu) in levels.iter().enumerate() {
        let spec = PairSampling::new(mu, window, budget);
        let pairs = sample_sigma_pairs(field, &spec, &mut opts.rng(16 + li as u64))?;
        let vals: Vec<Result<[f64; 3]>> = pairs.par_iter().map(|p| parabolic_entry(field, p, sign)).collect();
        let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
        let mut max_c2 = f64::NEG_INFINITY;
        let mut max_c1 = f64::NEG_INFINITY;
        let mut max_closure = f64::NEG_INFINITY;
        let mut order_violations = 0usize;
        let mut strict = f64::NEG_INFINITY;
        for (p, v) in pairs.iter().zip(&vals) {
            max_c2 = max_c2.max(v[0]);
            max_c1 = max_c1.max(v[1]);
            max_closure = max_closure.max(v[2]);
            if p.x.t != p.y.t && v[1] > sign * v[0] + 1e-12 {
                order_violations += 1;
            }
            let d2 = p.separation2();
            if d2 >= strict_sep * strict_sep {
                strict = strict.max(sign * v[0] / d2);
            }
        }
        per_level.push(json!({
            "level": mu,
            "pairs": pairs.len(),
            "max_c2": max_c2,
            "max_c1": max_c1,
            "max_closure_defect": finite(max_closure),
            "c1_above_c2": order_violations,
            "max_c2_over_separation2": finite(strict),
        }));
        report.absorb(
            pairs
                .iter()
                .zip(&vals)
                .map(|(p, v)| RankedEntry {
                    value: v[0].max(v[2]),
                    witness: Witness::pair(p),
                })
                .collect(),
        );
    }
    report.params = json!({ "levels": levels, "window": [window.0, window.1], "budget": budget, "negate": opts.negate });
    report.details = json!({ "per_level": per_level });
    Ok(report.finish(started))
}

/// Re-evaluates the functional maximized by [`verify_parabolic_convexity`].
pub fn parabolic_functional(field: &dyn ScalarField, pair: &SigmaPair) -> Result<f64> {
    let v = parabolic_entry(field, pair, 1.0)?;
    Ok(v[0].max(v[2]))
}

/// A compact piece of `{u = μ}` over a time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub level: f64,
    pub window: (f64, f64),
    /// Contour points kept per time slice, evenly strided.
    #[serde(default = "default_points")]
    pub points_per_slice: usize,
    /// Local pairs have space-time separation at most this.
    #[serde(default = "default_max_separation")]
    pub max_separation: f64,
    /// Pairs closer than this are dropped; at least two spacings.
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
    #[serde(default = "default_slices")]
    pub time_slices: usize,
    /// Pass thresholds, recorded at a reference resolution.
    #[serde(default = "default_threshold")]
    pub c_min: f64,
    #[serde(default = "default_threshold")]
    pub kappa_min: f64,
}

fn default_points() -> usize {
    256
}

fn default_max_separation() -> f64 {
    0.25
}

fn default_min_separation() -> f64 {
    0.08
}

fn default_slices() -> usize {
    16
}

fn default_threshold() -> f64 {
    1e-9
}

impl PatchSpec {
    pub fn new(level: f64, window: (f64, f64)) -> Self {
        PatchSpec {
            level,
            window,
            points_per_slice: default_points(),
            max_separation: default_max_separation(),
            min_separation: default_min_separation(),
            time_slices: default_slices(),
            c_min: default_threshold(),
            kappa_min: default_threshold(),
        }
    }

    pub fn with_points_per_slice(mut self, n: usize) -> Self {
        self.points_per_slice = n.max(1);
        self
    }

    pub fn with_separation(mut self, min: f64, max: f64) -> Self {
        self.min_separation = min;
        self.max_separation = max;
        self
    }

    pub fn with_thresholds(mut self, c_min: f64, kappa_min: f64) -> Self {
        self.c_min = c_min;
        self.kappa_min = kappa_min;
        self
    }
}

/// Largest `c ≥ 0` with `max (C₁ + c d²) ≤ 0` over `(C₁, d²)`, by bisection.
fn bisect_margin(vals: &[(f64, f64)]) -> f64 {
    let ok = |c: f64| vals.iter().all(|&(c1, d2)| c1 + c * d2 <= 0.0);
    if vals.is_empty() || !ok(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while ok(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Strong convexity of `{u = μ}` on a patch: the bisected margin `c` of the
/// local pair inequality `C₁ + c(|x−y|² + |s−t|²) ≤ 0`, and the smallest
/// shape-operator eigenvalue `κ` over the same level samples. Pairs are all
/// couples of samples within the separation bounds whose midpoint is
/// admissible. `worst` is `max(c_min − c, κ_min − κ)` against tolerance 0.
pub fn verify_strong_convexity(field: &dyn ScalarField, patch: &PatchSpec, opts: &CheckOptions) -> Result<ConvexityReport> {
    let started = Instant::now();
    let (lo, hi) = field.time_window();
    let (t0, t1) = patch.window;
    if !(t0 >= lo && t1 <= hi * (1.0 + 1e-12) && t0 < t1) {
        return Err(Error::InvalidArgument(format!(
            "patch window [{t0}, {t1}] must lie inside the admissible window [{lo}, {hi}]"
        )));
    }
    let h = field.spacing();
    if !(patch.min_separation >= 2.0 * h && patch.max_separation > patch.min_separation) {
        return Err(Error::InvalidArgument(format!(
            "separation bounds [{}, {}] need 2h ≤ min < max with h = {h}",
            patch.min_separation, patch.max_separation
        )));
    }
    let mut report = ConvexityReport::new("strong_convexity", field, opts, 0.0);
    report.p = Some(1.0);
    report.levels = vec![patch.level];
    let sign = opts.sign();
    let slices_n = patch.time_slices.max(2);
    let times: Vec<f64> = (0..slices_n)
        .map(|k| if k + 1 == slices_n { t1 } else { t0 + (t1 - t0) * k as f64 / (slices_n - 1) as f64 })
        .collect();
    let g_min = 1e-8;
    let cap = patch.points_per_slice.max(1);
    let slices: Vec<Result<Vec<(SpaceTimePoint, f64)>>> = times
        .par_iter()
        .map(|&t| {
            let contour = match extract_level(field, patch.level, t) {
                Ok(c) => c,
                Err(Error::EmptyLevel { .. }) => return Ok(Vec::new()),
                Err(e) => return Err(e),
            };
            let n = contour.points.len();
            let stride = n.div_ceil(cap).max(1);
            contour
                .points
                .iter()
                .step_by(stride)
                .map(|x| SpaceTimePoint::new(*x, t))
                .filter(|p| field.is_admissible(p))
                .map(|p| Ok((p, sign * second_fundamental_form(field, &p, g_min)?[0])))
                .collect()
        })
        .collect();
    let slices = slices.into_iter().collect::<Result<Vec<_>>>()?;
    let mut kappa = f64::INFINITY;
    let mut kappa_at = None;
    let mut per_slice = Vec::new();
    for (t, s) in times.iter().zip(&slices) {
        let m = s.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        per_slice.push(json!({ "t": t, "samples": s.len(), "min_eigenvalue": finite(m) }));
        for &(p, k) in s {
            if k < kappa {
                kappa = k;
                kappa_at = Some(p);
            }
        }
    }
    let points: Vec<SpaceTimePoint> = slices.iter().flatten().map(|e| e.0).collect();
    if points.is_empty() {
        return Err(Error::InsufficientSamples { found: 0, required: 1 });
    }

    let min_sep2 = patch.min_separation * patch.min_separation;
    let max_sep2 = patch.max_separation * patch.max_separation;
    let pair = |i: usize, j: usize| SigmaPair {
        x: points[i],
        y: points[j],
        level: patch.level,
        midpoint_admissible: true,
    };
    let evals: Vec<Result<Vec<(u32, u32, f64, f64)>>> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in i + 1..points.len() {
                let q = pair(i, j);
                let d2 = q.separation2();
                if d2 < min_sep2 || d2 > max_sep2 || !field.is_admissible(&p_midpoint(&q.x, &q.y, 1.0)) {
                    continue;
                }
                out.push((i as u32, j as u32, sign * c_p(field, &q, 1.0)?, d2));
            }
            Ok(out)
        })
        .collect();
    let evals: Vec<(u32, u32, f64, f64)> = evals.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    let vals: Vec<(f64, f64)> = evals.iter().map(|e| (e.2, e.3)).collect();
    let c = bisect_margin(&vals);

    let mut top: Vec<&(u32, u32, f64, f64)> = evals.iter().collect();
    let keep = top.len().min(4 * WORST_KEPT);
    if keep > 0 && keep < top.len() {
        top.select_nth_unstable_by(keep - 1, |a, b| (b.2 + c * b.3).total_cmp(&(a.2 + c * a.3)));
        top.truncate(keep);
    }
    report.absorb(
        top.iter()
            .map(|&&(i, j, c1, d2)| RankedEntry {
                value: c1 + c * d2,
                witness: Witness::pair(&pair(i as usize, j as usize)),
            })
            .collect(),
    );
    report.samples = evals.len();
    report.margin = Some(c);
    report.worst = (patch.c_min - c).max(patch.kappa_min - kappa);
    report.params = serde_json::to_value(patch).expect("patch serializes");
    report.details = json!({
        "margin_c": c,
        "kappa_min": kappa,
        "kappa_at": kappa_at,
        "pairs": evals.len(),
        "curvature_samples": points.len(),
        "binding_pair": report.ranked.first().map(|e| e.witness),
        "per_slice": per_slice,
        "negate": opts.negate,
    });
    Ok(report.finish(started))
}

/// Computed against closed-form curvature of the half-space level parabola.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub w: f64,
    pub t: f64,
    pub computed: f64,
    pub closed_form: f64,
}

impl CurvatureSample {
    pub fn relative_error(&self) -> f64 {
        (self.computed - self.closed_form).abs() / self.closed_form.abs()
    }
}

/// Largest shape-operator eigenvalue at `(w, c w²)` on `{v = μ}`, next to
/// the curvature `2c / (1 + 4c²w²)^{3/2}` of the parabola `t = c w²`.
pub fn halfspace_curvature_profile(field: &HalfSpaceSolution, level: f64, ws: &[f64]) -> Result<Vec<CurvatureSample>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} must lie in (0, 1)")));
    }
    let c = HalfSpaceSolution::parabola_constant(level, 1e-8, 1e4);
    ws.iter()
        .map(|&w| {
            let t = c * w * w;
            let ev = second_fundamental_form(field, &SpaceTimePoint::at(w, 0.0, t), 0.0)?;
            Ok(CurvatureSample {
                w,
                t,
                computed: *ev.last().expect("nonempty spectrum"),
                closed_form: 2.0 * c / (1.0 + 4.0 * c * c * w * w).powf(1.5),
            })
        })
        .collect()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::halfspace_field;

    #[test]
    fn bisection_recovers_closed_form_margin() {
        let vals = [(-0.5, 1.0), (-0.1, 0.5), (-2.0, 0.25)];
        let c = bisect_margin(&vals);
        assert!((c - 0.2).abs() < 1e-12, "{c}");
        assert_eq!(bisect_margin(&[(1e-6, 1.0)]), 0.0);
    }

    #[test]
    fn halfspace_is_exactly_parabolically_convex() {
        let f = halfspace_field(1).unwrap().with_window(0.05, 5.0);
        let r = verify_parabolic_convexity(&f, &[0.3, 0.6], None, 400, &CheckOptions::seeded(5).with_tolerance(1e-10)).unwrap();
        assert!(r.pass, "{}", r.worst);
        let pair = r.argmax.unwrap().as_pair().unwrap();
        assert!((parabolic_functional(&f, &pair).unwrap() - r.worst).abs() <= 1e-12);
    }

    #[test]
    fn halfspace_curvature_matches_parabola() {
        let f = halfspace_field(2).unwrap().with_window(1e-3, 100.0).with_extent(10.0);
        let prof = halfspace_curvature_profile(&f, 0.4795, &[0.2, 0.5, 1.0, 2.0, 4.0]).unwrap();
        for s in &prof {
            assert!(s.relative_error() < 1e-8, "{s:?}");
        }
        assert!(prof.windows(2).all(|w| w[1].computed < w[0].computed));
    }

    #[test]
    fn patch_before_window_is_rejected() {
        let f = halfspace_field(1).unwrap();
        let p = PatchSpec::new(0.5, (0.01, 1.0));
        assert!(matches!(verify_strong_convexity(&f, &p, &CheckOptions::default()), Err(Error::InvalidArgument(_))));
    }
}
