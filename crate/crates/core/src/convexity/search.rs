use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{c_p, climb, CaloricFunction, CheckOptions, ClimbOutcome, ClimbSettings, ConvexityReport, RankedEntry, Witness};
use crate::error::{Error, Result};
use crate::field::{sample_sigma_pairs, PairSampling, ScalarField, SigmaPair};

/// Levels, window and climb controls shared by the pair searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSpec {
    pub levels: Vec<f64>,
    /// `None` means the field's admissible window.
    pub window: Option<(f64, f64)>,
    /// Climbs started from the best sampled pairs of each level.
    pub starts: usize,
    pub max_iterations: usize,
    /// `None` means a quarter of the field spacing.
    pub step: Option<f64>,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            levels: vec![0.2, 0.5, 0.8],
            window: None,
            starts: 8,
            max_iterations: 4000,
            step: None,
        }
    }
}

impl OptimizerSpec {
    pub fn with_levels(mut self, levels: &[f64]) -> Self {
        self.levels = levels.to_vec();
        self
    }

    pub fn with_window(mut self, window: (f64, f64)) -> Self {
        self.window = Some(window);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.iter().any(|l| !(l.is_finite() && *l > 0.0 && *l < 1.0)) {
            return Err(Error::InvalidArgument("levels must be a nonempty list inside (0, 1)".into()));
        }
        if self.step.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        Ok(())
    }
}

/// Up to `per_level` pairs from each level, with admissible `p`-midpoints
/// and no diagonal pairs. Levels too thin to sample come back empty.
fn seeds(field: &dyn ScalarField, p: f64, per_level: usize, spec: &OptimizerSpec, opts: &CheckOptions, stream: u64) -> Result<Vec<Vec<SigmaPair>>> {
    let window = spec.window.unwrap_or_else(|| field.time_window());
    let mut out = Vec::new();
    for (li, &mu) in spec.levels.iter().enumerate() {
        let sampling = PairSampling::new(mu, window, per_level).with_exponents(&[p]).with_diagonal_fraction(0.0);
        match sample_sigma_pairs(field, &sampling, &mut opts.rng(stream + li as u64)) {
            Ok(mut v) => {
                v.retain(|q| q.x != q.y);
                v.truncate(per_level);
                out.push(v);
            }
            Err(Error::InsufficientSamples { .. }) => out.push(Vec::new()),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Take from the levels in turn until `budget` pairs are collected.
fn round_robin(levels: Vec<Vec<SigmaPair>>, budget: usize) -> Vec<SigmaPair> {
    let mut iters: Vec<_> = levels.into_iter().map(|v| v.into_iter()).collect();
    let mut out = Vec::with_capacity(budget);
    while out.len() < budget {
        let before = out.len();
        for it in iters.iter_mut() {
            if out.len() < budget {
                out.extend(it.next());
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

fn termination_counts(climbs: &[ClimbOutcome]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for c in climbs {
        let key = serde_json::to_value(c.termination).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        *m.entry(key).or_insert(0) += 1;
    }
    m
}

/// Hill-climbs `Q` from `budget` interior Σ seeds and counts the climbs that
/// stop away from the boundary of Σ′. `worst` is that count.
pub fn scan_no_interior_max(
    field: &dyn ScalarField,
    p: f64,
    hs: &[CaloricFunction],
    delta: f64,
    budget: usize,
    optimizer: &OptimizerSpec,
    opts: &CheckOptions,
) -> Result<ConvexityReport> {
    let started = Instant::now();
    if !(1.0..=2.0).contains(&p) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("need p in [1, 2] and δ > 0, got p = {p}, δ = {delta}")));
    }
    optimizer.validate()?;
    if hs.iter().any(|h| h.dim() != field.dim()) {
        return Err(Error::InvalidArgument("caloric functions must match the field dimension".into()));
    }
    let per_level = 2 * budget.div_ceil(optimizer.levels.len());
    let pool = round_robin(seeds(field, p, per_level, optimizer, opts, 32)?, budget);
    if pool.len() < budget {
        return Err(Error::InsufficientSamples { found: pool.len(), required: budget });
    }
    let settings = ClimbSettings {
        p,
        hs: hs.to_vec(),
        delta,
        step: optimizer.step,
        max_iterations: optimizer.max_iterations,
        negate: opts.negate,
        ..Default::default()
    };
    let climbs: Vec<Result<ClimbOutcome>> = pool.par_iter().map(|s| climb(field, s, &settings)).collect();
    let climbs = climbs.into_iter().collect::<Result<Vec<_>>>()?;
    let interior: Vec<&ClimbOutcome> = climbs.iter().filter(|c| !c.termination.is_boundary()).collect();
    let mut report = ConvexityReport::new("no_interior_max", field, opts, 0.0);
    report.p = Some(p);
    report.levels = optimizer.levels.clone();
    report.absorb(
        climbs
            .iter()
            .map(|c| RankedEntry {
                value: c.value,
                witness: Witness::pair(&c.pair),
            })
            .collect(),
    );
    report.worst = interior.len() as f64;
    if let Some(c) = interior.first() {
        report.argmax = Some(Witness::pair(&c.pair));
    }
    let mut cases = BTreeMap::new();
    for c in &climbs {
        if let Some(k) = c.termination.boundary_case() {
            *cases.entry(k.to_string()).or_insert(0usize) += 1;
        }
    }
    let mean_iterations = climbs.iter().map(|c| c.iterations as f64).sum::<f64>() / climbs.len().max(1) as f64;
    let mean_gain = climbs.iter().map(|c| c.value - c.start_value).sum::<f64>() / climbs.len().max(1) as f64;
    report.params = json!({
        "p": p, "delta": delta, "budget": budget, "caloric_terms": hs.len(),
        "optimizer": optimizer, "negate": opts.negate,
    });
    report.details = json!({
        "climbs": climbs.len(),
        "boundary_fraction": 1.0 - interior.len() as f64 / climbs.len().max(1) as f64,
        "terminations": termination_counts(&climbs),
        "boundary_cases": cases,
        "mean_iterations": mean_iterations,
        "mean_gain": mean_gain,
        "interior_stops": interior.iter().take(10).map(|c| json!({
            "pair": c.pair, "value": c.value, "iterations": c.iterations, "termination": c.termination,
        })).collect::<Vec<_>>(),
    });
    Ok(report.finish(started))
}

/// Largest `C_p` found over Σ pairs by random multistart followed by local
/// ascent from the best starts. `pass` means nothing above the tolerance
/// was found.
pub fn search_p_violation(
    field: &dyn ScalarField,
    p: f64,
    budget: usize,
    optimizer: &OptimizerSpec,
    opts: &CheckOptions,
) -> Result<ConvexityReport> {
    let started = Instant::now();
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p = {p} must be at least 1")));
    }
    optimizer.validate()?;
    let per_level = budget.div_ceil(optimizer.levels.len()).max(1);
    let tol = opts.tolerance_for(field);
    let mut report = ConvexityReport::new("p_violation", field, opts, tol);
    report.p = Some(p);
    report.levels = optimizer.levels.clone();
    let pool: Vec<SigmaPair> = seeds(field, p, per_level, optimizer, opts, 48)?.into_iter().flatten().collect();
    let sign = opts.sign();
    let vals: Vec<Result<f64>> = pool.par_iter().map(|q| c_p(field, q, p).map(|v| sign * v)).collect();
    let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
    let mut sampled: Vec<RankedEntry> = pool
        .iter()
        .zip(&vals)
        .map(|(q, &v)| RankedEntry {
            value: v,
            witness: Witness::pair(q),
        })
        .collect();
    let best_sampled = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut starts = Vec::new();
    for &mu in &optimizer.levels {
        let mut level: Vec<&RankedEntry> = sampled.iter().filter(|e| e.witness.level == Some(mu)).collect();
        level.sort_by(|a, b| b.value.total_cmp(&a.value));
        starts.extend(level.into_iter().take(optimizer.starts).filter_map(|e| e.witness.as_pair()));
    }
    let settings = ClimbSettings {
        p,
        step: optimizer.step,
        max_iterations: optimizer.max_iterations,
        negate: opts.negate,
        ..Default::default()
    };
    let climbs: Vec<Result<ClimbOutcome>> = starts.par_iter().map(|s| climb(field, s, &settings)).collect();
    let climbs = climbs.into_iter().collect::<Result<Vec<_>>>()?;
    sampled.extend(climbs.iter().map(|c| RankedEntry {
        value: c.value,
        witness: Witness::pair(&c.pair),
    }));
    report.absorb(sampled);
    report.params = json!({ "p": p, "budget": budget, "optimizer": optimizer, "negate": opts.negate });
    report.details = json!({
        "sampled_pairs": pool.len(),
        "climbs": climbs.len(),
        "best_sampled": best_sampled.is_finite().then_some(best_sampled),
        "terminations": termination_counts(&climbs),
        "violation_found": report.worst > tol,
    });
    Ok(report.finish(started))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::halfspace_field;

    #[test]
    fn halfspace_p3_violation_and_p2_control() {
        let f = halfspace_field(1).unwrap();
        let spec = OptimizerSpec::default().with_levels(&[0.3, 0.5]);
        let r = search_p_violation(&f, 3.0, 400, &spec, &CheckOptions::seeded(5).with_tolerance(0.0)).unwrap();
        assert!(r.worst >= 0.005, "{}", r.worst);
        assert!(!r.pass);
        let pair = r.argmax.unwrap().as_pair().unwrap();
        assert!((c_p(&f, &pair, 3.0).unwrap() - r.worst).abs() < 1e-12);
        let c = search_p_violation(&f, 2.0, 400, &spec, &CheckOptions::seeded(5).with_tolerance(1e-10)).unwrap();
        assert!(c.worst <= 1e-10, "{}", c.worst);
        assert!(c.pass);
    }

    #[test]
    fn scan_rejects_bad_arguments() {
        let f = halfspace_field(1).unwrap();
        let spec = OptimizerSpec::default();
        assert!(scan_no_interior_max(&f, 3.0, &[], 1e-3, 4, &spec, &CheckOptions::default()).is_err());
        assert!(scan_no_interior_max(&f, 2.0, &[], 0.0, 4, &spec, &CheckOptions::default()).is_err());
    }

    #[test]
    fn large_delta_exits_at_the_initial_time() {
        let f = halfspace_field(1).unwrap();
        let spec = OptimizerSpec::default().with_levels(&[0.5]);
        let r = scan_no_interior_max(&f, 2.0, &[], 1.0, 12, &spec, &CheckOptions::seeded(2)).unwrap();
        assert_eq!(r.worst, 0.0);
        assert!(r.pass);
        assert_eq!(r.details["terminations"]["initial_time"], 12);
    }
}
