//! Two-point functionals and the verification and search procedures built
//! on them.

mod ascent;
mod blowup;
mod caloric;
mod checks;
mod parabolic;
mod search;

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, SigmaPair};
use crate::geometry::{p_midpoint, Point, SpaceTimePoint};

pub use ascent::{climb, ClimbOutcome, ClimbSettings, Termination};
pub use blowup::{blowup_convergence, blowup_errors, blowup_runs, BlowupResolution, BlowupResult, BlowupRun, BlowupSet};
pub use caloric::{CaloricFunction, Monomial};
pub use checks::{check_borell_inequality, check_monotonicity, check_segment_monotonicity};
pub use parabolic::{halfspace_curvature_profile, parabolic_functional, verify_parabolic_convexity, verify_strong_convexity, CurvatureSample, PatchSpec};
pub use search::{scan_no_interior_max, search_p_violation, OptimizerSpec};

/// Calibrated constant of the grid tolerance `ε_conv(h) = C_TOL · h²`.
pub const C_TOL: f64 = 30.0;

/// Number of ranked entries kept for CSV dumps.
pub const WORST_KEPT: usize = 100;

/// `C_TOL · h²`.
pub fn eps_conv(h: f64) -> f64 {
    C_TOL * h * h
}

/// Settings shared by every check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckOptions {
    pub seed: u64,
    /// Overrides `ε_conv(h)`.
    pub tolerance: Option<f64>,
    /// Negate the functional (negative control).
    pub negate: bool,
}

impl CheckOptions {
    pub fn seeded(seed: u64) -> Self {
        CheckOptions {
            seed,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn negated(mut self) -> Self {
        self.negate = true;
        self
    }

    pub fn tolerance_for(&self, field: &dyn ScalarField) -> f64 {
        self.tolerance.unwrap_or_else(|| eps_conv(field.spacing()))
    }

    fn sign(&self) -> f64 {
        if self.negate {
            -1.0
        } else {
            1.0
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

/// Where a sampled functional was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: SpaceTimePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<SpaceTimePoint>,
    /// Boundary anchor for the pointwise inequalities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

impl Witness {
    pub fn pair(p: &SigmaPair) -> Self {
        Witness {
            x: p.x,
            y: Some(p.y),
            anchor: None,
            level: Some(p.level),
        }
    }

    pub fn point(x: SpaceTimePoint, anchor: Option<Point>) -> Self {
        Witness {
            x,
            y: None,
            anchor,
            level: None,
        }
    }

    pub fn as_pair(&self) -> Option<SigmaPair> {
        self.y.map(|y| SigmaPair {
            x: self.x,
            y,
            level: self.level.unwrap_or(f64::NAN),
            midpoint_admissible: true,
        })
    }

    fn key(&self) -> [f64; 8] {
        let y = self.y.map(|p| p.key()).unwrap_or([f64::NEG_INFINITY; 3]);
        let a = self.anchor.unwrap_or(Point::repeat(f64::NEG_INFINITY));
        let k = self.x.key();
        [k[0], k[1], k[2], y[0], y[1], y[2], a[0], a[1]]
    }

    pub const CSV_HEADER: &'static str = "value,x1,y1,s,x2,y2,t,anchor_x,anchor_y,level";

    fn csv_row(&self, value: f64) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.12e}")).unwrap_or_default();
        format!(
            "{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{},{},{}",
            value,
            self.x.x[0],
            self.x.x[1],
            self.x.t,
            opt(self.y.map(|p| p.x[0])),
            opt(self.y.map(|p| p.x[1])),
            opt(self.y.map(|p| p.t)),
            opt(self.anchor.map(|a| a[0])),
            opt(self.anchor.map(|a| a[1])),
            opt(self.level),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub value: f64,
    pub witness: Witness,
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub check: String,
    pub params: serde_json::Value,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub levels: Vec<f64>,
    pub samples: usize,
    pub worst: f64,
    #[serde(default)]
    pub argmax: Option<Witness>,
    /// Measured margin constant (strong convexity).
    #[serde(default)]
    pub margin: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Whether the outcome counts toward the run's exit status.
    pub asserted: bool,
    pub seed: u64,
    pub runtime_s: f64,
    #[serde(default)]
    pub details: serde_json::Value,
    #[serde(skip)]
    pub ranked: Vec<RankedEntry>,
}

impl ConvexityReport {
    fn new(check: &str, field: &dyn ScalarField, opts: &CheckOptions, tolerance: f64) -> Self {
        ConvexityReport {
            check: check.to_string(),
            params: serde_json::Value::Null,
            p: None,
            levels: Vec::new(),
            samples: 0,
            worst: f64::NEG_INFINITY,
            argmax: None,
            margin: None,
            tolerance,
            pass: false,
            asserted: field.zero_initial_data(),
            seed: opts.seed,
            runtime_s: 0.0,
            details: serde_json::Value::Null,
            ranked: Vec::new(),
        }
    }

    /// Fold evaluated entries into `worst`, `argmax` and the ranked list.
    fn absorb(&mut self, entries: Vec<RankedEntry>) {
        self.samples += entries.len();
        let mut all = std::mem::take(&mut self.ranked);
        all.extend(entries);
        all.sort_by(rank_order);
        all.truncate(WORST_KEPT);
        if let Some(top) = all.first() {
            self.worst = top.value;
            self.argmax = Some(top.witness);
        }
        self.ranked = all;
    }

    /// Sets `pass` from `worst` and `tolerance`, sanitizing non-finite values.
    fn finish(mut self, started: std::time::Instant) -> Self {
        if self.worst.is_nan() {
            self.worst = f64::MAX;
        }
        self.worst = self.worst.clamp(-f64::MAX, f64::MAX);
        self.pass = self.worst <= self.tolerance;
        self.runtime_s = started.elapsed().as_secs_f64();
        self
    }

    pub fn worst_csv(&self) -> String {
        let mut out = format!("{}\n", Witness::CSV_HEADER);
        for e in &self.ranked {
            let _ = writeln!(out, "{}", e.witness.csv_row(e.value));
        }
        out
    }

    /// JSON with the runtime zeroed, for determinism comparisons.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.runtime_s = 0.0;
        serde_json::to_string(&c).expect("report serializes")
    }
}

/// Descending value; ties broken lexicographically on the witness.
fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.value.total_cmp(&a.value).then_with(|| {
        let (ka, kb) = (a.witness.key(), b.witness.key());
        ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    })
}

/// `(u(X) + u(Y))/2 − u(p_midpoint(X, Y, p))`.
pub fn c_p(field: &dyn ScalarField, pair: &SigmaPair, p: f64) -> Result<f64> {
    if pair.x == pair.y {
        field.value(&pair.x)?;
        return Ok(0.0);
    }
    let m = p_midpoint(&pair.x, &pair.y, p);
    let um = field.value(&m)?;
    let ux = field.value(&pair.x)?;
    let uy = field.value(&pair.y)?;
    Ok(0.5 * (ux + uy) - um)
}

/// `C_p(X, Y) + Σ (h_i(X) − h_i(Y))² − δ s`.
pub fn q_functional(field: &dyn ScalarField, pair: &SigmaPair, p: f64, hs: &[CaloricFunction], delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("δ = {delta} must be nonnegative")));
    }
    let c = c_p(field, pair, p)?;
    let pen: f64 = hs.iter().map(|h| (h.value(&pair.x) - h.value(&pair.y)).powi(2)).sum();
    Ok(c + pen - delta * pair.x.t)
}

/// Uniform admissible samples of `(w, t)` with a random inner-boundary anchor.
fn admissible_samples<R: Rng>(field: &dyn ScalarField, count: usize, rng: &mut R) -> Vec<(SpaceTimePoint, Point)> {
    let lat = field.sampling_lattice();
    let (t0, t1) = field.time_window();
    let anchors = field.inner_boundary_samples();
    let span = Point::new(lat.h * (lat.nx.max(1) - 1) as f64, lat.h * (lat.ny.max(1) - 1) as f64);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 200 * count.max(1) {
        attempts += 1;
        let x = Point::new(
            lat.origin[0] + rng.gen::<f64>() * span[0],
            if field.dim() == 1 { 0.0 } else { lat.origin[1] + rng.gen::<f64>() * span[1] },
        );
        let p = SpaceTimePoint::new(x, t0 + rng.gen::<f64>() * (t1 - t0));
        let a = anchors[rng.gen_range(0..anchors.len())];
        if field.is_admissible(&p) {
            out.push((p, a));
        }
    }
    out
}
