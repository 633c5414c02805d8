use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::level::{extract_level, Contour};
use super::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::{p_midpoint, Point, SpaceTimePoint};

/// Two points on a common level with admissible midpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaPair {
    pub x: SpaceTimePoint,
    pub y: SpaceTimePoint,
    pub level: f64,
    pub midpoint_admissible: bool,
}

impl SigmaPair {
    pub fn swapped(&self) -> Self {
        SigmaPair {
            x: self.y,
            y: self.x,
            ..*self
        }
    }

    /// `|x - y|² + |s - t|²`.
    pub fn separation2(&self) -> f64 {
        (self.x.x - self.y.x).norm_squared() + (self.x.t - self.y.t).powi(2)
    }

    /// Whether all `p`-midpoints are admissible for `field`.
    pub fn midpoints_admissible(&self, field: &dyn ScalarField, exponents: &[f64]) -> bool {
        exponents.iter().all(|&p| field.is_admissible(&p_midpoint(&self.x, &self.y, p)))
    }

    pub const CSV_HEADER: &'static str = "level,x1,y1,s,x2,y2,t,midpoint_admissible";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            self.level, self.x.x[0], self.x.x[1], self.x.t, self.y.x[0], self.y.x[1], self.y.t, self.midpoint_admissible
        )
    }
}

/// Parameters of [`sample_sigma_pairs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSampling {
    pub level: f64,
    pub window: (f64, f64),
    pub count: usize,
    /// Every pair must have admissible `p`-midpoints for these exponents.
    pub exponents: Vec<f64>,
    pub time_slices: usize,
    pub diagonal_fraction: f64,
    /// Upper bound on the space-time separation (local pairs).
    pub max_separation: Option<f64>,
}

impl PairSampling {
    pub fn new(level: f64, window: (f64, f64), count: usize) -> Self {
        PairSampling {
            level,
            window,
            count,
            exponents: vec![1.0, 2.0],
            time_slices: 24,
            diagonal_fraction: 0.01,
            max_separation: None,
        }
    }

    pub fn with_exponents(mut self, exponents: &[f64]) -> Self {
        self.exponents = exponents.to_vec();
        self
    }

    pub fn with_max_separation(mut self, d: f64) -> Self {
        self.max_separation = Some(d);
        self
    }

    pub fn with_diagonal_fraction(mut self, f: f64) -> Self {
        self.diagonal_fraction = f.clamp(0.0, 1.0);
        self
    }

    pub fn with_time_slices(mut self, n: usize) -> Self {
        self.time_slices = n.max(1);
        self
    }
}

/// Contours at evenly spaced times across `window`; empty slices are dropped.
pub(crate) fn window_contours(field: &dyn ScalarField, level: f64, window: (f64, f64), slices: usize) -> Result<Vec<Contour>> {
    let (lo, hi) = window;
    let times: Vec<f64> = if slices <= 1 || hi <= lo {
        vec![lo]
    } else {
        (0..slices)
            .map(|k| if k + 1 == slices { hi } else { lo + (hi - lo) * k as f64 / (slices - 1) as f64 })
            .collect()
    };
    let results: Vec<Result<Contour>> = times.par_iter().map(|&t| extract_level(field, level, t)).collect();
    let mut out = Vec::new();
    for r in results {
        match r {
            Ok(c) if !c.points.is_empty() => out.push(c),
            Ok(_) | Err(Error::EmptyLevel { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Draw pairs on the space-time level surface `{u = μ}` stratified in
/// `|s - t|` (by slice gap) and `|x - y|` (by target distance).
pub fn sample_sigma_pairs<R: Rng>(field: &dyn ScalarField, spec: &PairSampling, rng: &mut R) -> Result<Vec<SigmaPair>> {
    let contours = window_contours(field, spec.level, spec.window, spec.time_slices)?;
    let required = spec.count.div_ceil(2);
    if contours.is_empty() {
        return Err(Error::InsufficientSamples { found: 0, required });
    }
    let mut lo = Point::repeat(f64::INFINITY);
    let mut hi = Point::repeat(f64::NEG_INFINITY);
    for c in &contours {
        for p in &c.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    let h = field.spacing();
    let mut dmax = (hi - lo).norm().max(h);
    if let Some(m) = spec.max_separation {
        dmax = dmax.min(m);
    }
    let dmin = h.min(dmax);

    let nslices = contours.len();
    let mut pairs = Vec::with_capacity(spec.count);
    let attempts = 50 * spec.count.max(1);
    for _ in 0..attempts {
        if pairs.len() >= spec.count {
            break;
        }
        let a = rng.gen_range(0..nslices);
        let ca = &contours[a];
        let xa = ca.points[rng.gen_range(0..ca.points.len())];
        let px = SpaceTimePoint::new(xa, ca.t);
        if rng.gen::<f64>() < spec.diagonal_fraction {
            pairs.push(SigmaPair {
                x: px,
                y: px,
                level: spec.level,
                midpoint_admissible: true,
            });
            continue;
        }
        let gap = rng.gen_range(0..nslices);
        let b = match (a + gap < nslices, a >= gap) {
            (true, true) => {
                if rng.gen::<bool>() {
                    a + gap
                } else {
                    a - gap
                }
            }
            (true, false) => a + gap,
            (false, true) => a - gap,
            (false, false) => continue,
        };
        let cb = &contours[b];
        let target = rng.gen_range(dmin..=dmax);
        let yb = cb
            .points
            .iter()
            .copied()
            .min_by(|p, q| ((p - xa).norm() - target).abs().total_cmp(&((q - xa).norm() - target).abs()))
            .expect("non-empty contour");
        let pair = SigmaPair {
            x: px,
            y: SpaceTimePoint::new(yb, cb.t),
            level: spec.level,
            midpoint_admissible: true,
        };
        if let Some(m) = spec.max_separation {
            if pair.separation2() > m * m {
                continue;
            }
        }
        if pair.midpoints_admissible(field, &spec.exponents) {
            pairs.push(pair);
        }
    }
    if pairs.len() < required {
        return Err(Error::InsufficientSamples {
            found: pairs.len(),
            required,
        });
    }
    Ok(pairs)
}
