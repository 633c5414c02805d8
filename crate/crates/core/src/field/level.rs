use std::collections::HashMap;
use std::fmt::Write as _;

use super::sff::tangent_basis;
use super::{ScalarField, EPS_LS};
use crate::error::{Error, Result};
use crate::geometry::{Point, SpaceTimePoint};

const NEWTON_ITERS: usize = 30;

/// Spatial contour `{u(·, t) = μ}`.
#[derive(Clone, Debug, Default)]
pub struct Contour {
    pub level: f64,
    pub t: f64,
    /// Polished, admissible contour vertices.
    pub points: Vec<Point>,
    /// Raw marching-squares segments, for plotting.
    pub segments: Vec<[Point; 2]>,
}

/// A point of `{u = μ}` with its unit space-time normal and tangent frame.
#[derive(Clone, Debug)]
pub struct LevelSample {
    pub point: SpaceTimePoint,
    pub u: f64,
    pub normal: Vec<f64>,
    pub tangents: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default)]
pub struct LevelSetPatch {
    pub level: f64,
    pub samples: Vec<LevelSample>,
}

impl LevelSample {
    pub fn new(field: &dyn ScalarField, point: SpaceTimePoint) -> Result<Self> {
        let jet = field.jet(&point)?;
        let g = jet.st_gradient(field.dim());
        let norm = g.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateGradient { norm, threshold: 0.0 });
        }
        let e = tangent_basis(&g);
        Ok(LevelSample {
            point,
            u: jet.u,
            normal: (g / norm).iter().copied().collect(),
            tangents: e.column_iter().map(|c| c.iter().copied().collect()).collect(),
        })
    }
}

impl LevelSetPatch {
    /// Collect samples from contours, attaching frames.
    pub fn from_contours(field: &dyn ScalarField, level: f64, contours: &[Contour]) -> Result<Self> {
        let mut samples = Vec::new();
        for c in contours {
            for x in &c.points {
                samples.push(LevelSample::new(field, SpaceTimePoint::new(*x, c.t))?);
            }
        }
        Ok(LevelSetPatch { level, samples })
    }

    /// Columns: `x,y,t,u,nu_x,nu_y,nu_t` (`nu_y` empty for n = 1).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,t,u,nu_x,nu_y,nu_t\n");
        for s in &self.samples {
            let n = s.normal.len() - 1;
            let nu_y = if n == 2 { format!("{:.12e}", s.normal[1]) } else { String::new() };
            let _ = writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e}",
                s.point.x[0], s.point.x[1], s.point.t, s.u, s.normal[0], nu_y, s.normal[n]
            );
        }
        out
    }
}

/// Newton iteration along `Du` at fixed time until `|u - μ| ≤ ε_ls`.
pub fn polish_to_level(field: &dyn ScalarField, x0: &Point, t: f64, mu: f64) -> Result<Point> {
    let mut x = *x0;
    for _ in 0..NEWTON_ITERS {
        let jet = field.jet(&SpaceTimePoint::new(x, t))?;
        let r = jet.u - mu;
        if r.abs() <= EPS_LS {
            return Ok(x);
        }
        let g2 = jet.du.norm_squared();
        if !(g2 > 0.0) {
            return Err(Error::DegenerateGradient {
                norm: g2.sqrt(),
                threshold: 0.0,
            });
        }
        x -= jet.du * (r / g2);
    }
    let u = field.value(&SpaceTimePoint::new(x, t))?;
    if (u - mu).abs() <= EPS_LS {
        Ok(x)
    } else {
        Err(Error::EmptyLevel { level: mu, t })
    }
}

fn lerp(a: Point, b: Point, va: f64, vb: f64) -> Point {
    let s = va / (va - vb);
    a + (b - a) * s
}

/// Marching-squares contour of `u(·, t)` at level `μ`, with each vertex
/// polished onto the level. Vertices that cannot be polished inside the
/// admissible region are dropped.
pub fn extract_level(field: &dyn ScalarField, mu: f64, t: f64) -> Result<Contour> {
    let (lo, hi) = field.time_window();
    if !(t >= lo && t <= hi * (1.0 + 1e-12)) {
        return Err(Error::OutOfDomain { x: [f64::NAN, f64::NAN], t });
    }
    let t = t.min(hi);
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::EmptyLevel { level: mu, t });
    }
    let lat = field.sampling_lattice();
    let mut vals = vec![0.0; lat.nx * lat.ny];
    for j in 0..lat.ny {
        for i in 0..lat.nx {
            vals[j * lat.nx + i] = field.extended_value(&SpaceTimePoint::new(lat.point(i, j), t)) - mu;
        }
    }
    let v = |i: usize, j: usize| vals[j * lat.nx + i];
    let mut raw: Vec<Point> = Vec::new();
    let mut segments = Vec::new();

    if lat.ny == 1 {
        for i in 0..lat.nx - 1 {
            let (a, b) = (v(i, 0), v(i + 1, 0));
            if a.is_finite() && b.is_finite() && (a >= 0.0) != (b >= 0.0) {
                raw.push(lerp(lat.point(i, 0), lat.point(i + 1, 0), a, b));
            }
        }
    } else {
        let mut edge_point: HashMap<(u8, usize, usize), usize> = HashMap::new();
        let mut crossing = |key: (u8, usize, usize), pa: Point, pb: Point, va: f64, vb: f64, raw: &mut Vec<Point>| {
            *edge_point.entry(key).or_insert_with(|| {
                raw.push(lerp(pa, pb, va, vb));
                raw.len() - 1
            })
        };
        for j in 0..lat.ny - 1 {
            for i in 0..lat.nx - 1 {
                let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
                if c.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let pos = [lat.point(i, j), lat.point(i + 1, j), lat.point(i + 1, j + 1), lat.point(i, j + 1)];
                let keys = [(0u8, i, j), (1u8, i + 1, j), (0u8, i, j + 1), (1u8, i, j)];
                let mut hits: Vec<usize> = Vec::with_capacity(4);
                for e in 0..4 {
                    let (a, b) = (e, (e + 1) % 4);
                    if (c[a] >= 0.0) != (c[b] >= 0.0) {
                        hits.push(crossing(keys[e], pos[a], pos[b], c[a], c[b], &mut raw));
                    }
                }
                match hits.len() {
                    2 => segments.push([raw[hits[0]], raw[hits[1]]]),
                    4 => {
                        let centre = 0.25 * c.iter().sum::<f64>();
                        // Edges are ordered bottom, right, top, left.
                        if (centre >= 0.0) == (c[0] >= 0.0) {
                            segments.push([raw[hits[0]], raw[hits[1]]]);
                            segments.push([raw[hits[2]], raw[hits[3]]]);
                        } else {
                            segments.push([raw[hits[3]], raw[hits[0]]]);
                            segments.push([raw[hits[1]], raw[hits[2]]]);
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::EmptyLevel { level: mu, t });
    }
    let mut points = Vec::with_capacity(raw.len());
    for x in &raw {
        if let Ok(p) = polish_to_level(field, x, t, mu) {
            points.push(p);
        }
    }
    Ok(Contour {
        level: mu,
        t,
        points,
        segments,
    })
}
