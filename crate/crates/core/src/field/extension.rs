//! Smooth extension of nodal values across the Dirichlet boundaries.
//!
//! A non-fluid node near the ring gets a ghost value from quadratic
//! extrapolation along grid lines: the boundary crossing (carrying the
//! Dirichlet value) and two fluid nodes. Estimates from several directions
//! are blended with weights favouring low amplification.

use crate::solver::{BoundaryValues, NodeClassification, Side, DIRECTIONS};

/// Maximum number of lattice steps from a ghost node to the first fluid node.
pub const GHOST_REACH: i64 = 6;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, Default)]
struct Ghost {
    constant: f64,
    terms: Vec<(u32, f64)>,
}

/// Ghost values as affine combinations of fluid values, per lattice node.
#[derive(Clone, Debug, Default)]
pub struct Extension {
    slot: Vec<u32>,
    ghosts: Vec<Ghost>,
}

#[derive(Clone, Copy)]
struct Candidate {
    reach: i64,
    weight: f64,
    constant: f64,
    terms: [(u32, f64); 2],
}

fn lagrange_at_zero(x: [f64; 3]) -> [f64; 3] {
    [
        x[1] * x[2] / ((x[0] - x[1]) * (x[0] - x[2])),
        x[0] * x[2] / ((x[1] - x[0]) * (x[1] - x[2])),
        x[0] * x[1] / ((x[2] - x[0]) * (x[2] - x[1])),
    ]
}

impl Extension {
    pub fn build(cls: &NodeClassification, bc: BoundaryValues) -> Self {
        let lattice = *cls.lattice();
        let mut slot = vec![NONE; lattice.len()];
        let mut ghosts = Vec::new();
        let ndir = cls.active_directions();
        let mut cands: Vec<Candidate> = Vec::with_capacity(4);
        for idx in 0..lattice.len() {
            if cls.fluid_index(lattice.coords(idx).0, lattice.coords(idx).1).is_some() {
                continue;
            }
            let (i, j) = lattice.coords(idx);
            cands.clear();
            for (d, &(di, dj)) in DIRECTIONS.iter().enumerate().take(ndir) {
                let Some((m, f1)) = (1..=GHOST_REACH)
                    .find_map(|m| cls.fluid_index(i + m * di, j + m * dj).map(|f| (m, f)))
                else {
                    continue;
                };
                let back = cls.arms(f1)[d ^ 1];
                let Some(side) = back.cut else { continue };
                if cls.arms(f1)[d].cut.is_some() {
                    continue;
                }
                let f2 = cls
                    .fluid_index(i + (m + 1) * di, j + (m + 1) * dj)
                    .expect("uncut arm ends on a fluid node");
                let f3 = (cls.arms(f2)[d].cut.is_none())
                    .then(|| cls.fluid_index(i + (m + 2) * di, j + (m + 2) * dj))
                    .flatten();
                let b = m as f64 - back.theta;
                let g = match side {
                    Side::Inner => bc.inner,
                    Side::Outer => bc.outer,
                };
                let (x, nodes) = match f3 {
                    Some(f3) if back.theta < 0.5 => ([b, (m + 1) as f64, (m + 2) as f64], [f2, f3]),
                    _ => ([b, m as f64, (m + 1) as f64], [f1, f2]),
                };
                let l = lagrange_at_zero(x);
                let amp = l[0].abs() + l[1].abs() + l[2].abs();
                cands.push(Candidate {
                    reach: m,
                    weight: 1.0 / (amp * amp),
                    constant: l[0] * g,
                    terms: [(nodes[0] as u32, l[1]), (nodes[1] as u32, l[2])],
                });
            }
            let Some(min_reach) = cands.iter().map(|c| c.reach).min() else {
                continue;
            };
            let keep: Vec<&Candidate> = cands.iter().filter(|c| c.reach <= min_reach + 1).collect();
            let total: f64 = keep.iter().map(|c| c.weight).sum();
            let mut ghost = Ghost::default();
            for c in keep {
                let s = c.weight / total;
                ghost.constant += s * c.constant;
                for &(f, w) in &c.terms {
                    match ghost.terms.iter_mut().find(|(g, _)| *g == f) {
                        Some(e) => e.1 += s * w,
                        None => ghost.terms.push((f, s * w)),
                    }
                }
            }
            slot[idx] = ghosts.len() as u32;
            ghosts.push(ghost);
        }
        Extension { slot, ghosts }
    }

    /// Ghost value at lattice index `idx` for the fluid values `u`.
    #[inline]
    pub fn value(&self, idx: usize, u: &[f64]) -> Option<f64> {
        let s = *self.slot.get(idx)?;
        if s == NONE {
            return None;
        }
        let g = &self.ghosts[s as usize];
        Some(g.constant + g.terms.iter().map(|&(f, w)| w * u[f as usize]).sum::<f64>())
    }

    pub fn has_ghost(&self, idx: usize) -> bool {
        self.slot.get(idx).is_some_and(|&s| s != NONE)
    }

    pub fn ghost_count(&self) -> usize {
        self.ghosts.len()
    }
}
