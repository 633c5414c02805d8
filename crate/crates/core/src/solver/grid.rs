use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Location, Point, RingDomain};

/// Arms shorter than this fraction of `h` in every direction make a node degenerate.
pub const THETA_MIN: f64 = 1e-3;

/// Extra node layers kept outside `Ω̄₀` so interpolation stencils stay inside the box.
const BOX_MARGIN_LAYERS: i64 = 6;

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    BackwardEuler,
    CrankNicolson,
}

fn default_lin_tol() -> f64 {
    1e-10
}

fn default_stride() -> usize {
    1
}

/// Discretisation parameters. The node lattice is `{(i h, j h)}` clipped to a
/// box covering `Ω̄₀`, so halving `h` produces a nested lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_lin_tol")]
    pub lin_tol: f64,
    /// Store every `snapshot_every`-th time step.
    #[serde(default = "default_stride")]
    pub snapshot_every: usize,
}

impl GridSpec {
    pub fn new(h: f64, dt: f64, t_final: f64) -> Self {
        GridSpec {
            h,
            dt,
            t_final,
            scheme: Scheme::BackwardEuler,
            lin_tol: default_lin_tol(),
            snapshot_every: 1,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_snapshot_every(mut self, stride: usize) -> Self {
        self.snapshot_every = stride;
        self
    }

    /// Number of time steps to reach `t_final`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Spacing of the stored snapshots.
    pub fn snapshot_dt(&self) -> f64 {
        self.dt * self.snapshot_every as f64
    }

    /// Start of the verification window, `max(10 Δτ, 0.01 T)`.
    pub fn t_min(&self) -> f64 {
        (10.0 * self.snapshot_dt()).max(0.01 * self.t_final)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGrid(m));
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("spacing h = {} must be positive", self.h));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("time step {} must be positive", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return bad(format!("horizon {} must be at least one step", self.t_final));
        }
        if !(self.lin_tol.is_finite() && self.lin_tol > 0.0) {
            return bad("linear tolerance must be positive".into());
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        let steps = self.steps();
        if ((steps as f64) * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return bad(format!("horizon {} is not a multiple of dt {}", self.t_final, self.dt));
        }
        if !steps.is_multiple_of(self.snapshot_every) {
            return bad(format!("{steps} steps are not a multiple of snapshot_every"));
        }
        if steps / self.snapshot_every < 6 {
            return bad("at least six stored snapshot intervals are required".into());
        }
        if self.scheme == Scheme::CrankNicolson && self.dt > self.h {
            return bad(format!(
                "Crank-Nicolson requires dt <= h (dt = {}, h = {})",
                self.dt, self.h
            ));
        }
        Ok(())
    }
}

/// Rectangular block of lattice nodes `(i h, j h)`, `lo ≤ (i, j) ≤ hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl Lattice {
    pub fn covering(ring: &RingDomain, h: f64) -> Result<Self> {
        let reach = (ring.outer().bounding_radius() / h).ceil() as i64 + BOX_MARGIN_LAYERS;
        if reach > 1 << 14 {
            return Err(Error::InvalidGrid(format!("h = {h} gives too many nodes")));
        }
        Ok(if ring.dim() == 1 {
            Lattice {
                lo: [-reach, 0],
                hi: [reach, 0],
            }
        } else {
            Lattice {
                lo: [-reach, -reach],
                hi: [reach, reach],
            }
        })
    }

    pub fn nx(&self) -> usize {
        (self.hi[0] - self.lo[0] + 1) as usize
    }

    pub fn ny(&self) -> usize {
        (self.hi[1] - self.lo[1] + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        i >= self.lo[0] && i <= self.hi[0] && j >= self.lo[1] && j <= self.hi[1]
    }

    /// Row-major index (`j` outer, `i` inner).
    pub fn index(&self, i: i64, j: i64) -> usize {
        debug_assert!(self.contains(i, j));
        (j - self.lo[1]) as usize * self.nx() + (i - self.lo[0]) as usize
    }

    pub fn coords(&self, idx: usize) -> (i64, i64) {
        let nx = self.nx();
        ((idx % nx) as i64 + self.lo[0], (idx / nx) as i64 + self.lo[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Fluid,
    /// In `Ω̄₁` (including the boundary band).
    InnerDirichlet,
    /// Outside `Ω₀` or on `∂Ω₀`.
    OuterDirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Inner,
    Outer,
}

/// One arm of the Shortley-Weller stencil.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    /// Fractional length in `(0, 1]`.
    pub theta: f64,
    /// `Some` when the arm ends on a boundary rather than a fluid node.
    pub cut: Option<Side>,
}

/// Arm directions, in the order +x, −x, +y, −y.
pub const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Per-node classification and Shortley-Weller arm data.
#[derive(Clone, Debug)]
pub struct NodeClassification {
    h: f64,
    dim: usize,
    lattice: Lattice,
    kinds: Vec<NodeKind>,
    fluid_of: Vec<u32>,
    fluid: Vec<usize>,
    arms: Vec<[Arm; 4]>,
}

const NOT_FLUID: u32 = u32::MAX;

impl NodeClassification {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kind(&self, i: i64, j: i64) -> NodeKind {
        if !self.lattice.contains(i, j) {
            return NodeKind::OuterDirichlet;
        }
        self.kinds[self.lattice.index(i, j)]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn fluid_count(&self) -> usize {
        self.fluid.len()
    }

    /// Lattice index of each fluid node.
    pub fn fluid_nodes(&self) -> &[usize] {
        &self.fluid
    }

    /// Fluid index of lattice node `(i, j)`, if it is a fluid node.
    pub fn fluid_index(&self, i: i64, j: i64) -> Option<usize> {
        if !self.lattice.contains(i, j) {
            return None;
        }
        let f = self.fluid_of[self.lattice.index(i, j)];
        (f != NOT_FLUID).then_some(f as usize)
    }

    pub fn arms(&self, fluid: usize) -> &[Arm; 4] {
        &self.arms[fluid]
    }

    pub fn position(&self, i: i64, j: i64) -> Point {
        Point::new(i as f64 * self.h, j as f64 * self.h)
    }

    /// Spatial position of the `fluid`-th fluid node.
    pub fn fluid_position(&self, fluid: usize) -> Point {
        let (i, j) = self.lattice.coords(self.fluid[fluid]);
        self.position(i, j)
    }

    pub fn active_directions(&self) -> usize {
        2 * self.dim
    }
}

fn node_kind(ring: &RingDomain, x: &Point) -> NodeKind {
    match ring.inner().contains(x) {
        Location::Inside | Location::BoundaryBand => NodeKind::InnerDirichlet,
        Location::Outside => match ring.outer().contains(x) {
            Location::Inside => NodeKind::Fluid,
            _ => NodeKind::OuterDirichlet,
        },
    }
}

/// Classify every lattice node and compute fractional arms toward cut boundaries.
pub fn classify_nodes(ring: &RingDomain, grid: &GridSpec) -> Result<NodeClassification> {
    grid.validate()?;
    let h = grid.h;
    let dim = ring.dim();
    let lattice = Lattice::covering(ring, h)?;
    let pos = |i: i64, j: i64| Point::new(i as f64 * h, j as f64 * h);

    let mut kinds = Vec::with_capacity(lattice.len());
    for j in lattice.lo[1]..=lattice.hi[1] {
        for i in lattice.lo[0]..=lattice.hi[0] {
            kinds.push(node_kind(ring, &pos(i, j)));
        }
    }
    let mut fluid_of = vec![NOT_FLUID; lattice.len()];
    let mut fluid = Vec::new();
    for (idx, k) in kinds.iter().enumerate() {
        if *k == NodeKind::Fluid {
            fluid_of[idx] = fluid.len() as u32;
            fluid.push(idx);
        }
    }

    let ndir = 2 * dim;
    let mut arms = Vec::with_capacity(fluid.len());
    for &idx in &fluid {
        let (i, j) = lattice.coords(idx);
        let p = pos(i, j);
        let mut node_arms = [Arm { theta: 1.0, cut: None }; 4];
        for (d, &(di, dj)) in DIRECTIONS.iter().enumerate().take(ndir) {
            let (ni, nj) = (i + di, j + dj);
            let nkind = if lattice.contains(ni, nj) {
                kinds[lattice.index(ni, nj)]
            } else {
                NodeKind::OuterDirichlet
            };
            node_arms[d] = match nkind {
                NodeKind::Fluid => Arm { theta: 1.0, cut: None },
                NodeKind::InnerDirichlet => {
                    let q = pos(ni, nj);
                    let s = ring.inner().crossing(&p, &q, 1e-12).unwrap_or(1.0);
                    Arm {
                        theta: s.max(f64::MIN_POSITIVE),
                        cut: Some(Side::Inner),
                    }
                }
                NodeKind::OuterDirichlet => {
                    let q = pos(ni, nj);
                    let s = ring.outer().crossing(&p, &q, 1e-12).unwrap_or(1.0);
                    Arm {
                        theta: s.max(f64::MIN_POSITIVE),
                        cut: Some(Side::Outer),
                    }
                }
            };
        }
        let degenerate = node_arms[..ndir]
            .iter()
            .all(|a| a.cut.is_some() && a.theta < THETA_MIN);
        if degenerate {
            return Err(Error::DegenerateGrid {
                node: [i, j],
                theta_min: THETA_MIN,
            });
        }
        arms.push(node_arms);
    }

    Ok(NodeClassification {
        h,
        dim,
        lattice,
        kinds,
        fluid_of,
        fluid,
        arms,
    })
}
