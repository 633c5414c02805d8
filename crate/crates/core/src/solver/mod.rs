//! Implicit finite-difference solution of the Dirichlet problem
//! `u_t = Δu` on `Ω × (0, T]`, `u = 1` on `Ω̄₁`, `u = 0` on `∂Ω₀`.
//!
//! The Laplacian uses Shortley-Weller fractional arms at cut cells. The
//! implicit systems are M-matrices and are relaxed by symmetric
//! Gauss-Seidel sweeps started from the previous snapshot. For backward
//! Euler with zero initial data the previous snapshot is a subsolution, so
//! every sweep increases the iterate monotonically toward the exact discrete
//! solution: positivity, the upper bound and time monotonicity hold for the
//! iterates themselves, not only in the limit.

mod grid;

pub use grid::{classify_nodes, Arm, GridSpec, Lattice, NodeClassification, NodeKind, Scheme, Side, DIRECTIONS, THETA_MIN};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, RingDomain};

/// Iteration cap for one implicit time step.
pub const MAX_SWEEPS: usize = 20_000;

/// Dirichlet values on the two boundary components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValues {
    pub inner: f64,
    pub outer: f64,
}

impl Default for BoundaryValues {
    fn default() -> Self {
        BoundaryValues { inner: 1.0, outer: 0.0 }
    }
}

/// Discrete Laplacian on fluid nodes:
/// `(L u)_i = Σ_j c_ij u_j + s_i - d_i u_i`.
#[derive(Clone, Debug)]
pub(crate) struct Operator {
    pub diag: Vec<f64>,
    pub nbr: Vec<[(u32, f64); 4]>,
    pub source: Vec<f64>,
}

impl Operator {
    fn assemble(cls: &NodeClassification, bc: BoundaryValues) -> Self {
        let h2 = cls.h() * cls.h();
        let n = cls.fluid_count();
        let mut diag = vec![0.0; n];
        let mut nbr = vec![[(0_u32, 0.0_f64); 4]; n];
        let mut source = vec![0.0; n];
        let lattice = cls.lattice();
        for f in 0..n {
            let (i, j) = lattice.coords(cls.fluid_nodes()[f]);
            let arms = cls.arms(f);
            for axis in 0..cls.dim() {
                let (pa, ma) = (2 * axis, 2 * axis + 1);
                let (tp, tm) = (arms[pa].theta, arms[ma].theta);
                let cp = 2.0 / (tp * (tp + tm) * h2);
                let cm = 2.0 / (tm * (tp + tm) * h2);
                diag[f] += cp + cm;
                for (d, c) in [(pa, cp), (ma, cm)] {
                    match arms[d].cut {
                        None => {
                            let (di, dj) = DIRECTIONS[d];
                            let g = cls.fluid_index(i + di, j + dj).expect("uncut arm ends on a fluid node");
                            nbr[f][d] = (g as u32, c);
                        }
                        Some(Side::Inner) => source[f] += c * bc.inner,
                        Some(Side::Outer) => source[f] += c * bc.outer,
                    }
                }
            }
        }
        Operator { diag, nbr, source }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for f in 0..u.len() {
            let mut acc = self.source[f] - self.diag[f] * u[f];
            for &(g, c) in &self.nbr[f] {
                acc += c * u[g as usize];
            }
            out[f] = acc;
        }
    }
}

/// Symmetric Gauss-Seidel for `(1 + a d_i) x_i - a Σ c_ij x_j = b_i`.
struct Relaxation<'a> {
    op: &'a Operator,
    a: f64,
    inv_diag: Vec<f64>,
}

impl<'a> Relaxation<'a> {
    fn new(op: &'a Operator, a: f64) -> Self {
        let inv_diag = op.diag.iter().map(|d| 1.0 / (1.0 + a * d)).collect();
        Relaxation { op, a, inv_diag }
    }

    #[inline]
    fn update(&self, x: &mut [f64], b: &[f64], f: usize) {
        let mut acc = b[f];
        for &(g, c) in &self.op.nbr[f] {
            acc += self.a * c * x[g as usize];
        }
        x[f] = acc * self.inv_diag[f];
    }

    fn sweep(&self, x: &mut [f64], b: &[f64]) {
        for f in 0..x.len() {
            self.update(x, b, f);
        }
        for f in (0..x.len()).rev() {
            self.update(x, b, f);
        }
    }

    fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for f in 0..x.len() {
            let mut r = b[f] - x[f] / self.inv_diag[f];
            for &(g, c) in &self.op.nbr[f] {
                r += self.a * c * x[g as usize];
            }
            acc += r * r;
        }
        acc.sqrt()
    }

    fn solve(&self, x: &mut [f64], b: &[f64], tol: f64, step: usize) -> Result<usize> {
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut res = self.residual_norm(x, b);
        if res <= tol * bnorm {
            return Ok(0);
        }
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            self.sweep(x, b);
            self.sweep(x, b);
            sweeps += 2;
            res = self.residual_norm(x, b);
            if res <= tol * bnorm {
                return Ok(sweeps);
            }
        }
        Err(Error::LinearSolveFailure {
            step,
            iterations: sweeps,
            residual: res / bnorm,
            tol,
        })
    }
}

/// Bookkeeping collected while stepping.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub steps: usize,
    pub total_sweeps: usize,
    pub max_sweeps: usize,
}

/// Discrete solution: fluid-node values at the stored snapshot times
/// `τ_k = k · snapshot_dt`, `k = 0..=K`.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    pub(crate) ring: RingDomain,
    pub(crate) grid: GridSpec,
    pub(crate) cls: Arc<NodeClassification>,
    pub(crate) boundary: BoundaryValues,
    pub(crate) snapshots: Vec<Vec<f64>>,
    pub(crate) exploratory: bool,
    pub(crate) warnings: Vec<String>,
    pub(crate) stats: SolveStats,
    pub(crate) extension: crate::field::Extension,
}

impl SpaceTimeField {
    pub(crate) fn from_parts(
        ring: RingDomain,
        grid: GridSpec,
        cls: Arc<NodeClassification>,
        boundary: BoundaryValues,
        snapshots: Vec<Vec<f64>>,
        exploratory: bool,
    ) -> Self {
        let extension = crate::field::Extension::build(&cls, boundary);
        SpaceTimeField {
            ring,
            grid,
            cls,
            boundary,
            snapshots,
            exploratory,
            warnings: Vec::new(),
            stats: SolveStats::default(),
            extension,
        }
    }

    pub fn ring(&self) -> &RingDomain {
        &self.ring
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn classification(&self) -> &NodeClassification {
        &self.cls
    }

    pub fn boundary_values(&self) -> BoundaryValues {
        self.boundary
    }

    /// `true` when the run used nonzero initial data.
    pub fn is_exploratory(&self) -> bool {
        self.exploratory
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }

    pub fn snapshot_dt(&self) -> f64 {
        self.grid.snapshot_dt()
    }

    pub fn snapshot_time(&self, k: usize) -> f64 {
        k as f64 * self.snapshot_dt()
    }

    /// Fluid-node values of snapshot `k`.
    pub fn snapshot(&self, k: usize) -> &[f64] {
        &self.snapshots[k]
    }

    /// Value at lattice node `(i, j)` of snapshot `k`, with Dirichlet data
    /// on non-fluid nodes.
    pub fn node_value(&self, i: i64, j: i64, k: usize) -> f64 {
        match self.cls.fluid_index(i, j) {
            Some(f) => self.snapshots[k][f],
            None => match self.cls.kind(i, j) {
                NodeKind::InnerDirichlet => self.boundary.inner,
                _ => self.boundary.outer,
            },
        }
    }

    /// Start of the verification window.
    pub fn t_min(&self) -> f64 {
        self.grid.t_min()
    }
}

/// Solve with the default boundary data (1 on `Ω̄₁`, 0 on `∂Ω₀`).
pub fn solve_heat(
    ring: &RingDomain,
    grid: &GridSpec,
    initial: Option<&(dyn Fn(&Point) -> f64 + Sync)>,
) -> Result<SpaceTimeField> {
    solve_heat_with(ring, grid, initial, BoundaryValues::default())
}

pub fn solve_heat_with(
    ring: &RingDomain,
    grid: &GridSpec,
    initial: Option<&(dyn Fn(&Point) -> f64 + Sync)>,
    boundary: BoundaryValues,
) -> Result<SpaceTimeField> {
    let cls = Arc::new(classify_nodes(ring, grid)?);
    let op = Operator::assemble(&cls, boundary);
    let n = cls.fluid_count();

    let mut warnings = Vec::new();
    let mut u = vec![0.0; n];
    let mut exploratory = false;
    if let Some(init) = initial {
        for (f, slot) in u.iter_mut().enumerate() {
            let v = init(&cls.fluid_position(f));
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidArgument(format!(
                    "initial value {v} at fluid node {f} is outside [0, 1]"
                )));
            }
            *slot = v;
        }
        exploratory = u.iter().any(|&v| v != 0.0);
        let mismatch = |pts: &[Point], target: f64| {
            pts.iter().map(|p| (init(p) - target).abs()).fold(0.0, f64::max)
        };
        let di = mismatch(ring.inner().boundary_samples(), boundary.inner);
        let do_ = mismatch(ring.outer().boundary_samples(), boundary.outer);
        if exploratory && (di > 1e-6 || do_ > 1e-6) {
            warnings.push(format!(
                "initial data does not match boundary values (inner mismatch {di:.3e}, outer mismatch {do_:.3e})"
            ));
        }
    }

    let steps = grid.steps();
    let stride = grid.snapshot_every;
    let mut snapshots = Vec::with_capacity(steps / stride + 1);
    snapshots.push(u.clone());

    let (a, explicit) = match grid.scheme {
        Scheme::BackwardEuler => (grid.dt, 0.0),
        Scheme::CrankNicolson => (0.5 * grid.dt, 0.5 * grid.dt),
    };
    let relax = Relaxation::new(&op, a);
    let mut b = vec![0.0; n];
    let mut lu = vec![0.0; n];
    let mut stats = SolveStats::default();
    for step in 1..=steps {
        match grid.scheme {
            Scheme::BackwardEuler => {
                for f in 0..n {
                    b[f] = u[f] + grid.dt * op.source[f];
                }
            }
            Scheme::CrankNicolson => {
                op.apply(&u, &mut lu);
                for f in 0..n {
                    // (I + a L) u^k with the boundary source counted once per half step.
                    b[f] = u[f] + explicit * lu[f] + a * op.source[f];
                }
            }
        }
        let sweeps = relax.solve(&mut u, &b, grid.lin_tol, step)?;
        stats.steps = step;
        stats.total_sweeps += sweeps;
        stats.max_sweeps = stats.max_sweeps.max(sweeps);
        if step % stride == 0 {
            snapshots.push(u.clone());
        }
    }

    let mut field = SpaceTimeField::from_parts(ring.clone(), grid.clone(), cls, boundary, snapshots, exploratory);
    field.warnings = warnings;
    field.stats = stats;
    Ok(field)
}

/// Nodewise extremes of a solved field, used by the maximum-principle checks.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct DiscreteBounds {
    pub min_value: f64,
    pub max_value: f64,
    /// Most negative `u(τ_{k+1}) - u(τ_k)` over nodes and snapshots.
    pub min_increment: f64,
    /// Nodes × snapshots inspected.
    pub inspected: usize,
}

impl SpaceTimeField {
    /// Nodewise bounds over snapshots with `τ_k ≥ t_from`.
    pub fn discrete_bounds(&self, t_from: f64) -> DiscreteBounds {
        let mut out = DiscreteBounds {
            min_value: f64::INFINITY,
            max_value: f64::NEG_INFINITY,
            min_increment: f64::INFINITY,
            inspected: 0,
        };
        for k in 0..self.snapshots.len() {
            if self.snapshot_time(k) < t_from {
                continue;
            }
            for (f, &v) in self.snapshots[k].iter().enumerate() {
                out.min_value = out.min_value.min(v);
                out.max_value = out.max_value.max(v);
                if k + 1 < self.snapshots.len() {
                    out.min_increment = out.min_increment.min(self.snapshots[k + 1][f] - v);
                }
                out.inspected += 1;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ring, ConvexBody};

    fn disks() -> RingDomain {
        make_ring(
            ConvexBody::disk([0.0, 0.0], 1.0).unwrap(),
            ConvexBody::disk([0.0, 0.0], 0.3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn operator_rows_sum_to_zero() {
        let cls = classify_nodes(&disks(), &GridSpec::new(0.05, 0.01, 0.1)).unwrap();
        let op = Operator::assemble(&cls, BoundaryValues { inner: 1.0, outer: 1.0 });
        let ones = vec![1.0; cls.fluid_count()];
        let mut out = vec![0.0; ones.len()];
        op.apply(&ones, &mut out);
        let worst = out.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8 * op.diag.iter().cloned().fold(0.0, f64::max), "{worst}");
    }

    #[test]
    fn shortley_weller_is_exact_on_quadratics() {
        let ring = disks();
        let cls = classify_nodes(&ring, &GridSpec::new(0.05, 0.01, 0.1)).unwrap();
        // q(x, y) = x² + 2y² has Laplacian 6; boundary values taken from q itself.
        let q = |p: &Point| p[0] * p[0] + 2.0 * p[1] * p[1];
        let h2 = cls.h() * cls.h();
        for f in 0..cls.fluid_count() {
            let p = cls.fluid_position(f);
            let arms = cls.arms(f);
            let mut lap = 0.0;
            for axis in 0..2 {
                let (tp, tm) = (arms[2 * axis].theta, arms[2 * axis + 1].theta);
                let dir = if axis == 0 { Point::new(1.0, 0.0) } else { Point::new(0.0, 1.0) };
                let up = q(&(p + dir * (tp * cls.h())));
                let um = q(&(p - dir * (tm * cls.h())));
                lap += 2.0 / h2 * (up / (tp * (tp + tm)) + um / (tm * (tp + tm)) - q(&p) / (tp * tm));
            }
            assert!((lap - 6.0).abs() < 1e-6 * (1.0 + 1.0 / h2), "node {f}: {lap}");
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let f = solve_heat_with(
            &disks(),
            &GridSpec::new(0.05, 0.01, 0.1),
            None,
            BoundaryValues { inner: 0.0, outer: 0.0 },
        )
        .unwrap();
        for k in 0..f.snapshot_count() {
            assert!(f.snapshot(k).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn maximum_principle_and_monotonicity() {
        let f = solve_heat(&disks(), &GridSpec::new(0.05, 0.005, 0.2), None).unwrap();
        let b = f.discrete_bounds(f.snapshot_dt());
        assert!(b.min_value > 0.0, "{b:?}");
        assert!(b.max_value < 1.0, "{b:?}");
        assert!(b.min_increment >= 0.0, "{b:?}");
    }

    #[test]
    fn larger_inner_body_dominates() {
        let grid = GridSpec::new(0.05, 0.01, 0.2);
        let small = solve_heat(&disks(), &grid, None).unwrap();
        let big_ring = make_ring(
            ConvexBody::disk([0.0, 0.0], 1.0).unwrap(),
            ConvexBody::disk([0.0, 0.0], 0.6).unwrap(),
        )
        .unwrap();
        let big = solve_heat(&big_ring, &grid, None).unwrap();
        let k = small.snapshot_count() - 1;
        let cls = small.classification();
        for f in 0..cls.fluid_count() {
            let (i, j) = cls.lattice().coords(cls.fluid_nodes()[f]);
            assert!(big.node_value(i, j, k) >= small.snapshot(k)[f] - 1e-12);
        }
    }

    #[test]
    fn crank_nicolson_runs() {
        let grid = GridSpec::new(0.05, 0.01, 0.2).with_scheme(Scheme::CrankNicolson);
        let f = solve_heat(&disks(), &grid, None).unwrap();
        let last = f.snapshot(f.snapshot_count() - 1);
        assert!(last.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn nonzero_initial_data_is_exploratory() {
        let init = |p: &Point| (0.5 * (1.0 - p.norm())).clamp(0.0, 1.0);
        let f = solve_heat(&disks(), &GridSpec::new(0.05, 0.01, 0.1), Some(&init)).unwrap();
        assert!(f.is_exploratory());
        assert!(!f.warnings().is_empty());
        let bad = |_: &Point| 2.0;
        assert!(solve_heat(&disks(), &GridSpec::new(0.05, 0.01, 0.1), Some(&bad)).is_err());
    }
}
