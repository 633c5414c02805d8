use nalgebra::Matrix2;

use super::spline::{time_weights, AxisWeights};
use super::{Exclusion, Jet, SamplingLattice, ScalarField, ADMISSIBLE_CLEARANCE};
use crate::error::{Error, Result};
use crate::geometry::{Location, Point, SpaceTimePoint};
use crate::solver::{NodeKind, SpaceTimeField};

/// How a stencil node is resolved.
#[derive(Clone, Copy)]
enum Nodal {
    Fluid(usize),
    Ghost(usize),
    Fixed(f64),
}

impl SpaceTimeField {
    fn last_snapshot(&self) -> usize {
        self.snapshots.len() - 1
    }

    fn horizon(&self) -> f64 {
        self.last_snapshot() as f64 * self.snapshot_dt()
    }

    fn axes(&self, x: &Point) -> (AxisWeights, AxisWeights) {
        let h = self.cls.h();
        let ax = AxisWeights::cubic(x[0], h, None);
        let ay = if self.cls.dim() == 1 {
            AxisWeights::trivial()
        } else {
            AxisWeights::cubic(x[1], h, None)
        };
        (ax, ay)
    }

    fn resolve(&self, i: i64, j: i64, strict: bool) -> Option<Nodal> {
        let lattice = self.cls.lattice();
        if let Some(f) = self.cls.fluid_index(i, j) {
            return Some(Nodal::Fluid(f));
        }
        if lattice.contains(i, j) {
            let idx = lattice.index(i, j);
            if self.extension.has_ghost(idx) {
                return Some(Nodal::Ghost(idx));
            }
        }
        if strict {
            return None;
        }
        Some(Nodal::Fixed(match self.cls.kind(i, j) {
            NodeKind::InnerDirichlet => self.boundary.inner,
            _ => self.boundary.outer,
        }))
    }

    #[inline]
    fn nodal_value(&self, n: Nodal, k: usize) -> f64 {
        match n {
            Nodal::Fluid(f) => self.snapshots[k][f],
            Nodal::Ghost(idx) => self.extension.value(idx, &self.snapshots[k]).unwrap_or(f64::NAN),
            Nodal::Fixed(v) => v,
        }
    }

    fn stencil_valid(&self, x: &Point) -> bool {
        let (ax, ay) = self.axes(x);
        let ok = ay
            .nodes()
            .all(|(_, j)| ax.nodes().all(|(_, i)| self.resolve(i, j, true).is_some()));
        ok
    }

    /// Tensor-product contraction; `derivs` selects how many time and space
    /// derivative weights are needed (0 = value only).
    fn contract(&self, p: &SpaceTimePoint, strict: bool, derivs: bool) -> Option<Jet> {
        let (ax, ay) = self.axes(&p.x);
        let tw = time_weights(p.t, self.snapshot_dt(), self.last_snapshot());
        let nt = if derivs { 3 } else { 1 };
        let ns = if derivs { 3 } else { 1 };
        let mut s = [[[0.0_f64; 3]; 3]; 3]; // [time deriv][x deriv][y deriv]
        for (b, j) in ay.nodes() {
            for (a, i) in ax.nodes() {
                let node = self.resolve(i, j, strict)?;
                let mut tc = [0.0; 3];
                for (c, k) in tw.nodes() {
                    let w0 = tw.w[0][c];
                    if w0 == 0.0 && (!derivs || (tw.w[1][c] == 0.0 && tw.w[2][c] == 0.0)) {
                        continue;
                    }
                    let v = self.nodal_value(node, k as usize);
                    for (d, slot) in tc.iter_mut().enumerate().take(nt) {
                        *slot += tw.w[d][c] * v;
                    }
                }
                for (dt, &tv) in tc.iter().enumerate().take(nt) {
                    for dx in 0..ns {
                        let wx = ax.w[dx][a];
                        for dy in 0..ns - dx {
                            if dt + dx + dy > 2 {
                                continue;
                            }
                            s[dt][dx][dy] += wx * ay.w[dy][b] * tv;
                        }
                    }
                }
            }
        }
        let mut jet = Jet {
            u: s[0][0][0],
            ..Jet::default()
        };
        if derivs {
            jet.du = Point::new(s[0][1][0], s[0][0][1]);
            jet.d2u = Matrix2::new(s[0][2][0], s[0][1][1], s[0][1][1], s[0][0][2]);
            jet.ut = s[1][0][0];
            jet.utt = s[2][0][0];
            jet.dut = Point::new(s[1][1][0], s[1][0][1]);
        }
        Some(jet)
    }
}

impl ScalarField for SpaceTimeField {
    fn dim(&self) -> usize {
        self.ring.dim()
    }

    fn time_window(&self) -> (f64, f64) {
        (self.t_min(), self.horizon())
    }

    fn spacing(&self) -> f64 {
        self.cls.h()
    }

    fn sampling_lattice(&self) -> SamplingLattice {
        let l = self.cls.lattice();
        let h = self.cls.h();
        SamplingLattice {
            origin: Point::new(l.lo[0] as f64 * h, l.lo[1] as f64 * h),
            h,
            nx: l.nx(),
            ny: l.ny(),
        }
    }

    fn exclusion(&self, p: &SpaceTimePoint) -> Option<Exclusion> {
        let (lo, hi) = self.time_window();
        if !(p.t >= lo) {
            return Some(Exclusion::BeforeWindow);
        }
        if p.t > hi * (1.0 + 1e-12) {
            return Some(Exclusion::AfterWindow);
        }
        if !p.x.iter().all(|c| c.is_finite()) {
            return Some(Exclusion::OuterBand);
        }
        let band = ADMISSIBLE_CLEARANCE * self.cls.h();
        let inner = self.ring.inner();
        if inner.contains(&p.x) != Location::Outside || inner.boundary_distance(&p.x) < band {
            return Some(Exclusion::InnerBand);
        }
        let outer = self.ring.outer();
        if outer.contains(&p.x) != Location::Inside || outer.boundary_distance(&p.x) < band {
            return Some(Exclusion::OuterBand);
        }
        if !self.stencil_valid(&p.x) {
            return Some(Exclusion::Stencil);
        }
        None
    }

    fn value(&self, p: &SpaceTimePoint) -> Result<f64> {
        if self.exclusion(p).is_some() {
            return Err(Error::out_of_domain(&p.x, p.t));
        }
        self.contract(p, true, false)
            .map(|j| j.u)
            .ok_or_else(|| Error::out_of_domain(&p.x, p.t))
    }

    fn jet(&self, p: &SpaceTimePoint) -> Result<Jet> {
        if self.exclusion(p).is_some() {
            return Err(Error::out_of_domain(&p.x, p.t));
        }
        self.contract(p, true, true).ok_or_else(|| Error::out_of_domain(&p.x, p.t))
    }

    fn extended_value(&self, p: &SpaceTimePoint) -> f64 {
        if self.ring.inner().contains(&p.x) != Location::Outside {
            return self.boundary.inner;
        }
        if self.ring.outer().contains(&p.x) != Location::Inside {
            return self.boundary.outer;
        }
        let t = p.t.clamp(0.0, self.horizon());
        if t == 0.0 && !self.exploratory {
            return 0.0;
        }
        let strict = self.stencil_valid(&p.x);
        self.contract(&SpaceTimePoint::new(p.x, t), strict, false)
            .map(|j| j.u)
            .unwrap_or(f64::NAN)
    }

    fn inner_boundary_samples(&self) -> Vec<Point> {
        self.ring.inner().boundary_samples().to_vec()
    }

    fn boundary_clearance(&self, x: &Point) -> f64 {
        self.ring.boundary_distance(x)
    }

    fn zero_initial_data(&self) -> bool {
        !self.exploratory
    }

    fn nodal_bounds(&self) -> Option<crate::solver::DiscreteBounds> {
        Some(self.discrete_bounds(self.t_min()))
    }
}
