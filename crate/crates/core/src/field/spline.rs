//! Cubic B-spline quasi-interpolation weights.
//!
//! With coefficients `c_j = (-f_{j-1} + 8 f_j - f_{j+1}) / 6` the uniform
//! cubic B-spline reproduces cubic polynomials, so value, first and second
//! derivative weights over six consecutive nodes fall out of one table.

/// Weights of the six nodes `base, …, base + 5` on one axis, for the
/// value and the first two derivatives (already divided by the spacing).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisWeights {
    pub base: i64,
    pub len: usize,
    pub w: [[f64; 6]; 3],
}

const Q: [f64; 3] = [-1.0 / 6.0, 8.0 / 6.0, -1.0 / 6.0];

fn basis(f: f64) -> [[f64; 4]; 3] {
    let g = 1.0 - f;
    [
        [
            g * g * g / 6.0,
            (3.0 * f * f * f - 6.0 * f * f + 4.0) / 6.0,
            (-3.0 * f * f * f + 3.0 * f * f + 3.0 * f + 1.0) / 6.0,
            f * f * f / 6.0,
        ],
        [
            -g * g / 2.0,
            (3.0 * f * f - 4.0 * f) / 2.0,
            (-3.0 * f * f + 2.0 * f + 1.0) / 2.0,
            f * f / 2.0,
        ],
        [g, 3.0 * f - 2.0, 1.0 - 3.0 * f, f],
    ]
}

impl AxisWeights {
    /// Weights for coordinate `x` on nodes `k · h`. When `upper` is given the
    /// cell index is capped so that `x = upper · h` uses the cell left of it.
    pub fn cubic(x: f64, h: f64, upper: Option<i64>) -> Self {
        let xi = x / h;
        let mut i0 = xi.floor() as i64;
        if let Some(u) = upper {
            i0 = i0.min(u - 1);
        }
        let f = xi - i0 as f64;
        let b = basis(f);
        let scale = [1.0, 1.0 / h, 1.0 / (h * h)];
        let mut w = [[0.0; 6]; 3];
        for (d, row) in w.iter_mut().enumerate() {
            for k in 0..4 {
                for (m, q) in Q.iter().enumerate() {
                    row[k + m] += b[d][k] * q * scale[d];
                }
            }
        }
        AxisWeights { base: i0 - 2, len: 6, w }
    }

    /// A collapsed axis: node 0 with unit weight and zero derivatives.
    pub fn trivial() -> Self {
        let mut w = [[0.0; 6]; 3];
        w[0][0] = 1.0;
        AxisWeights { base: 0, len: 1, w }
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        (0..self.len).map(move |a| (a, self.base + a as i64))
    }
}

/// Time weights restricted to stored snapshots `0..=last`. Ghost snapshots
/// beyond either end are cubic extrapolations of the four nearest ones.
pub fn time_weights(t: f64, dt: f64, last: usize) -> AxisWeights {
    spread_to_range(AxisWeights::cubic(t, dt, Some(last as i64)), last as i64)
}

/// Fold weights on nodes outside `0..=last` onto real nodes via cubic
/// extrapolation. Requires `last ≥ 5` and a cell index in `0..last`.
pub fn spread_to_range(mut aw: AxisWeights, last_i: i64) -> AxisWeights {
    if aw.base >= 0 && aw.base + 5 <= last_i {
        return aw;
    }
    const EXTRAP: [f64; 4] = [4.0, -6.0, 4.0, -1.0];
    let base = aw.base;
    for a in (0..6).rev() {
        let k = base + a as i64;
        if k > last_i {
            for (m, c) in EXTRAP.iter().enumerate() {
                let tgt = (a as i64 - 1 - m as i64) as usize;
                for d in 0..3 {
                    aw.w[d][tgt] += c * aw.w[d][a];
                }
            }
            for d in 0..3 {
                aw.w[d][a] = 0.0;
            }
        }
    }
    for a in 0..6 {
        let k = base + a as i64;
        if k < 0 {
            for (m, c) in EXTRAP.iter().enumerate() {
                let tgt = a + 1 + m;
                for d in 0..3 {
                    aw.w[d][tgt] += c * aw.w[d][a];
                }
            }
            for d in 0..3 {
                aw.w[d][a] = 0.0;
            }
        }
    }
    aw
}
