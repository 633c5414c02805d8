use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::SpaceTimePoint;

/// Orthonormal basis of the complement of `g` (as columns).
pub(crate) fn tangent_basis(g: &DVector<f64>) -> DMatrix<f64> {
    let m = g.len();
    let nu = g / g.norm();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(m - 1);
    // Gram-Schmidt over the coordinate axes, least aligned with ν first.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| nu[a].abs().total_cmp(&nu[b].abs()));
    for &k in &order {
        if cols.len() == m - 1 {
            break;
        }
        let mut v = DVector::zeros(m);
        v[k] = 1.0;
        v -= &nu * nu[k];
        for c in &cols {
            let d = c.dot(&v);
            v -= c * d;
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v / n);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Eigenvalues (ascending) of `-Eᵀ H E / |G|` for the space-time gradient
/// `G` and Hessian `H`. Positive values mean the superlevel set is convex.
pub fn shape_spectrum(g: &DVector<f64>, h: &DMatrix<f64>, g_min: f64) -> Result<Vec<f64>> {
    let norm = g.norm();
    if !(norm >= g_min) || norm == 0.0 {
        return Err(Error::DegenerateGradient {
            norm,
            threshold: g_min,
        });
    }
    let e = tangent_basis(g);
    let s = -(e.transpose() * h * &e) / norm;
    let s = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Shape-operator spectrum of the space-time level surface through `p`.
pub fn second_fundamental_form(field: &dyn ScalarField, p: &SpaceTimePoint, g_min: f64) -> Result<Vec<f64>> {
    let jet = field.jet(p)?;
    let n = field.dim();
    shape_spectrum(&jet.st_gradient(n), &jet.st_hessian(n), g_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_tangent() {
        let g = DVector::from_vec(vec![0.3, -1.2, 0.5]);
        let e = tangent_basis(&g);
        assert_eq!(e.ncols(), 2);
        let gram = e.transpose() * &e;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((e.transpose() * &g).norm() < 1e-12);
    }

    #[test]
    fn paraboloid_superlevel_is_convex() {
        // u = t - |x|²: superlevel set {t ≥ |x|²} is convex; at the vertex the
        // curvature of the level surface is 2 in each spatial direction.
        let g = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = -2.0;
        h[(1, 1)] = -2.0;
        let ev = shape_spectrum(&g, &h, 1e-12).unwrap();
        assert!((ev[0] - 2.0).abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_is_degenerate() {
        let g = DVector::zeros(2);
        let h = DMatrix::identity(2, 2);
        assert!(matches!(shape_spectrum(&g, &h, 1e-6), Err(Error::DegenerateGradient { .. })));
    }
}
