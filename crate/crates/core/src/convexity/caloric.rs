use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, SpaceTimePoint};

/// `coef · x^a · y^b · t^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub x: u32,
    pub y: u32,
    pub t: u32,
}

impl Monomial {
    pub fn new(coef: f64, x: u32, y: u32, t: u32) -> Self {
        Monomial { coef, x, y, t }
    }

    fn eval(&self, p: &SpaceTimePoint) -> f64 {
        self.coef * p.x[0].powi(self.x as i32) * p.x[1].powi(self.y as i32) * p.t.powi(self.t as i32)
    }
}

/// A polynomial solution of the heat equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CaloricSpec")]
pub struct CaloricFunction {
    dim: usize,
    terms: Vec<Monomial>,
}

#[derive(Deserialize)]
struct CaloricSpec {
    dim: usize,
    terms: Vec<Monomial>,
}

impl TryFrom<CaloricSpec> for CaloricFunction {
    type Error = Error;

    fn try_from(s: CaloricSpec) -> Result<Self> {
        CaloricFunction::new(s.dim, s.terms)
    }
}

type Key = (u32, u32, u32);

fn collect(terms: impl IntoIterator<Item = (Key, f64)>) -> BTreeMap<Key, f64> {
    let mut m = BTreeMap::new();
    for (k, c) in terms {
        *m.entry(k).or_insert(0.0) += c;
    }
    m
}

impl CaloricFunction {
    /// Validates `h_t = Δh` coefficient by coefficient.
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("dimension {dim} is not 1 or 2")));
        }
        if terms.iter().any(|m| !m.coef.is_finite() || m.x > 32 || m.y > 32 || m.t > 32) {
            return Err(Error::InvalidArgument("coefficients must be finite with degree ≤ 32".into()));
        }
        if dim == 1 && terms.iter().any(|m| m.y > 0 && m.coef != 0.0) {
            return Err(Error::InvalidArgument("a one-dimensional polynomial cannot depend on y".into()));
        }
        let f = CaloricFunction { dim, terms };
        let ht = collect(f.terms.iter().filter(|m| m.t > 0).map(|m| ((m.x, m.y, m.t - 1), m.coef * m.t as f64)));
        let lap = collect(f.terms.iter().flat_map(|m| {
            let mut out = Vec::new();
            if m.x > 1 {
                out.push(((m.x - 2, m.y, m.t), m.coef * (m.x * (m.x - 1)) as f64));
            }
            if m.y > 1 {
                out.push(((m.x, m.y - 2, m.t), m.coef * (m.y * (m.y - 1)) as f64));
            }
            out
        }));
        let scale = f.terms.iter().map(|m| m.coef.abs()).fold(0.0, f64::max).max(1.0);
        let keys: std::collections::BTreeSet<Key> = ht.keys().chain(lap.keys()).copied().collect();
        for k in keys {
            let a = ht.get(&k).copied().unwrap_or(0.0);
            let b = lap.get(&k).copied().unwrap_or(0.0);
            if (a - b).abs() > 1e-12 * scale * 64.0 {
                return Err(Error::InvalidArgument(format!(
                    "not caloric: coefficient of x^{} y^{} t^{} is {a} in h_t and {b} in Δh",
                    k.0, k.1, k.2
                )));
            }
        }
        Ok(f)
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        Self::new(dim, vec![Monomial::new(c, 0, 0, 0)])
    }

    /// `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Result<Self> {
        match i {
            0 => Self::new(dim, vec![Monomial::new(1.0, 1, 0, 0)]),
            1 => Self::new(dim, vec![Monomial::new(1.0, 0, 1, 0)]),
            _ => Err(Error::InvalidArgument(format!("no coordinate {i}"))),
        }
    }

    /// `x_0 x_1`.
    pub fn product(dim: usize) -> Result<Self> {
        Self::new(dim, vec![Monomial::new(1.0, 1, 1, 0)])
    }

    /// `x_i² + 2t`.
    pub fn square(dim: usize, i: usize) -> Result<Self> {
        let m = match i {
            0 => Monomial::new(1.0, 2, 0, 0),
            1 => Monomial::new(1.0, 0, 2, 0),
            _ => return Err(Error::InvalidArgument(format!("no coordinate {i}"))),
        };
        Self::new(dim, vec![m, Monomial::new(2.0, 0, 0, 1)])
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.dim, self.terms.iter().map(|m| Monomial { coef: m.coef * c, ..*m }).collect())
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::InvalidArgument("dimensions differ".into()));
        }
        Self::new(self.dim, self.terms.iter().chain(&other.terms).copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn value(&self, p: &SpaceTimePoint) -> f64 {
        self.terms.iter().map(|m| m.eval(p)).sum()
    }

    /// Space-time gradient `(Dh, h_t)`.
    pub fn gradient(&self, p: &SpaceTimePoint) -> (Point, f64) {
        let mut dx = Point::zeros();
        let mut dt = 0.0;
        for m in &self.terms {
            if m.x > 0 {
                dx[0] += Monomial { coef: m.coef * m.x as f64, x: m.x - 1, ..*m }.eval(p);
            }
            if m.y > 0 {
                dx[1] += Monomial { coef: m.coef * m.y as f64, y: m.y - 1, ..*m }.eval(p);
            }
            if m.t > 0 {
                dt += Monomial { coef: m.coef * m.t as f64, t: m.t - 1, ..*m }.eval(p);
            }
        }
        (dx, dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_members_are_caloric() {
        for n in [1, 2] {
            assert!(CaloricFunction::constant(n, 3.0).is_ok());
            assert!(CaloricFunction::coordinate(n, 0).is_ok());
            assert!(CaloricFunction::square(n, 0).is_ok());
        }
        assert!(CaloricFunction::product(2).is_ok());
        assert!(CaloricFunction::square(2, 1).unwrap().sum(&CaloricFunction::product(2).unwrap()).is_ok());
        // x⁴ + 12 x² t + 12 t².
        let h4 = CaloricFunction::new(
            1,
            vec![Monomial::new(1.0, 4, 0, 0), Monomial::new(12.0, 2, 0, 1), Monomial::new(12.0, 0, 0, 2)],
        );
        assert!(h4.is_ok());
    }

    #[test]
    fn non_caloric_polynomials_are_rejected() {
        assert!(CaloricFunction::new(2, vec![Monomial::new(1.0, 2, 0, 0)]).is_err());
        assert!(CaloricFunction::new(1, vec![Monomial::new(1.0, 0, 0, 1)]).is_err());
        assert!(CaloricFunction::new(1, vec![Monomial::new(1.0, 0, 1, 0)]).is_err());
        assert!(CaloricFunction::product(1).is_err());
    }

    #[test]
    fn gradient_matches_differences() {
        let h = CaloricFunction::square(2, 0).unwrap().sum(&CaloricFunction::product(2).unwrap()).unwrap();
        let p = SpaceTimePoint::at(0.3, -0.7, 0.2);
        let (g, gt) = h.gradient(&p);
        let e = 1e-6;
        let d = |dx: f64, dy: f64, dt: f64| h.value(&SpaceTimePoint::at(0.3 + dx, -0.7 + dy, 0.2 + dt));
        assert!((g[0] - (d(e, 0.0, 0.0) - d(-e, 0.0, 0.0)) / (2.0 * e)).abs() < 1e-8);
        assert!((g[1] - (d(0.0, e, 0.0) - d(0.0, -e, 0.0)) / (2.0 * e)).abs() < 1e-8);
        assert!((gt - 2.0).abs() < 1e-12);
    }

    #[test]
    fn deserialization_validates() {
        let ok = r#"{"dim":1,"terms":[{"coef":1.0,"x":2,"y":0,"t":0},{"coef":2.0,"x":0,"y":0,"t":1}]}"#;
        assert!(serde_json::from_str::<CaloricFunction>(ok).is_ok());
        let bad = r#"{"dim":1,"terms":[{"coef":1.0,"x":2,"y":0,"t":0}]}"#;
        assert!(serde_json::from_str::<CaloricFunction>(bad).is_err());
    }
}
