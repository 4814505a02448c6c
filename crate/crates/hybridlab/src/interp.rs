//! Tabulated 1-D functions with monotonicity-preserving cubic interpolation
//! (Fritsch–Carlson). Used for open-circuit potential and entropic
//! coefficient curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tabulated function of one variable, interpolated with a C1
/// monotonicity-preserving cubic. Queries outside the knot span are clamped
/// to the endpoints.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Knot derivatives, Fritsch–Carlson limited.
    d: Vec<f64>,
}

impl Table {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Argument("table needs at least 2 knots".into()));
        }
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("table knots must be strictly increasing".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("table knots must be finite".into()));
        }
        let d = fritsch_carlson(&x, &y);
        Ok(Table { x, y, d })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (d0, d1) = (self.d[i], self.d[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    /// Constant function on [0, 1]; handy for zero entropic coefficients.
    pub fn constant(value: f64) -> Self {
        Table::new(&[(0.0, value), (1.0, value)]).unwrap()
    }
}

impl TryFrom<Vec<(f64, f64)>> for Table {
    type Error = Error;
    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Table::new(&points)
    }
}

impl From<Table> for Vec<(f64, f64)> {
    fn from(t: Table) -> Self {
        t.x.into_iter().zip(t.y).collect()
    }
}

fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = (0..n - 1).map(|i| x[i + 1] - x[i]).collect();
    let s: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    d[0] = s[0];
    d[n - 1] = s[n - 2];
    for i in 1..n - 1 {
        if s[i - 1] * s[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            // weighted harmonic mean keeps the interpolant monotone
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
        }
    }
    // limit endpoint slopes
    for (i, si) in [(0usize, 0usize), (n - 1, n - 2)] {
        if d[i] * s[si] <= 0.0 {
            d[i] = 0.0;
        } else if d[i].abs() > 3.0 * s[si].abs() {
            d[i] = 3.0 * s[si];
        }
    }
    d
}
