//! Natural cubic spline interpolation of sampled measurements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Natural spline through `(t_i, y_i)`; `t` strictly increasing.
    pub fn natural(t: &[f64], y: &[f64]) -> Result<Self> {
        if t.len() != y.len() || t.len() < 2 {
            return Err(Error::Data(format!(
                "spline needs at least two matching knots, got {} times and {} values",
                t.len(),
                y.len()
            )));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data("spline knots must be strictly increasing".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("spline values must be finite".into()));
        }
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = t[i + 1] - t[i];
                let h1 = t[i + 2] - t[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(CubicSpline {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Value at `t`, extended linearly outside the knot range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.y[0] + self.slope_at_knot(0) * (t - self.t[0]);
        }
        if t >= self.t[n - 1] {
            return self.y[n - 1] + self.slope_at_knot(n - 1) * (t - self.t[n - 1]);
        }
        let i = self.t.partition_point(|&k| k <= t) - 1;
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - t) / h;
        let b = (t - self.t[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    fn slope_at_knot(&self, i: usize) -> f64 {
        let n = self.t.len();
        if i == 0 {
            let h = self.t[1] - self.t[0];
            (self.y[1] - self.y[0]) / h - h * (2.0 * self.m[0] + self.m[1]) / 6.0
        } else {
            let h = self.t[n - 1] - self.t[n - 2];
            (self.y[n - 1] - self.y[n - 2]) / h + h * (self.m[n - 2] + 2.0 * self.m[n - 1]) / 6.0
        }
    }
}
