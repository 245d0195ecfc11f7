//! Deterministic time-varying coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Piecewise-constant signal: `values[k]` on `[t0 + k·dwell, t0 + (k+1)·dwell)`.
///
/// Held at the first value before `t0` and at the last value after the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub t0: f64,
    pub dwell: f64,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    /// Values drawn uniformly in `[lo, hi]` from a seeded generator.
    pub fn seeded(seed: u64, lo: f64, hi: f64, dwell: f64, horizon: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = (horizon / dwell).ceil().max(1.0) as usize + 1;
        let values = (0..count).map(|_| rng.gen_range(lo..=hi)).collect();
        PiecewiseConstant {
            t0: 0.0,
            dwell,
            values,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = ((t - self.t0) / self.dwell).floor();
        if k <= 0.0 {
            self.values[0]
        } else {
            let k = (k as usize).min(self.values.len() - 1);
            self.values[k]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    Constant(f64),
    Piecewise(PiecewiseConstant),
}

impl Signal {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Signal::Constant(v) => *v,
            Signal::Piecewise(p) => p.eval(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Signal::Constant(_))
    }

    /// Smallest and largest value taken.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Signal::Constant(v) => (*v, *v),
            Signal::Piecewise(p) => p
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_values_stay_in_bounds_and_repeat() {
        let a = PiecewiseConstant::seeded(3, 0.32, 0.48, 1.0, 50.0);
        let b = PiecewiseConstant::seeded(3, 0.32, 0.48, 1.0, 50.0);
        assert_eq!(a, b);
        assert!(a.values.iter().all(|v| (0.32..=0.48).contains(v)));
        assert_eq!(a.eval(2.5), a.values[2]);
        assert_eq!(a.eval(-1.0), a.values[0]);
        assert_eq!(a.eval(1e6), *a.values.last().unwrap());
    }
}
