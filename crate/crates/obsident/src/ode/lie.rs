//! Stacks of Lie derivatives `h, L_f h, ..., L_f^k h` and their Jacobians.
//!
//! Two evaluation routes are available. For models whose equations run on
//! Taylor jets, the stack is read off the Taylor expansion of the output in
//! time: `L_f^i h(x) = i!·[t^i] h(x(t))`, with gradients carried alongside,
//! which is exact up to rounding. Any other model goes through nested central
//! differences, where noise grows quickly with the order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::jet::Jet;
use super::model::ModelSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LieMethod {
    /// Series when available, finite differences otherwise.
    Auto,
    Series,
    FiniteDifference,
}

#[derive(Clone, Debug, Serialize)]
pub struct LieStack {
    /// State, or state followed by parameters when augmented.
    pub point: Vec<f64>,
    pub order: usize,
    pub augmented: bool,
    /// `values[i]` is the i-th time derivative of the output.
    pub values: Vec<DVector<f64>>,
    /// Rows ordered by derivative order, then output index.
    pub jacobian: DMatrix<f64>,
    pub method: LieMethod,
    /// Finite-difference noise swamps at least one value.
    pub degraded: bool,
}

/// Lie stack at `t = 0` with automatic route selection.
///
/// With `augment`, `point` is `(x, θ)` and `theta` is ignored.
pub fn lie_stack(
    model: &ModelSpec,
    point: &[f64],
    theta: &[f64],
    order: usize,
    augment: bool,
) -> Result<LieStack> {
    lie_stack_with(model, point, theta, order, augment, LieMethod::Auto, 0.0)
}

pub fn lie_stack_with(
    model: &ModelSpec,
    point: &[f64],
    theta: &[f64],
    order: usize,
    augment: bool,
    method: LieMethod,
    t: f64,
) -> Result<LieStack> {
    let n = model.n_states();
    let p = model.n_params();
    let (x, th): (&[f64], &[f64]) = if augment {
        if point.len() != n + p {
            return Err(Error::Dimension(format!(
                "augmented point has length {}, expected {}",
                point.len(),
                n + p
            )));
        }
        (&point[..n], &point[n..])
    } else {
        (point, theta)
    };
    model.check_dims(x, th)?;
    if let Some(i) = point.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: format!("lie stack point component {i}"),
        });
    }

    let use_series = match method {
        LieMethod::Series => {
            if !model.has_series() {
                return Err(Error::InvalidParameter {
                    name: "method".into(),
                    reason: format!("model {} has no series evaluator", model.name()),
                });
            }
            true
        }
        LieMethod::FiniteDifference => false,
        LieMethod::Auto => model.has_series() && !model.is_time_varying(),
    };

    let (values, jacobian, degraded) = if use_series {
        let (v, j) = series_stack(model, x, th, order, augment);
        (v, j, false)
    } else {
        fd_stack(model, x, th, order, augment, t)?
    };
    if values
        .iter()
        .flat_map(|v| v.iter())
        .chain(jacobian.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::Domain {
            what: "lie stack".into(),
        });
    }
    Ok(LieStack {
        point: point.to_vec(),
        order,
        augmented: augment,
        values,
        jacobian,
        method: if use_series {
            LieMethod::Series
        } else {
            LieMethod::FiniteDifference
        },
        degraded,
    })
}

fn series_stack(
    model: &ModelSpec,
    x: &[f64],
    th: &[f64],
    order: usize,
    augment: bool,
) -> (Vec<DVector<f64>>, DMatrix<f64>) {
    let n = x.len();
    let p = th.len();
    let m = model.n_outputs();
    let dim = if augment { n + p } else { n };

    let mut xs: Vec<Jet> = (0..n).map(|i| Jet::variable(order, dim, x[i], i)).collect();
    let ps: Vec<Jet> = (0..p)
        .map(|j| {
            if augment {
                Jet::variable(order, dim, th[j], n + j)
            } else {
                Jet::constant(order, dim, th[j])
            }
        })
        .collect();

    // Picard recurrence on the series: x_{j+1} = [t^j] f(x(t)) / (j + 1).
    for j in 0..order {
        let fx = model.series_rhs(&xs, &ps).expect("series evaluator");
        for i in 0..n {
            let c: Vec<f64> = fx[i].coefficient(j).iter().map(|v| v / (j + 1) as f64).collect();
            xs[i].set_coefficient(j + 1, &c);
        }
    }
    let ys = model.series_output(&xs, &ps).expect("series evaluator");

    let mut values = Vec::with_capacity(order + 1);
    let mut jac = DMatrix::zeros(m * (order + 1), dim);
    let mut fact = 1.0;
    for i in 0..=order {
        if i > 0 {
            fact *= i as f64;
        }
        values.push(DVector::from_fn(m, |r, _| fact * ys[r].value(i)));
        for r in 0..m {
            for (c, g) in ys[r].gradient(i).iter().enumerate() {
                jac[(i * m + r, c)] = fact * g;
            }
        }
    }
    (values, jac)
}

/// Nested central differences of the Lie derivatives at an augmented point.
struct FdLie<'a> {
    model: &'a ModelSpec,
    n: usize,
    steps: Vec<f64>,
    t_step: f64,
}

impl FdLie<'_> {
    fn value(&self, t: f64, z: &mut Vec<f64>, order: usize) -> DVector<f64> {
        let n = self.n;
        if order == 0 {
            let (x, th) = z.split_at(n);
            return self.model.output(t, x, th);
        }
        let f = {
            let (x, th) = z.split_at(n);
            self.model.rhs(t, x, th)
        };
        let mut acc: Option<DVector<f64>> = None;
        // Parameters have zero dynamics, so only state directions contribute.
        for j in 0..n {
            let zj = z[j];
            let h = self.steps[j];
            z[j] = zj + h;
            let plus = self.value(t, z, order - 1);
            z[j] = zj - h;
            let minus = self.value(t, z, order - 1);
            z[j] = zj;
            let term = (plus - minus) * (f[j] / ((zj + h) - (zj - h)));
            acc = Some(match acc {
                Some(a) => a + term,
                None => term,
            });
        }
        if self.model.is_time_varying() {
            let h = self.t_step;
            let plus = self.value(t + h, z, order - 1);
            let minus = self.value(t - h, z, order - 1);
            let term = (plus - minus) / ((t + h) - (t - h));
            acc = Some(match acc {
                Some(a) => a + term,
                None => term,
            });
        }
        acc.unwrap_or_else(|| DVector::zeros(self.model.n_outputs()))
    }
}

fn fd_steps(model: &ModelSpec, z: &[f64], factor: f64) -> Vec<f64> {
    let scales: Vec<f64> = model
        .state_scales()
        .iter()
        .chain(model.param_scales())
        .copied()
        .collect();
    z.iter()
        .zip(&scales)
        .map(|(v, s)| factor * v.abs().max(*s))
        .collect()
}

fn fd_values(model: &ModelSpec, z: &[f64], order: usize, t: f64, factor: f64) -> Vec<DVector<f64>> {
    let eval = FdLie {
        model,
        n: model.n_states(),
        steps: fd_steps(model, z, factor),
        t_step: factor * t.abs().max(1.0),
    };
    let mut zz = z.to_vec();
    (0..=order).map(|i| eval.value(t, &mut zz, i)).collect()
}

fn fd_stack(
    model: &ModelSpec,
    x: &[f64],
    th: &[f64],
    order: usize,
    augment: bool,
    t: f64,
) -> Result<(Vec<DVector<f64>>, DMatrix<f64>, bool)> {
    let n = x.len();
    let m = model.n_outputs();
    let z: Vec<f64> = x.iter().chain(th).copied().collect();
    let dim = if augment { z.len() } else { n };

    // Step size tuned to the deepest nesting (order + 1 for the Jacobian).
    let factor = f64::EPSILON.powf(1.0 / (order as f64 + 3.0));
    let values = fd_values(model, &z, order, t, factor);
    let check = fd_values(model, &z, order, t, 2.0 * factor);
    let mut degraded = false;
    for (a, b) in values.iter().zip(&check).skip(1) {
        let mag = a.amax().max(b.amax());
        if mag > 0.0 && (a - b).amax() > 1e-3 * mag {
            degraded = true;
        }
    }

    let eval = FdLie {
        model,
        n,
        steps: fd_steps(model, &z, factor),
        t_step: factor * t.abs().max(1.0),
    };
    let mut jac = DMatrix::zeros(m * (order + 1), dim);
    let mut zz = z.clone();
    for c in 0..dim {
        let zc = z[c];
        let h = eval.steps[c];
        let width = (zc + h) - (zc - h);
        for i in 0..=order {
            zz[c] = zc + h;
            let plus = eval.value(t, &mut zz, i);
            zz[c] = zc - h;
            let minus = eval.value(t, &mut zz, i);
            zz[c] = zc;
            for r in 0..m {
                jac[(i * m + r, c)] = (plus[r] - minus[r]) / width;
            }
        }
    }
    Ok((values, jac, degraded))
}
