//! Forward sensitivities `z = ∂x/∂θ`, `w = ∂x/∂x0` and output sensitivities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{solve, ModelSpec, SolverOptions};

/// Trajectory with its sensitivities on a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensitivityBundle {
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    /// `n × p` matrices `∂x/∂θ`.
    pub z: Vec<DMatrix<f64>>,
    /// `n × n` matrices `∂x/∂x0`.
    pub w: Vec<DMatrix<f64>>,
}

impl SensitivityBundle {
    /// `det w(t)` at every grid point.
    pub fn det_w(&self) -> Vec<f64> {
        self.w.iter().map(|w| w.determinant()).collect()
    }
}

/// Integrates `ẋ = f`, `ż = A z + B`, `ẇ = A w` with `z(t0) = 0`, `w(t0) = I`.
pub fn sensitivity_solve(
    model: &ModelSpec,
    theta: &[f64],
    x0: &[f64],
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<SensitivityBundle> {
    model.check_dims(x0, theta)?;
    let n = model.n_states();
    let p = model.n_params();
    let mut y0 = vec![0.0; n + n * p + n * n];
    y0[..n].copy_from_slice(x0);
    for i in 0..n {
        y0[n + n * p + i * n + i] = 1.0;
    }
    let sol = solve(
        |t, y, dy| {
            let x = &y[..n];
            let (a, b) = match (model.jac_x(t, x, theta), model.jac_theta(t, x, theta)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    dy.fill(f64::NAN);
                    return;
                }
            };
            dy[..n].copy_from_slice(model.rhs(t, x, theta).as_slice());
            let z = DMatrix::from_column_slice(n, p, &y[n..n + n * p]);
            let w = DMatrix::from_column_slice(n, n, &y[n + n * p..]);
            let dz = &a * z + b;
            let dw = &a * w;
            dy[n..n + n * p].copy_from_slice(dz.as_slice());
            dy[n + n * p..].copy_from_slice(dw.as_slice());
        },
        grid,
        &y0,
        opts,
    )?;
    let mut bundle = SensitivityBundle {
        t: grid.to_vec(),
        x: Vec::with_capacity(grid.len()),
        z: Vec::with_capacity(grid.len()),
        w: Vec::with_capacity(grid.len()),
    };
    for y in sol {
        let y = y.as_slice();
        bundle.x.push(DVector::from_column_slice(&y[..n]));
        bundle.z.push(DMatrix::from_column_slice(n, p, &y[n..n + n * p]));
        bundle.w.push(DMatrix::from_column_slice(n, n, &y[n + n * p..]));
    }
    Ok(bundle)
}

/// Which parameters and initial-state components are unknown.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unknowns {
    /// Indices into θ.
    pub params: Vec<usize>,
    /// Indices into `x0`.
    pub states: Vec<usize>,
}

impl Unknowns {
    pub fn params(params: &[usize]) -> Self {
        Unknowns {
            params: params.to_vec(),
            states: vec![],
        }
    }

    /// Every parameter, initial state known.
    pub fn all_params(model: &ModelSpec) -> Self {
        Unknowns::params(&(0..model.n_params()).collect::<Vec<_>>())
    }

    pub fn with_states(mut self, states: &[usize]) -> Self {
        self.states = states.to_vec();
        self
    }

    pub fn len(&self) -> usize {
        self.params.len() + self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn estimates_x0(&self) -> bool {
        !self.states.is_empty()
    }

    pub fn check(&self, model: &ModelSpec) -> Result<()> {
        let bad_p = self.params.iter().any(|&i| i >= model.n_params());
        let bad_s = self.states.iter().any(|&i| i >= model.n_states());
        if bad_p || bad_s {
            return Err(Error::Dimension("unknown index out of range".into()));
        }
        let mut seen = self.params.clone();
        seen.sort_unstable();
        seen.dedup();
        let mut seen_s = self.states.clone();
        seen_s.sort_unstable();
        seen_s.dedup();
        if seen.len() != self.params.len() || seen_s.len() != self.states.len() {
            return Err(Error::Dimension("repeated unknown index".into()));
        }
        if self.is_empty() {
            return Err(Error::Dimension("nothing to estimate".into()));
        }
        Ok(())
    }

    /// Names: parameter names, then `<state>0`.
    pub fn names(&self, model: &ModelSpec) -> Vec<String> {
        self.params
            .iter()
            .map(|&i| model.param_names()[i].clone())
            .chain(self.states.iter().map(|&i| format!("{}0", model.state_names()[i])))
            .collect()
    }

    /// Current values of the unknowns.
    pub fn pack(&self, theta: &[f64], x0: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .map(|&i| theta[i])
            .chain(self.states.iter().map(|&i| x0[i]))
            .collect()
    }

    /// Writes `u` into copies of `theta` and `x0`.
    pub fn unpack(&self, u: &[f64], theta: &[f64], x0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut th = theta.to_vec();
        let mut x = x0.to_vec();
        for (k, &i) in self.params.iter().enumerate() {
            th[i] = u[k];
        }
        for (k, &i) in self.states.iter().enumerate() {
            x[i] = u[self.params.len() + k];
        }
        (th, x)
    }
}

/// `χ = ∂h/∂x [z w] + [∂h/∂θ 0]`, restricted to the unknown columns.
///
/// One `m × len(unknowns)` matrix per grid point.
pub fn output_sensitivity(
    bundle: &SensitivityBundle,
    model: &ModelSpec,
    theta: &[f64],
    unknowns: &Unknowns,
) -> Result<Vec<DMatrix<f64>>> {
    unknowns.check(model)?;
    let m = model.n_outputs();
    let q = unknowns.len();
    let np = unknowns.params.len();
    let mut out = Vec::with_capacity(bundle.t.len());
    for k in 0..bundle.t.len() {
        let t = bundle.t[k];
        let x = bundle.x[k].as_slice();
        let hx = model.output_jac_x(t, x, theta)?;
        let ht = model.output_jac_theta(t, x, theta)?;
        let hz = &hx * &bundle.z[k];
        let hw = &hx * &bundle.w[k];
        let mut chi = DMatrix::zeros(m, q);
        for (c, &i) in unknowns.params.iter().enumerate() {
            for r in 0..m {
                chi[(r, c)] = hz[(r, i)] + ht[(r, i)];
            }
        }
        for (c, &i) in unknowns.states.iter().enumerate() {
            for r in 0..m {
                chi[(r, np + c)] = hw[(r, i)];
            }
        }
        out.push(chi);
    }
    Ok(out)
}
