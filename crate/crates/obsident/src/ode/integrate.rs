//! Dormand–Prince 5(4) integrator with PI step control and dense output.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::ModelSpec;
use crate::error::{Error, Result};

/// Local error tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel: 1e-8, abs: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: Tolerances,
    /// Initial step; estimated when `None`.
    pub h_init: Option<f64>,
    /// Largest allowed step; defaults to the grid span.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: Tolerances::default(),
            h_init: None,
            h_max: None,
            max_steps: 2_000_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: Tolerances) -> Self {
        SolverOptions { tol, ..Default::default() }
    }
}

const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Data("time grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Data("time grid contains non-finite values".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn rms_norm(v: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

struct Rhs<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Rhs<F> {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.evals += 1;
        (self.f)(t, y, out);
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: format!("derivative component {i} at t = {t}"),
            });
        }
        Ok(())
    }
}

fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(
    rhs: &mut Rhs<F>,
    t: f64,
    y: &[f64],
    k1: &[f64],
    tol: &Tolerances,
    h_max: f64,
) -> Result<f64> {
    let n = y.len();
    let d0 = rms_norm(y, y, y, tol);
    let d1 = rms_norm(k1, y, y, tol);
    let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h0 * k1[i]).collect();
    let mut k2 = vec![0.0; n];
    rhs.eval(t + h0, &y1, &mut k2)?;
    let diff: Vec<f64> = (0..n).map(|i| k2[i] - k1[i]).collect();
    let d2 = rms_norm(&diff, y, y, tol) / h0;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / m).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(h_max))
}

/// Integrates `ẏ = f(t, y)` and samples the solution on `t_grid`.
///
/// `f(t, y, dy)` writes the derivative into `dy`. The first grid point is the
/// initial time.
pub fn solve<F>(f: F, t_grid: &[f64], y0: &[f64], opts: &SolverOptions) -> Result<Vec<DVector<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    check_grid(t_grid)?;
    if let Some(i) = y0.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: format!("initial state component {i}"),
        });
    }
    let n = y0.len();
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(DVector::from_column_slice(y0));
    if t_grid.len() == 1 {
        return Ok(out);
    }
    if n == 0 {
        out.resize(t_grid.len(), DVector::zeros(0));
        return Ok(out);
    }

    let tol = opts.tol;
    let t_end = *t_grid.last().unwrap();
    let span = t_end - t_grid[0];
    let h_max = opts.h_max.unwrap_or(span).min(span);
    let mut rhs = Rhs { f, evals: 0 };

    let mut t = t_grid[0];
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    rhs.eval(t, &y, &mut k1)?;
    let mut h = match opts.h_init {
        Some(h) => h.min(h_max),
        None => initial_step(&mut rhs, t, &y, &k1, &tol, h_max)?,
    };

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err_vec = vec![0.0; n];
    let mut facold: f64 = 1e-4;
    let mut rejected = false;
    let mut next = 1usize;
    let mut steps = 0usize;

    while next < t_grid.len() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("more than {} steps", opts.max_steps),
            });
        }
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 10.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                reason: "step size underflow".into(),
            });
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs.eval(t + C2 * h, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs.eval(t + C3 * h, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs.eval(t + C4 * h, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs.eval(t + C5 * h, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t_end } else { t + h };
        rhs.eval(t_new, &ytmp, &mut k6)?;
        for i in 0..n {
            ynew[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs.eval(t_new, &ynew, &mut k7)?;
        for i in 0..n {
            err_vec[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = rms_norm(&err_vec, &y, &ynew, &tol);
        let fac11 = err.powf(0.2 - BETA * 0.75);

        if err <= 1.0 {
            // Dense output for every grid point inside the accepted step.
            while next < t_grid.len() && t_grid[next] <= t_new {
                let tout = t_grid[next];
                if tout == t_new {
                    out.push(DVector::from_column_slice(&ynew));
                } else {
                    let s = (tout - t) / h;
                    let s1 = 1.0 - s;
                    let v = DVector::from_fn(n, |i, _| {
                        let ydiff = ynew[i] - y[i];
                        let bspl = h * k1[i] - ydiff;
                        let c3 = ydiff - h * k7[i] - bspl;
                        let c4 = h
                            * (D1 * k1[i]
                                + D3 * k3[i]
                                + D4 * k4[i]
                                + D5 * k5[i]
                                + D6 * k6[i]
                                + D7 * k7[i]);
                        y[i] + s * (ydiff + s1 * (bspl + s * (c3 + s1 * c4)))
                    });
                    out.push(v);
                }
                next += 1;
            }

            let mut fac = fac11 / facold.powf(BETA);
            fac = (fac / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            facold = err.max(1e-4);
            if rejected {
                h_new = h_new.min(h);
            }
            rejected = false;
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            h = h_new.min(h_max);
        } else {
            rejected = true;
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
        }
    }
    Ok(out)
}

/// State and output samples on a time grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Samples of state component `i`.
    pub fn state(&self, i: usize) -> Vec<f64> {
        self.x.iter().map(|v| v[i]).collect()
    }

    /// Samples of output component `j`.
    pub fn output(&self, j: usize) -> Vec<f64> {
        self.y.iter().map(|v| v[j]).collect()
    }
}

/// Integrates a model with default tolerances.
pub fn integrate(model: &ModelSpec, x0: &[f64], theta: &[f64], t_grid: &[f64]) -> Result<Trajectory> {
    integrate_with(model, x0, theta, t_grid, &SolverOptions::default())
}

pub fn integrate_with(
    model: &ModelSpec,
    x0: &[f64],
    theta: &[f64],
    t_grid: &[f64],
    opts: &SolverOptions,
) -> Result<Trajectory> {
    model.check_dims(x0, theta)?;
    let x = solve(
        |t, x, dx| dx.copy_from_slice(model.rhs(t, x, theta).as_slice()),
        t_grid,
        x0,
        opts,
    )?;
    let y = t_grid
        .iter()
        .zip(&x)
        .map(|(&t, xi)| model.output(t, xi.as_slice(), theta))
        .collect();
    Ok(Trajectory {
        t: t_grid.to_vec(),
        x,
        y,
    })
}

/// `n` equally spaced points from `t0` to `t1` inclusive.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![t0],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
