//! Joint integration of a system and an observer, with error statistics.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::spline::CubicSpline;
use crate::error::{Error, Result};
use crate::ode::{solve, ModelSpec, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LuenbergerLinearUpToOutput,
    ChangeOfCoordinates,
    ReducedOrder,
    HighGain,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::LuenbergerLinearUpToOutput,
        Family::ChangeOfCoordinates,
        Family::ReducedOrder,
        Family::HighGain,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::LuenbergerLinearUpToOutput => "luenberger-linear-up-to-output",
            Family::ChangeOfCoordinates => "change-of-coordinates",
            Family::ReducedOrder => "reduced-order",
            Family::HighGain => "high-gain",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .find(|f| f.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Unknown {
                kind: "observer family",
                name: s.to_string(),
            })
    }
}

/// An observer `ξ̇ = g(t, ξ, y)`, `x̂ = l(t, ξ, y)`.
pub trait Observer: Send + Sync {
    fn family(&self) -> Family;

    /// Dimension of the internal state `ξ`.
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, xi: &[f64], y: &[f64], out: &mut [f64]);

    fn estimate(&self, t: f64, xi: &[f64], y: &[f64]) -> DVector<f64>;

    /// The quantity `x̂` is compared with, given the true model state.
    fn reference(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    /// `h(x̂) − y`, for observers driven by it.
    fn innovation(&self, _t: f64, _xi: &[f64], _y: &[f64]) -> Option<DVector<f64>> {
        None
    }

    /// Notes about the run, such as saturation activity.
    fn diagnostics(&self, _t: &[f64], _xi: &[DVector<f64>]) -> Vec<String> {
        vec![]
    }
}

/// Where the observer reads `y(t)` from.
#[derive(Clone, Debug)]
pub enum Measurement {
    /// `h(x(t))` of the jointly integrated true state.
    Exact,
    /// One interpolating spline per output.
    Sampled(Vec<CubicSpline>),
}

impl Measurement {
    fn end(&self) -> Option<f64> {
        match self {
            Measurement::Exact => None,
            Measurement::Sampled(s) => s.iter().map(|s| s.t_end()).reduce(f64::min),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObserverRun {
    pub family: Family,
    pub t: Vec<f64>,
    pub x_true: Vec<Vec<f64>>,
    pub x_hat: Vec<Vec<f64>>,
    /// Measurements seen by the observer.
    pub y: Vec<Vec<f64>>,
    /// Empty when the family has no innovation.
    pub innovation: Vec<Vec<f64>>,
    pub error_norm: Vec<f64>,
    pub empirical_decay_rate: Option<f64>,
    /// RMS error over the last 30% of the run.
    pub tail_error: f64,
    /// Largest norm of the compared true state.
    pub state_scale: f64,
    pub warnings: Vec<String>,
}

/// Window of the run used for decay-rate fits, as fractions of its length.
pub const DECAY_WINDOW: (f64, f64) = (0.3, 0.9);

/// Least-squares slope of `ln e(t)` over the decay window.
///
/// Samples below `1e3·ε·scale` are dropped; `None` with fewer than three left.
pub fn decay_rate(t: &[f64], e: &[f64], scale: f64) -> Option<f64> {
    let (t0, t1) = (*t.first()?, *t.last()?);
    let lo = t0 + DECAY_WINDOW.0 * (t1 - t0);
    let hi = t0 + DECAY_WINDOW.1 * (t1 - t0);
    let floor = 1e3 * f64::EPSILON * scale.max(1.0);
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(e)
        .filter(|(ti, ei)| **ti >= lo && **ti <= hi && **ei > floor && ei.is_finite())
        .map(|(ti, ei)| (*ti, ei.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    Some(sxy / sxx)
}

impl ObserverRun {
    /// First time after which the error stays at or below `fraction·e(t0)`.
    pub fn time_to_fraction(&self, fraction: f64) -> Option<f64> {
        let target = fraction * self.error_norm.first()?;
        let mut k = self.error_norm.len();
        while k > 0 && self.error_norm[k - 1] <= target {
            k -= 1;
        }
        (k < self.error_norm.len()).then(|| self.t[k])
    }

    /// Largest error norm over the run.
    pub fn max_error(&self) -> f64 {
        self.error_norm.iter().copied().fold(0.0, f64::max)
    }

    /// Decay rate of the innovation norm, when defined.
    pub fn innovation_decay_rate(&self) -> Option<f64> {
        if self.innovation.is_empty() {
            return None;
        }
        let norms: Vec<f64> = self
            .innovation
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        decay_rate(&self.t, &norms, self.state_scale)
    }
}

fn rms_tail(t: &[f64], e: &[f64]) -> f64 {
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let start = t0 + 0.7 * (t1 - t0);
    let tail: Vec<f64> = t.iter().zip(e).filter(|(ti, _)| **ti >= start).map(|(_, v)| *v).collect();
    (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
}

/// Integrates the model and the observer as one system over `grid`.
#[allow(clippy::too_many_arguments)]
pub fn run_observer(
    model: &ModelSpec,
    theta: &[f64],
    x0: &[f64],
    observer: &dyn Observer,
    xi0: &[f64],
    grid: &[f64],
    measurement: &Measurement,
    opts: &SolverOptions,
) -> Result<ObserverRun> {
    model.check_dims(x0, theta)?;
    let n = model.n_states();
    let d = observer.dim();
    if xi0.len() != d {
        return Err(Error::Dimension(format!(
            "observer state has length {}, expected {d}",
            xi0.len()
        )));
    }
    if let Measurement::Sampled(s) = measurement {
        if s.len() != model.n_outputs() {
            return Err(Error::Dimension(format!(
                "{} measurement streams for {} outputs",
                s.len(),
                model.n_outputs()
            )));
        }
    }
    let mut warnings = vec![];
    if let (Some(end), Some(last)) = (measurement.end(), grid.last()) {
        if *last > end + 1e-9 * last.abs().max(1.0) {
            warnings.push(format!(
                "measurement stream ends at t = {end}, before the horizon {last}; extrapolated linearly"
            ));
        }
    }
    let measure = |t: f64, x: &[f64]| -> DVector<f64> {
        match measurement {
            Measurement::Exact => model.output(t, x, theta),
            Measurement::Sampled(s) => DVector::from_iterator(s.len(), s.iter().map(|s| s.eval(t))),
        }
    };
    let z0: Vec<f64> = x0.iter().chain(xi0).copied().collect();
    let sol = solve(
        |t, z, dz| {
            let (x, xi) = z.split_at(n);
            dz[..n].copy_from_slice(model.rhs(t, x, theta).as_slice());
            let y = measure(t, x);
            observer.rhs(t, xi, y.as_slice(), &mut dz[n..]);
        },
        grid,
        &z0,
        opts,
    )?;

    let mut x_true = Vec::with_capacity(grid.len());
    let mut x_hat = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    let mut innovation = vec![];
    let mut error_norm = Vec::with_capacity(grid.len());
    let mut xis = Vec::with_capacity(grid.len());
    let mut scale: f64 = 0.0;
    for (&t, z) in grid.iter().zip(&sol) {
        let (x, xi) = z.as_slice().split_at(n);
        let y = measure(t, x);
        let est = observer.estimate(t, xi, y.as_slice());
        let reference = observer.reference(x);
        error_norm.push((&est - &reference).norm());
        scale = scale.max(reference.norm());
        if let Some(inn) = observer.innovation(t, xi, y.as_slice()) {
            innovation.push(inn.iter().copied().collect());
        }
        x_true.push(reference.iter().copied().collect());
        x_hat.push(est.iter().copied().collect());
        ys.push(y.iter().copied().collect());
        xis.push(DVector::from_column_slice(xi));
    }
    warnings.extend(observer.diagnostics(grid, &xis));
    let rate = decay_rate(grid, &error_norm, scale);
    Ok(ObserverRun {
        family: observer.family(),
        t: grid.to_vec(),
        x_true,
        x_hat,
        y: ys,
        innovation,
        tail_error: rms_tail(grid, &error_norm),
        empirical_decay_rate: rate,
        error_norm,
        state_scale: scale,
        warnings,
    })
}
