//! SIR variants.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::signal::{PiecewiseConstant, Signal};
use super::{nonnegative, positive_params, ModelId, ZooEntry};
use crate::error::{invalid, require_positive, Result};
use crate::ode::{Equations, ModelSpec, Scalar};

/// Force of infection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Incidence {
    /// `β S I / N`, with `N` a parameter.
    Normalized,
    /// `β̃ S I`.
    MassAction,
}

/// Observation gain `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gain {
    /// `k` is the last parameter.
    Fixed,
    /// `k = γ`.
    Gamma,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SirOutput {
    /// `y = k I`.
    Prevalence,
    /// Appended state `Ċ = k·incidence`, `y = C`.
    CumulativeIncidence,
    /// Appended state `Ċ = k γ I`, `y = C`.
    CumulativeRemoved,
}

/// Structural choices for an SIR model without demography.
///
/// Parameters are `(β, γ)`, then `N` for normalized incidence, then `k` for a
/// fixed gain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SirForm {
    pub incidence: Incidence,
    pub gain: Gain,
    pub output: SirOutput,
}

impl SirForm {
    pub fn n_states(&self) -> usize {
        match self.output {
            SirOutput::Prevalence => 2,
            _ => 3,
        }
    }

    fn n_index(&self) -> Option<usize> {
        match self.incidence {
            Incidence::Normalized => Some(2),
            Incidence::MassAction => None,
        }
    }

    fn k_index(&self) -> Option<usize> {
        match self.gain {
            Gain::Fixed => Some(2 + usize::from(self.n_index().is_some())),
            Gain::Gamma => None,
        }
    }

    pub fn n_params(&self) -> usize {
        2 + usize::from(self.n_index().is_some()) + usize::from(self.k_index().is_some())
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        let mut v = vec![
            match self.incidence {
                Incidence::Normalized => "beta",
                Incidence::MassAction => "beta_tilde",
            },
            "gamma",
        ];
        if self.n_index().is_some() {
            v.push("N");
        }
        if self.k_index().is_some() {
            v.push("k");
        }
        v
    }

    fn k<T: Scalar>(&self, p: &[T]) -> T {
        match self.k_index() {
            Some(i) => p[i].clone(),
            None => p[1].clone(),
        }
    }

    fn incidence<T: Scalar>(&self, x: &[T], p: &[T]) -> T {
        let bsi = p[0].clone() * x[0].clone() * x[1].clone();
        match self.n_index() {
            Some(i) => bsi / p[i].clone(),
            None => bsi,
        }
    }

    /// Model spec for this form.
    pub fn spec(&self) -> ModelSpec {
        let form = *self;
        let n = form.n_states();
        let p = form.n_params();
        let states: &[&str] = if n == 2 { &["S", "I"] } else { &["S", "I", "C"] };
        let names = form.param_names();
        ModelSpec::autonomous(format!("sir-{form:?}"), n, p, 1, SirEq(form))
            .with_names(states, &names, &["y"])
            .with_state_jacobians(
                Arc::new(move |_t, x, p| form.jac_f_x(x, p)),
                Arc::new(move |_t, x, p| form.jac_h_x(x, p)),
            )
            .with_param_jacobians(
                Arc::new(move |_t, x, p| form.jac_f_theta(x, p)),
                Arc::new(move |_t, x, p| form.jac_h_theta(x, p)),
            )
    }

    /// `(∂inc/∂S, ∂inc/∂I)`.
    fn inc_x(&self, x: &[f64], p: &[f64]) -> (f64, f64) {
        let b = match self.n_index() {
            Some(i) => p[0] / p[i],
            None => p[0],
        };
        (b * x[1], b * x[0])
    }

    /// Gradient of the incidence with respect to θ.
    fn inc_theta(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        let si = x[0] * x[1];
        match self.n_index() {
            Some(i) => {
                g[0] = si / p[i];
                g[i] = -p[0] * si / (p[i] * p[i]);
            }
            None => g[0] = si,
        }
        g
    }

    fn k_theta(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        g[self.k_index().unwrap_or(1)] = 1.0;
        g
    }

    fn jac_f_x(&self, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        let n = self.n_states();
        let (di_s, di_i) = self.inc_x(x, p);
        let gamma = p[1];
        let k = self.k::<f64>(p);
        let mut j = DMatrix::zeros(n, n);
        j[(0, 0)] = -di_s;
        j[(0, 1)] = -di_i;
        j[(1, 0)] = di_s;
        j[(1, 1)] = di_i - gamma;
        match self.output {
            SirOutput::Prevalence => {}
            SirOutput::CumulativeIncidence => {
                j[(2, 0)] = k * di_s;
                j[(2, 1)] = k * di_i;
            }
            SirOutput::CumulativeRemoved => j[(2, 1)] = k * gamma,
        }
        j
    }

    fn jac_f_theta(&self, x: &[f64], p: &[f64]) -> DMatrix<f64> {
        let n = self.n_states();
        let np = self.n_params();
        let dinc = self.inc_theta(x, p);
        let mut j = DMatrix::zeros(n, np);
        for c in 0..np {
            j[(0, c)] = -dinc[c];
            j[(1, c)] = dinc[c];
        }
        j[(1, 1)] -= x[1];
        let k = self.k::<f64>(p);
        let dk = self.k_theta();
        match self.output {
            SirOutput::Prevalence => {}
            SirOutput::CumulativeIncidence => {
                let inc = self.incidence::<f64>(x, p);
                for c in 0..np {
                    j[(2, c)] = k * dinc[c] + inc * dk[c];
                }
            }
            SirOutput::CumulativeRemoved => {
                let gi = p[1] * x[1];
                for c in 0..np {
                    j[(2, c)] = gi * dk[c];
                }
                j[(2, 1)] += k * x[1];
            }
        }
        j
    }

    fn jac_h_x(&self, _x: &[f64], p: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(1, self.n_states());
        match self.output {
            SirOutput::Prevalence => j[(0, 1)] = self.k::<f64>(p),
            _ => j[(0, 2)] = 1.0,
        }
        j
    }

    fn jac_h_theta(&self, x: &[f64], _p: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(1, self.n_params());
        if self.output == SirOutput::Prevalence {
            for (c, d) in self.k_theta().iter().enumerate() {
                j[(0, c)] = d * x[1];
            }
        }
        j
    }

    /// Builds an entry after validating parameters and initial state.
    pub fn entry(&self, id: ModelId, theta: Vec<f64>, x0: Vec<f64>, horizon: f64, notes: &str) -> Result<ZooEntry> {
        let form = *self;
        let spec = self.spec();
        positive_params(spec.param_names(), &theta)?;
        if let Some(i) = self.k_index() {
            if theta[i] > 1.0 {
                return Err(invalid("k", format!("must lie in (0, 1], got {}", theta[i])));
            }
        }
        spec.check_dims(&x0, &theta)?;
        let n_total = match self.n_index() {
            Some(i) => theta[i],
            None => x0[0] + x0[1],
        };
        let scales = vec![n_total; spec.n_states()];
        let pscales = theta.iter().map(|v| v.abs()).collect();
        let spec = spec.with_scales(scales, pscales);
        let admissible: super::Admissible = Arc::new(move |x, p| {
            if !nonnegative(x) {
                return false;
            }
            match form.n_index() {
                Some(i) => x[0] + x[1] <= p[i] * (1.0 + 1e-9),
                None => true,
            }
        });
        let default_total = n_total;
        let sampler: super::Sampler = Arc::new(move |rng: &mut dyn RngCore, p: &[f64]| {
            let total = form.n_index().map(|i| p[i]).unwrap_or(default_total);
            let s = rng.gen_range(0.05..0.95) * total;
            let i = rng.gen_range(0.01..1.0) * (total - s);
            let mut x = vec![s, i];
            if form.n_states() == 3 {
                x.push(rng.gen_range(0.0..0.5) * total);
            }
            x
        });
        let units = {
            let mut u = vec![
                match self.incidence {
                    Incidence::Normalized => "1/time",
                    Incidence::MassAction => "1/(individual·time)",
                },
                "1/time",
            ];
            if self.n_index().is_some() {
                u.push("individuals");
            }
            if self.k_index().is_some() {
                u.push("dimensionless");
            }
            u
        };
        let set = match self.n_index() {
            Some(_) => "S, I (and C) >= 0, S + I <= N",
            None => "S, I >= 0",
        };
        Ok(ZooEntry::new(id, spec, theta, &units, x0, horizon, set, notes, admissible, sampler))
    }
}

struct SirEq(SirForm);

impl Equations for SirEq {
    fn rhs<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        let form = &self.0;
        let inc = form.incidence(x, p);
        let gamma = p[1].clone();
        let mut v = vec![-inc.clone(), inc.clone() - gamma.clone() * x[1].clone()];
        match form.output {
            SirOutput::Prevalence => {}
            SirOutput::CumulativeIncidence => v.push(form.k(p) * inc),
            SirOutput::CumulativeRemoved => v.push(form.k(p) * gamma * x[1].clone()),
        }
        v
    }

    fn output<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        match self.0.output {
            SirOutput::Prevalence => vec![self.0.k(p) * x[1].clone()],
            _ => vec![x[2].clone()],
        }
    }
}

/// Classical SIR with `y = k I`; parameters `(β, γ, N, k)`.
pub fn sir_classical(beta: f64, gamma: f64, n: f64, k: f64) -> Result<ZooEntry> {
    let form = SirForm {
        incidence: Incidence::Normalized,
        gain: Gain::Fixed,
        output: SirOutput::Prevalence,
    };
    form.entry(
        ModelId::SirClassical,
        vec![beta, gamma, n, k],
        vec![n - 1.0, 1.0],
        14.0,
        "Kermack-McKendrick SIR with a fraction k of the infectious observed",
    )
}

/// Classical SIR observed through `y = γ I`; parameters `(β, γ, N)`.
pub fn sir_classical_rate(beta: f64, gamma: f64, n: f64) -> Result<ZooEntry> {
    let form = SirForm {
        incidence: Incidence::Normalized,
        gain: Gain::Gamma,
        output: SirOutput::Prevalence,
    };
    form.entry(
        ModelId::SirClassical,
        vec![beta, gamma, n],
        vec![n - 1.0, 1.0],
        14.0,
        "SIR observed through the removal rate γI",
    )
}

/// SIR with cumulative incidence `Ċ = kβSI/N`, `y = C`.
pub fn sir_cumulative(beta: f64, gamma: f64, n: f64, k: f64) -> Result<ZooEntry> {
    let form = SirForm {
        incidence: Incidence::Normalized,
        gain: Gain::Fixed,
        output: SirOutput::CumulativeIncidence,
    };
    form.entry(
        ModelId::SirCumulative,
        vec![beta, gamma, n, k],
        vec![n - 1.0, 1.0, 0.0],
        14.0,
        "SIR observed through the cumulative number of cases",
    )
}

/// Rate form of the removed count: mass-action incidence `β̃SI` and `y = γI`.
///
/// Parameters `(β̃, γ)`; the initial state `(S0, I0)` is usually estimated.
pub fn sir_cumulative_rate(beta_tilde: f64, gamma: f64, s0: f64, i0: f64) -> Result<ZooEntry> {
    require_positive("S0", s0)?;
    require_positive("I0", i0)?;
    let form = SirForm {
        incidence: Incidence::MassAction,
        gain: Gain::Gamma,
        output: SirOutput::Prevalence,
    };
    form.entry(
        ModelId::SirCumulativeRate,
        vec![beta_tilde, gamma],
        vec![s0, i0],
        30.0,
        "SIR with mass-action incidence observed through deaths per unit time γI",
    )
}

/// SIR observed through the cumulative number of removed, `Ċ = γI`, `y = C`.
///
/// Parameters `(β, γ, N, k)` with `k = 1`.
pub fn sir_recovered(beta: f64, gamma: f64, n: f64) -> Result<ZooEntry> {
    let form = SirForm {
        incidence: Incidence::Normalized,
        gain: Gain::Fixed,
        output: SirOutput::CumulativeRemoved,
    };
    form.entry(
        ModelId::SirRecovered,
        vec![beta, gamma, n, 1.0],
        vec![n - 10.0, 10.0, 0.0],
        120.0,
        "SIR observed through the cumulative number of recovered",
    )
}

struct DemographyEq;

impl Equations for DemographyEq {
    fn rhs<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        let (s, i, r) = (x[0].clone(), x[1].clone(), x[2].clone());
        let (beta, gamma, mu, n) = (p[0].clone(), p[1].clone(), p[2].clone(), p[3].clone());
        let inc = beta * s.clone() * i.clone() / n.clone();
        vec![
            mu.clone() * n - inc.clone() - mu.clone() * s,
            inc - (gamma.clone() + mu.clone()) * i.clone(),
            gamma * i - mu * r,
        ]
    }

    fn output<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        vec![p[4].clone() * x[1].clone()]
    }
}

/// SIR with births and deaths at rate μ; parameters `(β, γ, μ, N, k)`, `y = k I`.
pub fn sir_demography(beta: f64, gamma: f64, mu: f64, n: f64) -> Result<ZooEntry> {
    let theta = vec![beta, gamma, mu, n, 1.0];
    let spec = ModelSpec::autonomous("sir-demography", 3, 5, 1, DemographyEq)
        .with_names(&["S", "I", "R"], &["beta", "gamma", "mu", "N", "k"], &["y"])
        .with_state_jacobians(
            Arc::new(|_t, x, p| {
                let (s, i) = (x[0], x[1]);
                let (beta, gamma, mu, n) = (p[0], p[1], p[2], p[3]);
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        -beta * i / n - mu,
                        -beta * s / n,
                        0.0,
                        beta * i / n,
                        beta * s / n - gamma - mu,
                        0.0,
                        0.0,
                        gamma,
                        -mu,
                    ],
                )
            }),
            Arc::new(|_t, _x, p| DMatrix::from_row_slice(1, 3, &[0.0, p[4], 0.0])),
        )
        .with_param_jacobians(
            Arc::new(|_t, x, p| {
                let (s, i, r) = (x[0], x[1], x[2]);
                let (beta, mu, n) = (p[0], p[2], p[3]);
                let si = s * i;
                DMatrix::from_row_slice(
                    3,
                    5,
                    &[
                        -si / n,
                        0.0,
                        n - s,
                        mu + beta * si / (n * n),
                        0.0,
                        si / n,
                        -i,
                        -i,
                        -beta * si / (n * n),
                        0.0,
                        0.0,
                        i,
                        -r,
                        0.0,
                        0.0,
                    ],
                )
            }),
            Arc::new(|_t, x, _p| DMatrix::from_row_slice(1, 5, &[0.0, 0.0, 0.0, 0.0, x[1]])),
        );
    positive_params(spec.param_names(), &theta)?;
    let spec = spec.with_scales(vec![n; 3], theta.iter().map(|v| v.abs()).collect());
    Ok(ZooEntry::new(
        ModelId::SirDemography,
        spec,
        theta,
        &["1/time", "1/time", "1/time", "individuals", "dimensionless"],
        vec![n - 10.0, 10.0, 0.0],
        100.0,
        "S, I, R >= 0",
        "SIR with renewal rate μ and constant population",
        Arc::new(|x, _p| nonnegative(x)),
        Arc::new(|rng: &mut dyn RngCore, p: &[f64]| {
            let n = p[3];
            let s = rng.gen_range(0.05..0.95) * n;
            let i = rng.gen_range(0.01..1.0) * (n - s);
            vec![s, i, n - s - i]
        }),
    ))
}

/// SIR with time-varying transmission β(t) and recovery ρ(t), births ν and deaths μ.
///
/// Parameters `(ν, μ, N)`; outputs `(I, ρ(t) I)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluctuatingSir {
    pub beta: Signal,
    pub rho: Signal,
    pub nu: f64,
    pub mu: f64,
    pub n: f64,
    pub x0: Vec<f64>,
    pub horizon: f64,
}

impl FluctuatingSir {
    /// β(t) ∈ [0.32, 0.48], ρ(t) ∈ [0.16, 0.24], ν = μ = 0.05, N = 1000.
    pub fn standard(seed: u64) -> Self {
        let horizon = 200.0;
        FluctuatingSir {
            beta: Signal::Piecewise(PiecewiseConstant::seeded(seed.wrapping_mul(2).wrapping_add(101), 0.32, 0.48, 1.0, horizon)),
            rho: Signal::Piecewise(PiecewiseConstant::seeded(seed.wrapping_mul(2).wrapping_add(102), 0.16, 0.24, 1.0, horizon)),
            nu: 0.05,
            mu: 0.05,
            n: 1000.0,
            x0: vec![990.0, 10.0, 0.0],
            horizon,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        vec![self.nu, self.mu, self.n]
    }

    pub fn entry(&self) -> ZooEntry {
        let beta = self.beta.clone();
        let rho = self.rho.clone();
        let (b1, r1, r2, r3, r4) = (beta.clone(), rho.clone(), rho.clone(), rho.clone(), rho);
        let (b2, b3) = (beta.clone(), beta);
        let f = Arc::new(move |t: f64, x: &[f64], p: &[f64]| {
            let (s, i, r) = (x[0], x[1], x[2]);
            let (nu, mu, n) = (p[0], p[1], p[2]);
            let inc = b1.eval(t) * s * i / n;
            let rt = r1.eval(t);
            DVector::from_vec(vec![nu * n - inc - mu * s, inc - rt * i - mu * i, rt * i - mu * r])
        });
        let h = Arc::new(move |t: f64, x: &[f64], _p: &[f64]| DVector::from_vec(vec![x[1], r2.eval(t) * x[1]]));
        let spec = ModelSpec::new("sir-fluctuating", 3, 3, 2, f, h)
            .with_names(&["S", "I", "R"], &["nu", "mu", "N"], &["y1", "y2"])
            .with_time_varying(!(self.beta.is_constant() && self.rho.is_constant()))
            .with_state_jacobians(
                Arc::new(move |t, x, p| {
                    let (s, i) = (x[0], x[1]);
                    let (mu, n) = (p[1], p[2]);
                    let b = b2.eval(t) / n;
                    let rt = r3.eval(t);
                    DMatrix::from_row_slice(
                        3,
                        3,
                        &[-b * i - mu, -b * s, 0.0, b * i, b * s - rt - mu, 0.0, 0.0, rt, -mu],
                    )
                }),
                Arc::new(move |t, _x, _p| {
                    DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, r4.eval(t), 0.0])
                }),
            )
            .with_param_jacobians(
                Arc::new(move |t, x, p| {
                    let (s, i, r) = (x[0], x[1], x[2]);
                    let (nu, n) = (p[0], p[2]);
                    let bsi = b3.eval(t) * s * i / (n * n);
                    DMatrix::from_row_slice(3, 3, &[n, -s, nu + bsi, 0.0, -i, -bsi, 0.0, -r, 0.0])
                }),
                Arc::new(|_t, _x, _p| DMatrix::zeros(2, 3)),
            )
            .with_scales(vec![self.n; 3], vec![self.nu, self.mu, self.n]);
        let total = self.n;
        ZooEntry::new(
            ModelId::SirFluctuating,
            spec,
            self.theta(),
            &["1/time", "1/time", "individuals"],
            self.x0.clone(),
            self.horizon,
            "S, I, R >= 0",
            "SIR with fluctuating transmission and recovery rates, births and deaths",
            Arc::new(|x, _p| nonnegative(x)),
            Arc::new(move |rng: &mut dyn RngCore, _p: &[f64]| {
                let s = rng.gen_range(0.05..0.95) * total;
                let i = rng.gen_range(0.01..1.0) * (total - s);
                vec![s, i, total - s - i]
            }),
        )
    }
}

/// Fluctuating SIR from explicit signals.
pub fn sir_fluctuating(beta: Signal, rho: Signal, nu: f64, mu: f64, n: f64) -> Result<ZooEntry> {
    for (name, v) in [("nu", nu), ("mu", mu), ("N", n)] {
        require_positive(name, v)?;
    }
    for (name, s) in [("beta", &beta), ("rho", &rho)] {
        let (lo, _) = s.range();
        if !(lo > 0.0) {
            return Err(invalid(name, "signal must stay positive"));
        }
    }
    let mut model = FluctuatingSir::standard(0);
    model.beta = beta;
    model.rho = rho;
    model.nu = nu;
    model.mu = mu;
    model.n = n;
    model.x0 = vec![n * 0.99, n * 0.01, 0.0];
    Ok(model.entry())
}
