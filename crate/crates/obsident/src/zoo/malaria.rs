//! Within-host malaria model with five stages of infected erythrocytes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{nonnegative, positive_params, ModelId, ZooEntry};
use crate::error::Result;
use crate::ode::{Equations, ModelSpec, Scalar};

/// State `(S, I1, ..., I5, M)`; parameters
/// `(Λ, μS, μ1..μ5, γ1..γ5, r, μM, β)`; output `y = I1 + I2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MalariaParams {
    pub lambda: f64,
    pub mu_s: f64,
    pub mu: [f64; 5],
    pub gamma: [f64; 5],
    pub r: f64,
    pub mu_m: f64,
    pub beta: f64,
    pub x0: Vec<f64>,
    pub horizon: f64,
}

impl Default for MalariaParams {
    /// Day time unit, cells per microlitre: 120-day erythrocyte lifespan,
    /// 48-hour cycle split over five stages, 16 merozoites per schizont.
    fn default() -> Self {
        let mu_s = 1.0 / 120.0;
        MalariaParams {
            lambda: mu_s * 5.0e6,
            mu_s,
            mu: [mu_s; 5],
            gamma: [2.5; 5],
            r: 16.0,
            mu_m: 48.0,
            beta: 2.0e-6,
            x0: vec![5.0e6, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0e4],
            horizon: 60.0,
        }
    }
}

pub(crate) const N_PARAMS: usize = 15;

fn unpack(p: &[f64]) -> MalariaParams {
    MalariaParams {
        lambda: p[0],
        mu_s: p[1],
        mu: [p[2], p[3], p[4], p[5], p[6]],
        gamma: [p[7], p[8], p[9], p[10], p[11]],
        r: p[12],
        mu_m: p[13],
        beta: p[14],
        x0: vec![],
        horizon: 0.0,
    }
}

impl MalariaParams {
    pub fn theta(&self) -> Vec<f64> {
        let mut v = vec![self.lambda, self.mu_s];
        v.extend_from_slice(&self.mu);
        v.extend_from_slice(&self.gamma);
        v.extend_from_slice(&[self.r, self.mu_m, self.beta]);
        v
    }

    pub fn from_theta(theta: &[f64]) -> Self {
        let mut m = unpack(theta);
        let d = MalariaParams::default();
        m.x0 = d.x0;
        m.horizon = d.horizon;
        m
    }

    /// Linear part `A` of `ẋ = A x + β S M E + Λ e1`.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(7, 7);
        a[(0, 0)] = -self.mu_s;
        for i in 0..5 {
            a[(i + 1, i + 1)] = -(self.gamma[i] + self.mu[i]);
            if i > 0 {
                a[(i + 1, i)] = self.gamma[i - 1];
            }
        }
        a[(6, 5)] = self.r * self.gamma[4];
        a[(6, 6)] = -self.mu_m;
        a
    }

    pub fn e_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0])
    }

    pub fn e1(&self) -> DVector<f64> {
        let mut v = DVector::zeros(7);
        v[0] = 1.0;
        v
    }

    pub fn c_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 7, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// `Ā = A − E C A`.
    pub fn a_bar(&self) -> DMatrix<f64> {
        let a = self.a_matrix();
        let e = self.e_vector();
        &a - &e * (self.c_matrix() * &a)
    }

    pub fn entry(&self) -> ZooEntry {
        let theta = self.theta();
        let spec = ModelSpec::autonomous("malaria", 7, N_PARAMS, 1, MalariaEq)
            .with_names(
                &["S", "I1", "I2", "I3", "I4", "I5", "M"],
                &[
                    "Lambda", "mu_S", "mu_1", "mu_2", "mu_3", "mu_4", "mu_5", "gamma_1", "gamma_2",
                    "gamma_3", "gamma_4", "gamma_5", "r", "mu_M", "beta",
                ],
                &["y"],
            )
            .with_state_jacobians(
                Arc::new(|_t, x, p| {
                    let m = unpack(p);
                    let mut j = m.a_matrix();
                    let e = m.e_vector();
                    for row in 0..7 {
                        j[(row, 0)] += m.beta * x[6] * e[row];
                        j[(row, 6)] += m.beta * x[0] * e[row];
                    }
                    j
                }),
                Arc::new(|_t, _x, _p| DMatrix::from_row_slice(1, 7, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0])),
            )
            .with_param_jacobians(
                Arc::new(|_t, x, p| {
                    let m = unpack(p);
                    let mut j = DMatrix::zeros(7, N_PARAMS);
                    j[(0, 0)] = 1.0;
                    j[(0, 1)] = -x[0];
                    for i in 0..5 {
                        j[(i + 1, 2 + i)] = -x[i + 1];
                        j[(i + 1, 7 + i)] = -x[i + 1];
                        if i < 4 {
                            j[(i + 2, 7 + i)] = x[i + 1];
                        }
                    }
                    j[(6, 11)] = m.r * x[5];
                    j[(6, 12)] = m.gamma[4] * x[5];
                    j[(6, 13)] = -x[6];
                    let sm = x[0] * x[6];
                    j[(0, 14)] = -sm;
                    j[(1, 14)] = sm;
                    j[(6, 14)] = -sm;
                    j
                }),
                Arc::new(|_t, _x, _p| DMatrix::zeros(1, N_PARAMS)),
            );
        let spec = spec.with_scales(
            vec![5.0e6, 1e4, 1e4, 1e4, 1e4, 1e4, 1e4],
            theta.iter().map(|v| v.abs()).collect(),
        );
        ZooEntry::new(
            ModelId::Malaria,
            spec,
            theta,
            &[
                "cells/(µL·day)",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "1/day",
                "merozoites/cell",
                "1/day",
                "µL/(cell·day)",
            ],
            self.x0.clone(),
            self.horizon,
            "all concentrations >= 0",
            "within-host malaria dynamics; I1 + I2 visible on blood smears",
            Arc::new(|x, _p| nonnegative(x)),
            Arc::new(|rng: &mut dyn RngCore, _p: &[f64]| {
                let mut x = vec![rng.gen_range(1.0e6..6.0e6)];
                x.extend((0..5).map(|_| rng.gen_range(0.0..1.0e5)));
                x.push(rng.gen_range(0.0..1.0e5));
                x
            }),
        )
    }
}

struct MalariaEq;

impl Equations for MalariaEq {
    fn rhs<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        let inf = p[14].clone() * x[0].clone() * x[6].clone();
        let mut v = Vec::with_capacity(7);
        v.push(p[0].clone() - p[1].clone() * x[0].clone() - inf.clone());
        v.push(inf.clone() - (p[7].clone() + p[2].clone()) * x[1].clone());
        for i in 1..5 {
            v.push(p[6 + i].clone() * x[i].clone() - (p[7 + i].clone() + p[2 + i].clone()) * x[i + 1].clone());
        }
        v.push(p[12].clone() * p[11].clone() * x[5].clone() - p[13].clone() * x[6].clone() - inf);
        v
    }

    fn output<T: Scalar>(&self, x: &[T], _p: &[T]) -> Vec<T> {
        vec![x[1].clone() + x[2].clone()]
    }
}

/// Malaria model from a full parameter vector (see [`MalariaParams`]).
pub fn malaria_intrahost(theta: &[f64]) -> Result<ZooEntry> {
    if theta.len() != N_PARAMS {
        return Err(crate::error::Error::Dimension(format!(
            "malaria needs {N_PARAMS} parameters, got {}",
            theta.len()
        )));
    }
    let m = MalariaParams::from_theta(theta);
    let e = m.entry();
    positive_params(e.spec.param_names(), theta)?;
    Ok(e)
}
