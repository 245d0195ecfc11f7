//! Stage- and age-structured population models.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::signal::{PiecewiseConstant, Signal};
use super::{nonnegative, positive_params, ModelId, ZooEntry};
use crate::error::{invalid, Result};
use crate::ode::{Equations, ModelSpec, Scalar};

/// Three-stage population with reproduction `r(t, x3) = r̄(t)·x3/(k + x3)` and `y = x3`.
///
/// Parameters `(a1, a2, m1, m2, m3, k)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThreeStage {
    pub a1: f64,
    pub a2: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub k: f64,
    pub rbar: Signal,
    pub x0: Vec<f64>,
    pub horizon: f64,
}

impl ThreeStage {
    /// `a1 = a2 = 0.1`, `m1 = 0.05`, `m2 = m3 = 0.07`, `k = 1`, r̄(t) ∈ [0.9, 1.1].
    pub fn standard(seed: u64) -> Self {
        let horizon = 150.0;
        ThreeStage {
            a1: 0.1,
            a2: 0.1,
            m1: 0.05,
            m2: 0.07,
            m3: 0.07,
            k: 1.0,
            rbar: Signal::Piecewise(PiecewiseConstant::seeded(seed.wrapping_add(301), 0.9, 1.1, 1.0, horizon)),
            x0: vec![2.0, 2.0, 2.0],
            horizon,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        vec![self.a1, self.a2, self.m1, self.m2, self.m3, self.k]
    }

    /// Linear part `A`.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        a_matrix(&self.theta())
    }

    /// Output row `C = [0, 0, 1]`.
    pub fn c_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0])
    }

    /// Output injection `Φ(t, y) = (r(t, y), 0, 0)`.
    pub fn phi(&self, t: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![self.rbar.eval(t) * y / (self.k + y), 0.0, 0.0])
    }

    pub fn entry(&self) -> ZooEntry {
        let (r1, r2, r3) = (self.rbar.clone(), self.rbar.clone(), self.rbar.clone());
        let f = Arc::new(move |t: f64, x: &[f64], p: &[f64]| {
            let mut v = a_matrix(p) * DVector::from_column_slice(x);
            v[0] += r1.eval(t) * x[2] / (p[5] + x[2]);
            v
        });
        let h = Arc::new(|_t: f64, x: &[f64], _p: &[f64]| DVector::from_vec(vec![x[2]]));
        let spec = ModelSpec::new("three-stage", 3, 6, 1, f, h)
            .with_names(&["x1", "x2", "x3"], &["a1", "a2", "m1", "m2", "m3", "k"], &["y"])
            .with_time_varying(!self.rbar.is_constant())
            .with_state_jacobians(
                Arc::new(move |t, x, p| {
                    let mut j = a_matrix(p);
                    let d = p[5] + x[2];
                    j[(0, 2)] += r2.eval(t) * p[5] / (d * d);
                    j
                }),
                Arc::new(|_t, _x, _p| DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 1.0])),
            )
            .with_param_jacobians(
                Arc::new(move |t, x, p| {
                    let d = p[5] + x[2];
                    DMatrix::from_row_slice(
                        3,
                        6,
                        &[
                            -x[0],
                            0.0,
                            -x[0],
                            0.0,
                            0.0,
                            -r3.eval(t) * x[2] / (d * d),
                            x[0],
                            -x[1],
                            0.0,
                            -x[1],
                            0.0,
                            0.0,
                            0.0,
                            x[1],
                            0.0,
                            0.0,
                            -x[2],
                            0.0,
                        ],
                    )
                }),
                Arc::new(|_t, _x, _p| DMatrix::zeros(1, 6)),
            )
            .with_scales(vec![1.0; 3], self.theta());
        ZooEntry::new(
            ModelId::ThreeStage,
            spec,
            self.theta(),
            &["1/time", "1/time", "1/time", "1/time", "1/time", "individuals"],
            self.x0.clone(),
            self.horizon,
            "x1, x2, x3 >= 0",
            "three-stage structured population with saturating reproduction",
            Arc::new(|x, _p| nonnegative(x)),
            Arc::new(|rng: &mut dyn RngCore, _p: &[f64]| (0..3).map(|_| rng.gen_range(0.0..10.0)).collect()),
        )
    }
}

fn a_matrix(p: &[f64]) -> DMatrix<f64> {
    let (a1, a2, m1, m2, m3) = (p[0], p[1], p[2], p[3], p[4]);
    DMatrix::from_row_slice(
        3,
        3,
        &[-(a1 + m1), 0.0, 0.0, a1, -(a2 + m2), 0.0, 0.0, a2, -m3],
    )
}

/// Three-stage model with a given reproduction modulation r̄(t) and `k = 1`.
pub fn three_stage(a1: f64, a2: f64, m1: f64, m2: f64, m3: f64, rbar: Signal) -> Result<ZooEntry> {
    let mut m = ThreeStage::standard(0);
    m.a1 = a1;
    m.a2 = a2;
    m.m1 = m1;
    m.m2 = m2;
    m.m3 = m3;
    m.rbar = rbar;
    positive_params(
        &["a1", "a2", "m1", "m2", "m3"].map(String::from),
        &[a1, a2, m1, m2, m3],
    )?;
    let (lo, _) = m.rbar.range();
    if lo < 0.0 {
        return Err(invalid("rbar", "reproduction modulation must be nonnegative"));
    }
    Ok(m.entry())
}

/// Five age classes; parameters `(α, β, m1, m2)`, output `y = x_j`.
#[derive(Clone, Copy, Debug)]
pub struct FiveClassAge {
    pub channel: usize,
}

impl FiveClassAge {
    pub fn a_matrix(theta: &[f64]) -> DMatrix<f64> {
        let (al, be, m1, m2) = (theta[0], theta[1], theta[2], theta[3]);
        DMatrix::from_row_slice(
            5,
            5,
            &[
                -al, 0.0, 0.0, be, 0.0, //
                al / 2.0, -al - m1, 0.0, 0.0, 0.0, //
                al / 2.0, 0.0, -al - m1, 0.0, 0.0, //
                0.0, al, 0.0, -m2, 0.0, //
                0.0, 0.0, al, 0.0, -m2,
            ],
        )
    }

    pub fn c_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(1, 5);
        c[(0, self.channel)] = 1.0;
        c
    }
}

impl Equations for FiveClassAge {
    fn rhs<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        let (al, be, m1, m2) = (p[0].clone(), p[1].clone(), p[2].clone(), p[3].clone());
        let half = al.clone() / 2.0;
        vec![
            be * x[3].clone() - al.clone() * x[0].clone(),
            half.clone() * x[0].clone() - (al.clone() + m1.clone()) * x[1].clone(),
            half * x[0].clone() - (al.clone() + m1) * x[2].clone(),
            al.clone() * x[1].clone() - m2.clone() * x[3].clone(),
            al * x[2].clone() - m2 * x[4].clone(),
        ]
    }

    fn output<T: Scalar>(&self, x: &[T], _p: &[T]) -> Vec<T> {
        vec![x[self.channel].clone()]
    }
}

/// Five-class age model observed on class `channel` (0-based).
pub fn five_class_age(alpha: f64, beta: f64, m1: f64, m2: f64, channel: usize) -> Result<ZooEntry> {
    if channel >= 5 {
        return Err(invalid("channel", format!("must be in 0..5, got {channel}")));
    }
    let theta = vec![alpha, beta, m1, m2];
    let model = FiveClassAge { channel };
    let spec = ModelSpec::autonomous("five-class-age", 5, 4, 1, model)
        .with_names(&["x1", "x2", "x3", "x4", "x5"], &["alpha", "beta", "m1", "m2"], &["y"])
        .with_state_jacobians(
            Arc::new(|_t, _x, p| FiveClassAge::a_matrix(p)),
            Arc::new(move |_t, _x, _p| model.c_matrix()),
        )
        .with_param_jacobians(
            Arc::new(|_t, x, _p| {
                DMatrix::from_row_slice(
                    5,
                    4,
                    &[
                        -x[0], x[3], 0.0, 0.0, //
                        x[0] / 2.0 - x[1], 0.0, -x[1], 0.0, //
                        x[0] / 2.0 - x[2], 0.0, -x[2], 0.0, //
                        x[1], 0.0, 0.0, -x[3], //
                        x[2], 0.0, 0.0, -x[4],
                    ],
                )
            }),
            Arc::new(|_t, _x, _p| DMatrix::zeros(1, 4)),
        );
    positive_params(spec.param_names(), &theta)?;
    let spec = spec.with_scales(vec![1.0; 5], theta.clone());
    Ok(ZooEntry::new(
        ModelId::FiveClassAge,
        spec,
        theta,
        &["1/time", "1/time", "1/time", "1/time"],
        vec![10.0, 5.0, 5.0, 8.0, 8.0],
        50.0,
        "x >= 0",
        "population in five age classes with a selectable observed class",
        Arc::new(|x, _p| nonnegative(x)),
        Arc::new(|rng: &mut dyn RngCore, _p: &[f64]| (0..5).map(|_| rng.gen_range(0.0..20.0)).collect()),
    ))
}
