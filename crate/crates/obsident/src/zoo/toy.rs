//! Small linear and quadratic test systems.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::{nonnegative, positive_params, ModelId, ZooEntry};
use crate::error::Result;
use crate::ode::{Equations, ModelSpec, Scalar};

struct TwoCompartment;

impl Equations for TwoCompartment {
    fn rhs<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        vec![
            p[0].clone() * x[1].clone() - p[1].clone() * x[0].clone(),
            -(p[0].clone() * x[1].clone()),
        ]
    }

    fn output<T: Scalar>(&self, x: &[T], _p: &[T]) -> Vec<T> {
        vec![x[0].clone()]
    }
}

/// `ẋ1 = −a21 x1 + a12 x2`, `ẋ2 = −a12 x2`, `y = x1`; parameters `(a12, a21)`.
pub fn two_compartment(a12: f64, a21: f64) -> Result<ZooEntry> {
    let theta = vec![a12, a21];
    let spec = ModelSpec::autonomous("two-compartment", 2, 2, 1, TwoCompartment)
        .with_names(&["x1", "x2"], &["a12", "a21"], &["y"])
        .with_state_jacobians(
            Arc::new(|_t, _x, p| DMatrix::from_row_slice(2, 2, &[-p[1], p[0], 0.0, -p[0]])),
            Arc::new(|_t, _x, _p| DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
        )
        .with_param_jacobians(
            Arc::new(|_t, x, _p| DMatrix::from_row_slice(2, 2, &[x[1], -x[0], -x[1], 0.0])),
            Arc::new(|_t, _x, _p| DMatrix::zeros(1, 2)),
        );
    positive_params(spec.param_names(), &theta)?;
    let spec = spec.with_scales(vec![1.0; 2], theta.clone());
    Ok(ZooEntry::new(
        ModelId::TwoCompartment,
        spec,
        theta,
        &["1/time", "1/time"],
        vec![1.0, 0.0],
        20.0,
        "x1, x2 >= 0",
        "linear two-compartment exchange observed in the first compartment",
        Arc::new(|x, _p| nonnegative(x)),
        Arc::new(|rng: &mut dyn RngCore, _p: &[f64]| (0..2).map(|_| rng.gen_range(0.0..2.0)).collect()),
    ))
}

struct Academic;

impl Equations for Academic {
    fn rhs<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T> {
        let a = p[0].clone();
        vec![
            -(a.clone() * (x[0].clone() + x[1].clone())),
            a * (x[0].clone() - x[1].clone()),
        ]
    }

    fn output<T: Scalar>(&self, x: &[T], _p: &[T]) -> Vec<T> {
        vec![(x[0].clone() * x[0].clone() + x[1].clone() * x[1].clone()) * 0.5]
    }
}

/// `ẋ1 = −α(x1 + x2)`, `ẋ2 = α(x1 − x2)`, `y = (x1² + x2²)/2`.
///
/// Only the radius is observed; the angle never is.
pub fn academic_unobservable(alpha: f64) -> Result<ZooEntry> {
    let theta = vec![alpha];
    let spec = ModelSpec::autonomous("academic", 2, 1, 1, Academic)
        .with_names(&["x1", "x2"], &["alpha"], &["y"])
        .with_state_jacobians(
            Arc::new(|_t, _x, p| DMatrix::from_row_slice(2, 2, &[-p[0], -p[0], p[0], -p[0]])),
            Arc::new(|_t, x, _p| DMatrix::from_row_slice(1, 2, &[x[0], x[1]])),
        )
        .with_param_jacobians(
            Arc::new(|_t, x, _p| DMatrix::from_row_slice(2, 1, &[-(x[0] + x[1]), x[0] - x[1]])),
            Arc::new(|_t, _x, _p| DMatrix::zeros(1, 1)),
        );
    positive_params(spec.param_names(), &theta)?;
    let spec = spec.with_scales(vec![1.0; 2], theta.clone());
    Ok(ZooEntry::new(
        ModelId::Academic,
        spec,
        theta,
        &["1/time"],
        vec![1.0, 0.5],
        10.0,
        "R^2",
        "damped rotation observed through its energy",
        Arc::new(|x, _p| x.iter().all(|v| v.is_finite())),
        Arc::new(|rng: &mut dyn RngCore, _p: &[f64]| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()),
    ))
}
