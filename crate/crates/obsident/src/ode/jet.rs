//! Truncated Taylor series in time whose coefficients carry a gradient.
//!
//! A `Jet` of order `k` and dimension `d` stores `k + 1` coefficients
//! `c_0 + c_1 t + ... + c_k t^k`; each coefficient is a value together with
//! its gradient with respect to `d` seed variables. Model equations written
//! against [`Scalar`] can therefore be evaluated on plain `f64` or on jets.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed to evaluate a rational vector field.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant with the same shape as `self`.
    fn constant_like(&self, v: f64) -> Self;
}

impl Scalar for f64 {
    fn constant_like(&self, v: f64) -> Self {
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Jet {
    pub fn zero(order: usize, dim: usize) -> Self {
        Jet {
            order,
            dim,
            data: vec![0.0; (order + 1) * (dim + 1)],
        }
    }

    pub fn constant(order: usize, dim: usize, v: f64) -> Self {
        let mut j = Jet::zero(order, dim);
        j.data[0] = v;
        j
    }

    /// Seed variable `index`: value `v`, unit gradient along `index`.
    pub fn variable(order: usize, dim: usize, v: f64, index: usize) -> Self {
        let mut j = Jet::constant(order, dim, v);
        j.data[1 + index] = 1.0;
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn stride(&self) -> usize {
        self.dim + 1
    }

    /// Value of the Taylor coefficient of `t^j`.
    pub fn value(&self, j: usize) -> f64 {
        self.data[j * self.stride()]
    }

    /// Gradient of the Taylor coefficient of `t^j`.
    pub fn gradient(&self, j: usize) -> &[f64] {
        let s = self.stride();
        &self.data[j * s + 1..(j + 1) * s]
    }

    /// Coefficient `j` as a (value, gradient) slice.
    pub fn coefficient(&self, j: usize) -> &[f64] {
        let s = self.stride();
        &self.data[j * s..(j + 1) * s]
    }

    pub fn set_coefficient(&mut self, j: usize, coef: &[f64]) {
        let s = self.stride();
        self.data[j * s..(j + 1) * s].copy_from_slice(coef);
    }

    fn check_shape(&self, other: &Jet) {
        assert!(
            self.order == other.order && self.dim == other.dim,
            "jet shape mismatch: ({}, {}) vs ({}, {})",
            self.order,
            self.dim,
            other.order,
            other.dim
        );
    }
}

impl Scalar for Jet {
    fn constant_like(&self, v: f64) -> Self {
        Jet::constant(self.order, self.dim, v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.check_shape(&rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.check_shape(&rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for a in &mut self.data {
            *a = -*a;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.check_shape(&rhs);
        let s = self.stride();
        let mut out = Jet::zero(self.order, self.dim);
        for j in 0..=self.order {
            let o = &mut out.data[j * s..(j + 1) * s];
            for i in 0..=j {
                let a = &self.data[i * s..(i + 1) * s];
                let b = &rhs.data[(j - i) * s..(j - i + 1) * s];
                o[0] += a[0] * b[0];
                for q in 1..s {
                    o[q] += a[0] * b[q] + b[0] * a[q];
                }
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self.check_shape(&rhs);
        let s = self.stride();
        let mut out = Jet::zero(self.order, self.dim);
        let w = &rhs.data[0..s];
        let mut acc = vec![0.0; s];
        for j in 0..=self.order {
            acc.copy_from_slice(&self.data[j * s..(j + 1) * s]);
            for i in 0..j {
                let q = &out.data[i * s..(i + 1) * s];
                let b = &rhs.data[(j - i) * s..(j - i + 1) * s];
                acc[0] -= q[0] * b[0];
                for r in 1..s {
                    acc[r] -= q[0] * b[r] + b[0] * q[r];
                }
            }
            let v = acc[0] / w[0];
            let o = &mut out.data[j * s..(j + 1) * s];
            o[0] = v;
            for r in 1..s {
                o[r] = (acc[r] - v * w[r]) / w[0];
            }
        }
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.data[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.data[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for a in &mut self.data {
            *a *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(mut self, rhs: f64) -> Jet {
        for a in &mut self.data {
            *a /= rhs;
        }
        self
    }
}
