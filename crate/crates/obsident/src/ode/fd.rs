//! Central finite differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Step used for coordinate `i`: `cbrt(ε)·max(|x_i|, scale_i)`.
pub fn fd_step(x: f64, scale: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(scale)
}

fn scale_at(scales: &[f64], i: usize) -> f64 {
    scales.get(i).copied().unwrap_or(1.0)
}

/// Jacobian of `map` at `point` by central differences.
///
/// `scales` gives per-coordinate step floors; missing entries default to 1.
pub fn finite_diff_jacobian<F>(map: F, point: &[f64], scales: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let n = point.len();
    let mut z = point.to_vec();
    let mut jac: Option<DMatrix<f64>> = None;
    for i in 0..n {
        let h = fd_step(point[i], scale_at(scales, i));
        z[i] = point[i] + h;
        let plus = map(&z);
        z[i] = point[i] - h;
        let minus = map(&z);
        z[i] = point[i];
        let width = (point[i] + h) - (point[i] - h);
        if plus.iter().chain(minus.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: format!("finite difference along coordinate {i}"),
            });
        }
        let jac = jac.get_or_insert_with(|| DMatrix::zeros(plus.len(), n));
        jac.set_column(i, &((plus - minus) / width));
    }
    match jac {
        Some(j) => Ok(j),
        None => Ok(DMatrix::zeros(map(point).len(), 0)),
    }
}
