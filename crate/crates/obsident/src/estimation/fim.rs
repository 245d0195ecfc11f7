//! Fisher information, covariance and confidence intervals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fit::{Dataset, FitResult, Problem};
use super::tdist::t_quantile;
use crate::error::{invalid, Error, Result};
use crate::ode::SolverOptions;

/// Condition number above which a report is flagged.
pub const ILL_CONDITIONED_FIM: f64 = 1e12;

/// `F = Σ_i χ_iᵀ χ_i / σ²`.
pub fn fim(chi: &[DMatrix<f64>], sigma2: f64) -> Result<DMatrix<f64>> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    let q = chi.first().map(|c| c.ncols()).unwrap_or(0);
    if q == 0 || chi.iter().any(|c| c.ncols() != q) {
        return Err(Error::Dimension("sensitivities must share a nonzero column count".into()));
    }
    let mut f = DMatrix::zeros(q, q);
    for c in chi {
        f += c.transpose() * c;
    }
    f /= sigma2;
    Ok((&f + f.transpose()) * 0.5)
}

/// Symmetric pseudo-inverse with relative rank tolerance `q·ε·λmax`.
fn sym_pinv(g: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let q = g.nrows();
    let eig = g.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = q as f64 * f64::EPSILON * lmax;
    let mut inv = DMatrix::zeros(q, q);
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > tol {
            rank += 1;
            let v = eig.eigenvectors.column(k);
            inv += v * v.transpose() / l;
        }
    }
    (inv, rank)
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// `F⁻¹` computed on the Jacobi-scaled matrix `D F D`, `D = diag(F)^{-1/2}`.
///
/// Returns the inverse and the numerical rank.
pub fn scaled_inverse(f: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let q = f.nrows();
    let d: Vec<f64> = (0..q)
        .map(|i| if f[(i, i)] > 0.0 { 1.0 / f[(i, i)].sqrt() } else { 1.0 })
        .collect();
    let g = DMatrix::from_fn(q, q, |i, j| d[i] * f[(i, j)] * d[j]);
    let (ginv, rank) = sym_pinv(&g);
    (DMatrix::from_fn(q, q, |i, j| d[i] * ginv[(i, j)] * d[j]), rank)
}

/// `λmax(F)·λmax(F⁻¹)`; infinite when `F` is rank deficient.
pub fn condition_number(f: &DMatrix<f64>) -> f64 {
    let (inv, rank) = scaled_inverse(f);
    if rank < f.nrows() {
        return f64::INFINITY;
    }
    lambda_max(f) * lambda_max(&inv)
}

/// Covariance, standard errors and t intervals for an estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FimReport {
    pub names: Vec<String>,
    pub estimate: Vec<f64>,
    pub sigma2: f64,
    pub fim: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub standard_errors: Vec<f64>,
    pub condition_number: f64,
    pub rank: usize,
    pub dof: i64,
    /// Two-sided confidence level.
    pub level: f64,
    pub t_quantile: f64,
    pub half_widths: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
    pub ill_conditioned: bool,
}

impl FimReport {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Builds intervals `θ̂ ± t_{dof}((1+level)/2)·√C_ii` from a FIM.
pub fn confidence_intervals(
    names: Vec<String>,
    estimate: Vec<f64>,
    fim: DMatrix<f64>,
    sigma2: f64,
    dof: i64,
    level: f64,
) -> Result<FimReport> {
    let q = estimate.len();
    if fim.nrows() != q || fim.ncols() != q || names.len() != q {
        return Err(Error::Dimension(format!("{q} unknowns but a {}×{} FIM", fim.nrows(), fim.ncols())));
    }
    if fim.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain { what: "FIM".into() });
    }
    if dof < 1 {
        return Err(invalid("dof", format!("must be at least 1, got {dof}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    let (covariance, rank) = scaled_inverse(&fim);
    let mut standard_errors = Vec::with_capacity(q);
    for i in 0..q {
        let v = covariance[(i, i)];
        let floor = 1e-12 * covariance.amax();
        if v < -floor {
            return Err(Error::NegativeVariance { index: i, value: v });
        }
        standard_errors.push(v.max(0.0).sqrt());
    }
    let condition_number = if rank < q {
        f64::INFINITY
    } else {
        lambda_max(&fim) * lambda_max(&covariance)
    };
    let tq = t_quantile(dof as f64, 0.5 * (1.0 + level))?;
    let half_widths: Vec<f64> = standard_errors.iter().map(|s| tq * s).collect();
    let intervals = estimate.iter().zip(&half_widths).map(|(e, h)| (e - h, e + h)).collect();
    Ok(FimReport {
        names,
        estimate,
        sigma2,
        fim,
        covariance,
        standard_errors,
        condition_number,
        rank,
        dof,
        level,
        t_quantile: tq,
        half_widths,
        intervals,
        ill_conditioned: condition_number > ILL_CONDITIONED_FIM,
    })
}

/// FIM of `problem` at unknowns `u`, summed over every data time.
pub fn fim_at(problem: &Problem, data: &Dataset, u: &[f64], sigma2: f64, opts: &SolverOptions) -> Result<DMatrix<f64>> {
    let chi = problem.sensitivities(u, data, opts)?;
    fim(&chi, sigma2)
}

/// 95% report at a fitted estimate with `σ² = σ̂²`.
pub fn fim_report(problem: &Problem, data: &Dataset, fit: &FitResult, opts: &SolverOptions) -> Result<FimReport> {
    report_at(problem, data, &fit.estimate, fit.sigma2_hat, 0.95, opts)
}

/// Report at arbitrary unknowns, noise variance and level.
pub fn report_at(
    problem: &Problem,
    data: &Dataset,
    u: &[f64],
    sigma2: f64,
    level: f64,
    opts: &SolverOptions,
) -> Result<FimReport> {
    let f = fim_at(problem, data, u, sigma2, opts)?;
    confidence_intervals(problem.names(), u.to_vec(), f, sigma2, problem.dof(data), level)
}
