//! Gain synthesis: pole placement, Vandermonde matrices and high-gain spectra.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observability::{linear_observability, observability_matrix};

/// Condition number of the observability matrix above which a gain is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Elementary symmetric functions `(σ1, …, σn)` of the given numbers.
pub fn symmetric_functions(lambda: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; lambda.len() + 1];
    e[0] = 1.0;
    for (k, &l) in lambda.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e.remove(0);
    e
}

fn symmetric_functions_complex(lambda: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut e = vec![Complex::new(0.0, 0.0); lambda.len() + 1];
    e[0] = Complex::new(1.0, 0.0);
    for (k, &l) in lambda.iter().enumerate() {
        for j in (1..=k + 1).rev() {
            let prev = e[j - 1];
            e[j] += l * prev;
        }
    }
    e.remove(0);
    e
}

/// Ascending coefficients `c0, …, c_{n−1}` of the monic polynomial `∏(ξ − λ)`.
///
/// Fails unless complex roots come in conjugate pairs.
pub fn characteristic_coefficients(spectrum: &[Complex<f64>]) -> Result<Vec<f64>> {
    let n = spectrum.len();
    let scale = spectrum.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for z in spectrum {
        if z.im != 0.0 {
            let partner = spectrum
                .iter()
                .filter(|w| (*w - z.conj()).norm() <= 1e-12 * scale)
                .count();
            let same = spectrum.iter().filter(|w| (*w - z).norm() <= 1e-12 * scale).count();
            if partner != same {
                return Err(crate::error::invalid("spectrum", format!("{z} has no conjugate partner")));
            }
        }
    }
    let sigma = symmetric_functions_complex(spectrum);
    // ∏(ξ − λ) = Σ_k (−1)^k σ_k ξ^{n−k}
    let mut c = vec![0.0; n];
    for k in 1..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        c[n - k] = sign * sigma[k - 1].re;
    }
    Ok(c)
}

/// Real spectrum as complex numbers.
pub fn real_spectrum(lambda: &[f64]) -> Vec<Complex<f64>> {
    lambda.iter().map(|&l| Complex::new(l, 0.0)).collect()
}

/// Largest distance between matched eigenvalues, matching greedily by proximity.
pub fn spectrum_mismatch(assigned: &[Complex<f64>], achieved: &[Complex<f64>]) -> f64 {
    let mut left: Vec<Complex<f64>> = achieved.to_vec();
    let mut worst: f64 = 0.0;
    for a in assigned {
        let Some((k, d)) = left
            .iter()
            .enumerate()
            .map(|(k, b)| (k, (a - b).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
        else {
            return f64::INFINITY;
        };
        worst = worst.max(d);
        left.swap_remove(k);
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GainVector {
    pub g: DVector<f64>,
    /// `(re, im)` pairs.
    pub assigned_spectrum: Vec<(f64, f64)>,
    /// Change of basis to the companion form.
    pub transform_p: DMatrix<f64>,
    /// Largest eigenvalue mismatch of `A + G C` found at construction.
    pub achieved_error: f64,
    pub observability_condition: f64,
    /// Observability matrix condition number above [`ILL_CONDITIONED`].
    pub ill_conditioned: bool,
}

impl GainVector {
    pub fn spectrum(&self) -> Vec<Complex<f64>> {
        self.assigned_spectrum.iter().map(|&(re, im)| Complex::new(re, im)).collect()
    }
}

/// Gain `G` with `Sp(A + G C) = spectrum` for a single-output pair.
pub fn pole_place_gain(a: &DMatrix<f64>, c: &DMatrix<f64>, spectrum: &[Complex<f64>]) -> Result<GainVector> {
    let n = a.nrows();
    if c.nrows() != 1 {
        return Err(Error::Dimension(format!("C must have one row, got {}", c.nrows())));
    }
    if spectrum.len() != n {
        return Err(Error::Dimension(format!("spectrum has {} values for n = {n}", spectrum.len())));
    }
    let report = linear_observability(a, c)?;
    if !report.full_rank {
        return Err(Error::NotObservable {
            rank: report.numerical_rank,
            n,
        });
    }
    let coeffs = characteristic_coefficients(spectrum)?;
    let o = observability_matrix(a, c)?;
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    let l = o
        .lu()
        .solve(&e_n)
        .ok_or_else(|| Error::Singular("observability matrix".into()))?;
    let mut p = DMatrix::zeros(n, n);
    let mut col = l;
    for k in 0..n {
        p.set_column(k, &col);
        col = a * col;
    }
    let p_lu = p.clone().lu();
    let abar = p_lu
        .solve(&(a * &p))
        .ok_or_else(|| Error::Singular("companion transform".into()))?;
    let gbar = DVector::from_fn(n, |i, _| -coeffs[i] - abar[(i, n - 1)]);
    let g = &p * gbar;

    let closed = a + &g * c;
    let achieved: Vec<Complex<f64>> = closed.complex_eigenvalues().iter().copied().collect();
    let err = spectrum_mismatch(spectrum, &achieved);
    let scale = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if !(err <= 1e-6 * scale) {
        return Err(Error::GainCheck(err));
    }
    Ok(GainVector {
        g,
        assigned_spectrum: spectrum.iter().map(|z| (z.re, z.im)).collect(),
        transform_p: p,
        achieved_error: err,
        observability_condition: report.condition_number,
        ill_conditioned: report.condition_number > ILL_CONDITIONED,
    })
}

/// Row `i` is `(λ_i^{n−1}, …, λ_i, 1)`.
pub fn vandermonde(lambda: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    DMatrix::from_fn(n, n, |i, j| lambda[i].powi((n - 1 - j) as i32))
}

fn check_distinct(lambda: &[f64]) -> Result<()> {
    let scale = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(f64::MIN_POSITIVE);
    for (j, a) in lambda.iter().enumerate() {
        for b in &lambda[j + 1..] {
            if (a - b).abs() <= 1e-12 * scale {
                return Err(Error::Singular(format!("repeated value {a} in Vandermonde nodes")));
            }
        }
    }
    Ok(())
}

/// Closed-form inverse of [`vandermonde`].
pub fn vandermonde_inverse(lambda: &[f64]) -> Result<DMatrix<f64>> {
    check_distinct(lambda)?;
    let n = lambda.len();
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n {
        let others: Vec<f64> = lambda.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, l)| *l).collect();
        let mut sigma = vec![1.0];
        sigma.extend(symmetric_functions(&others));
        let denom: f64 = others.iter().map(|l| lambda[j] - l).product();
        for i in 0..n {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            w[(i, j)] = sign * sigma[i] / denom;
        }
    }
    Ok(w)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `λ1 + √n·L·‖V⁻¹‖∞` for the given nodes.
pub fn high_gain_margin(lambda: &[f64], lipschitz: f64) -> Result<f64> {
    let w = vandermonde_inverse(lambda)?;
    let l1 = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(l1 + (lambda.len() as f64).sqrt() * lipschitz * inf_norm(&w))
}

const ALPHA_MIN: f64 = 1.1;

fn geometric_nodes(n: usize, theta: f64, alpha: f64) -> Vec<f64> {
    (1..=n).map(|i| -theta * alpha.powi(i as i32)).collect()
}

/// Distinct negative nodes `λ_i = −θ·α^i` with `λ1 + √n·L·‖V⁻¹‖∞ ≤ −θ`.
///
/// `α` starts at 1.1 and doubles until the bound holds, then is bisected
/// down to the smallest admissible value within 1e-6 relative.
pub fn high_gain_spectrum(n: usize, lipschitz: f64, theta: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(crate::error::invalid("n", "must be at least 1"));
    }
    crate::error::require_positive("theta", theta)?;
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(crate::error::invalid("lipschitz", "must be finite and nonnegative"));
    }
    let ok = |alpha: f64| -> Result<bool> {
        Ok(high_gain_margin(&geometric_nodes(n, theta, alpha), lipschitz)? <= -theta)
    };
    let mut hi = ALPHA_MIN;
    let mut lo = 1.0;
    while !ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Singular("no admissible high-gain spectrum below α = 1e12".into()));
        }
    }
    if hi > ALPHA_MIN {
        while hi - lo > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            if ok(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(geometric_nodes(n, theta, hi))
}
