//! The four observer constructions.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use super::run::{Family, Observer};
use super::synthesis::{pole_place_gain, real_spectrum, GainVector};
use crate::error::{invalid, require_positive, Error, Result};
use crate::zoo::{MalariaParams, ThreeStage};

pub type OutputInjection = Arc<dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync>;

/// `x̂̇ = A x̂ + Φ(t, y) + G (C x̂ − y)` for systems `ẋ = A x + Φ(t, y)`, `y = C x`.
#[derive(Clone)]
pub struct LuenbergerObserver {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g: DVector<f64>,
    phi: OutputInjection,
}

impl LuenbergerObserver {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, gain: &GainVector, phi: OutputInjection) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || c.ncols() != n || gain.g.len() != n {
            return Err(Error::Dimension("inconsistent A, C and gain".into()));
        }
        Ok(LuenbergerObserver {
            a,
            c,
            g: gain.g.clone(),
            phi,
        })
    }

    /// Observer of the three-stage model with gains placing `spectrum`.
    pub fn three_stage(model: &ThreeStage, spectrum: &[Complex<f64>]) -> Result<(Self, GainVector)> {
        let a = model.a_matrix();
        let c = model.c_matrix();
        let gain = pole_place_gain(&a, &c, spectrum)?;
        let m = model.clone();
        let obs = LuenbergerObserver::new(a, c, &gain, Arc::new(move |t, y| m.phi(t, y[0])))?;
        Ok((obs, gain))
    }

    /// `A + G C`.
    pub fn error_matrix(&self) -> DMatrix<f64> {
        &self.a + &self.g * &self.c
    }
}

impl Observer for LuenbergerObserver {
    fn family(&self) -> Family {
        Family::LuenbergerLinearUpToOutput
    }

    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn rhs(&self, t: f64, xi: &[f64], y: &[f64], out: &mut [f64]) {
        let x = DVector::from_column_slice(xi);
        let innov = &self.c * &x - DVector::from_column_slice(y);
        let v = &self.a * &x + (self.phi)(t, y) + &self.g * innov;
        out.copy_from_slice(v.as_slice());
    }

    fn estimate(&self, _t: f64, xi: &[f64], _y: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xi)
    }

    fn innovation(&self, _t: f64, xi: &[f64], y: &[f64]) -> Option<DVector<f64>> {
        Some(&self.c * DVector::from_column_slice(xi) - DVector::from_column_slice(y))
    }
}

/// Observer of the malaria model in the coordinates `w = x − E y`:
/// `ŵ̇ = (Ā − LC) ŵ + (L + (Ā − LC) E) y + Λ e1`, `x̂ = ŵ + E y`.
#[derive(Clone, Debug)]
pub struct MalariaObserver {
    pub l: DVector<f64>,
    m: DMatrix<f64>,
    k: DVector<f64>,
    e: DVector<f64>,
    c: DMatrix<f64>,
    source: DVector<f64>,
}

impl MalariaObserver {
    pub fn new(params: &MalariaParams, l: &[f64]) -> Result<Self> {
        if l.len() != 7 {
            return Err(Error::Dimension(format!("malaria gain needs 7 entries, got {}", l.len())));
        }
        let l = DVector::from_column_slice(l);
        let c = params.c_matrix();
        let e = params.e_vector();
        let m = params.a_bar() - &l * &c;
        let k = &l + &m * &e;
        let source = params.e1() * params.lambda;
        Ok(MalariaObserver { l, m, k, e, c, source })
    }

    /// `Ā − L C`.
    pub fn error_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// The eigenvalue set by the gain, `−C L`.
    pub fn assignable_eigenvalue(&self) -> f64 {
        -(&self.c * &self.l)[(0, 0)]
    }

    /// Internal state matching a state estimate `x̂0` and measurement `y0`.
    pub fn w_from_estimate(&self, x_hat: &[f64], y0: f64) -> Vec<f64> {
        (DVector::from_column_slice(x_hat) - &self.e * y0).iter().copied().collect()
    }
}

impl Observer for MalariaObserver {
    fn family(&self) -> Family {
        Family::ChangeOfCoordinates
    }

    fn dim(&self) -> usize {
        7
    }

    fn rhs(&self, _t: f64, xi: &[f64], y: &[f64], out: &mut [f64]) {
        let v = &self.m * DVector::from_column_slice(xi) + &self.k * y[0] + &self.source;
        out.copy_from_slice(v.as_slice());
    }

    fn estimate(&self, _t: f64, xi: &[f64], y: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xi) + &self.e * y[0]
    }

    fn innovation(&self, t: f64, xi: &[f64], y: &[f64]) -> Option<DVector<f64>> {
        Some(&self.c * self.estimate(t, xi, y) - DVector::from_column_slice(y))
    }
}

/// Observer of the fluctuating SIR that needs neither β(t) nor ρ(t):
/// `Ż = νN − y2 − μZ`, `Ŝ = Z − y1`, `Î = y1`, `R̂ = N − Z`.
#[derive(Clone, Copy, Debug)]
pub struct ReducedOrderSir {
    pub nu: f64,
    pub mu: f64,
    pub n: f64,
}

impl ReducedOrderSir {
    pub fn new(nu: f64, mu: f64, n: f64) -> Result<Self> {
        require_positive("mu", mu)?;
        require_positive("N", n)?;
        if (nu - mu).abs() > 1e-12 * mu {
            return Err(invalid("nu", "the reduced-order observer needs nu = mu"));
        }
        Ok(ReducedOrderSir { nu, mu, n })
    }
}

impl Observer for ReducedOrderSir {
    fn family(&self) -> Family {
        Family::ReducedOrder
    }

    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, xi: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = self.nu * self.n - y[1] - self.mu * xi[0];
    }

    fn estimate(&self, _t: f64, xi: &[f64], y: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![xi[0] - y[0], y[0], self.n - xi[0]])
    }
}

/// `max(lo, min(hi, x))`, with NaN sent to `lo`.
pub fn sat(lo: f64, hi: f64, x: f64) -> f64 {
    if x.is_nan() {
        lo
    } else {
        x.clamp(lo, hi)
    }
}

/// High-gain observer of the SIR model observed through its cumulative
/// number of removed, written in the canonical coordinates
/// `z = (y, ρI, (bS − ρ)ρI)` with `b = β/N`.
#[derive(Clone, Debug)]
pub struct HighGainSir {
    pub b: f64,
    pub rho: f64,
    pub n: f64,
    pub gain: GainVector,
    /// Bounds of the saturated `ż3`.
    pub psi_bounds: (f64, f64),
}

impl HighGainSir {
    /// `beta` is the normalized contact rate, `spectrum` distinct and negative.
    pub fn new(beta: f64, rho: f64, n: f64, spectrum: &[f64]) -> Result<Self> {
        require_positive("beta", beta)?;
        require_positive("rho", rho)?;
        require_positive("N", n)?;
        if spectrum.len() != 3 || spectrum.iter().any(|l| !(*l < 0.0)) {
            return Err(invalid("spectrum", "three negative eigenvalues are required"));
        }
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        super::synthesis::vandermonde_inverse(spectrum)?;
        let gain = pole_place_gain(&a, &c, &real_spectrum(spectrum))?;
        let lo = -rho.powi(3) * n - rho * beta * beta * n;
        let hi = rho * n * rho.powi(2).max((beta - rho).powi(2));
        Ok(HighGainSir {
            b: beta / n,
            rho,
            n,
            gain,
            psi_bounds: (lo, hi),
        })
    }

    fn ratio(&self, z2: f64, z3: f64) -> f64 {
        sat(-self.rho, self.b * self.n - self.rho, z3 / z2)
    }

    /// Saturated `ż3`.
    pub fn psi(&self, z: &[f64]) -> f64 {
        let (z2, z3) = (z[1], z[2]);
        let raw = self.ratio(z2, z3) * z3 - (self.b / self.rho) * z3 * z2 - self.b * z2 * z2;
        sat(self.psi_bounds.0, self.psi_bounds.1, raw)
    }

    /// Canonical coordinates of `(S, I)` given the current measurement `y`.
    pub fn z_from_state(&self, s: f64, i: f64, y: f64) -> Vec<f64> {
        let z2 = self.rho * i;
        vec![y, z2, (self.b * s - self.rho) * z2]
    }
}

impl Observer for HighGainSir {
    fn family(&self) -> Family {
        Family::HighGain
    }

    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, _t: f64, xi: &[f64], y: &[f64], out: &mut [f64]) {
        let innov = xi[0] - y[0];
        let g = &self.gain.g;
        out[0] = xi[1] + g[0] * innov;
        out[1] = xi[2] + g[1] * innov;
        out[2] = self.psi(xi) + g[2] * innov;
    }

    fn estimate(&self, _t: f64, xi: &[f64], _y: &[f64]) -> DVector<f64> {
        let s = (self.ratio(xi[1], xi[2]) + self.rho) / self.b;
        let i = xi[1] / self.rho;
        DVector::from_vec(vec![s, i, self.n - s - i])
    }

    /// `(S, I, N − S − I)`.
    fn reference(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![x[0], x[1], self.n - x[0] - x[1]])
    }

    fn innovation(&self, _t: f64, xi: &[f64], y: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::from_vec(vec![xi[0] - y[0]]))
    }

    fn diagnostics(&self, t: &[f64], xi: &[DVector<f64>]) -> Vec<String> {
        match t.iter().zip(xi).find(|(_, z)| !(z[1] > 0.0)) {
            Some((t, _)) => vec![format!(
                "estimated z2 reached zero near t = {t}; saturation kept the estimates finite"
            )],
            None => vec![],
        }
    }
}
