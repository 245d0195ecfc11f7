//! Observer experiments on the built-in models, with corrupted measurements.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::families::{HighGainSir, LuenbergerObserver, MalariaObserver, ReducedOrderSir};
use super::run::{run_observer, Family, Measurement, Observer, ObserverRun};
use super::spline::CubicSpline;
use crate::error::{invalid, Error, Result};
use crate::ode::{integrate_with, linspace, ModelSpec, SolverOptions, Tolerances};
use crate::zoo::{by_id, FluctuatingSir, MalariaParams, ModelId, ThreeStage, ZooEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    /// Uniform on `[−amplitude, amplitude]`.
    Uniform,
    /// Standard deviation `amplitude`.
    Gaussian,
    /// Integer error uniform on `{−a, …, a}`, `a = floor(amplitude)`.
    Counting,
}

/// How measurements are sampled and corrupted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub amplitude: f64,
    /// Sampling period of the discrete measurements.
    pub sample_dt: f64,
    /// Round each sample to the nearest integer.
    pub round: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            kind: NoiseKind::None,
            amplitude: 0.0,
            sample_dt: 1.0,
            round: false,
        }
    }
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, amplitude: f64, sample_dt: f64) -> Self {
        NoiseSpec {
            kind,
            amplitude,
            sample_dt,
            round: false,
        }
    }

    pub fn rounded(mut self) -> Self {
        self.round = true;
        self
    }

    /// Measurements equal the exact output; the continuous path is used.
    pub fn is_exact(&self) -> bool {
        (self.kind == NoiseKind::None || self.amplitude == 0.0) && !self.round
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(invalid("noise amplitude", "must be finite and nonnegative"));
        }
        if !(self.sample_dt > 0.0) {
            return Err(invalid("sample_dt", "must be positive"));
        }
        Ok(())
    }

    /// Adds a seeded noise stream to `values`, rounding if requested.
    pub fn corrupt(&self, values: &mut [f64], seed: u64) -> Result<()> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in values {
            *v += self.draw(&mut rng);
            if self.round {
                *v = v.round();
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let a = self.amplitude;
        match self.kind {
            NoiseKind::None => 0.0,
            _ if a == 0.0 => 0.0,
            NoiseKind::Uniform => rng.gen_range(-a..=a),
            NoiseKind::Gaussian => Normal::new(0.0, a).expect("finite sd").sample(rng),
            NoiseKind::Counting => {
                let k = a.floor() as i64;
                rng.gen_range(-k..=k) as f64
            }
        }
    }
}

/// Samples the true output every `sample_dt` up to (at least) `t_end`,
/// corrupts it and lifts it to continuous time by cubic splines.
pub fn sampled_measurements(
    model: &ModelSpec,
    theta: &[f64],
    x0: &[f64],
    t0: f64,
    t_end: f64,
    noise: &NoiseSpec,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Measurement> {
    noise.validate()?;
    let count = ((t_end - t0) / noise.sample_dt - 1e-9).ceil().max(1.0) as usize + 1;
    let grid: Vec<f64> = (0..count).map(|k| t0 + k as f64 * noise.sample_dt).collect();
    let tr = integrate_with(model, x0, theta, &grid, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(count); model.n_outputs()];
    for y in &tr.y {
        for (j, col) in columns.iter_mut().enumerate() {
            let mut v = y[j] + noise.draw(&mut rng);
            if noise.round {
                v = v.round();
            }
            col.push(v);
        }
    }
    let splines = columns
        .iter()
        .map(|c| CubicSpline::natural(&grid, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Measurement::Sampled(splines))
}

/// Observer experiment description; unset fields take per-family defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverConfig {
    pub family: Family,
    pub model_id: ModelId,
    /// Assigned spectrum `(re, im)` for the Luenberger and high-gain families.
    #[serde(default)]
    pub spectrum: Option<Vec<(f64, f64)>>,
    /// Gain vector `L` of the change-of-coordinates observer.
    #[serde(default)]
    pub gain: Option<Vec<f64>>,
    /// Initial internal state: `x̂0`, `ŵ0`, `Z0` or `ẑ0` depending on the family.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_tol")]
    pub tol: Tolerances,
    /// Seed of the time-varying model coefficients.
    #[serde(default)]
    pub signal_seed: u64,
}

fn default_points() -> usize {
    1001
}

fn default_tol() -> Tolerances {
    Tolerances { rel: 1e-10, abs: 1e-12 }
}

pub const THREE_STAGE_SLOW: [f64; 3] = [-0.09, -0.099, -0.108];
pub const THREE_STAGE_FAST: [f64; 3] = [-0.18, -0.198, -0.216];
/// Unscaled pair used for the noise experiments.
pub const NOISE_DEMO_SLOW: [f64; 3] = [-0.3, -0.33, -0.36];
pub const NOISE_DEMO_FAST: [f64; 3] = [-0.6, -0.66, -0.72];
pub const MALARIA_GAIN: [f64; 7] = [0.0, 5.0, 5.0, 0.0, 0.0, 0.0, 0.0];
pub const HIGH_GAIN_SPECTRUM: [f64; 3] = [-2.0, -2.2, -2.4];
/// Default high-gain run length: the epidemic wave, while `I` stays away from zero.
pub const HIGH_GAIN_HORIZON: f64 = 50.0;

impl ObserverConfig {
    /// Defaults for a family on its natural model.
    pub fn for_family(family: Family) -> Self {
        let model_id = match family {
            Family::LuenbergerLinearUpToOutput => ModelId::ThreeStage,
            Family::ChangeOfCoordinates => ModelId::Malaria,
            Family::ReducedOrder => ModelId::SirFluctuating,
            Family::HighGain => ModelId::SirRecovered,
        };
        ObserverConfig {
            family,
            model_id,
            spectrum: None,
            gain: None,
            initial: None,
            horizon: None,
            points: default_points(),
            tol: default_tol(),
            signal_seed: 0,
        }
    }

    pub fn with_spectrum(mut self, lambda: &[f64]) -> Self {
        self.spectrum = Some(lambda.iter().map(|l| (*l, 0.0)).collect());
        self
    }

    pub fn with_initial(mut self, xi0: Vec<f64>) -> Self {
        self.initial = Some(xi0);
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }
}

/// A fully specified experiment: truth model, observer and initial states.
pub struct ObserverSetup {
    pub entry: ZooEntry,
    pub theta: Vec<f64>,
    pub x0: Vec<f64>,
    pub observer: Box<dyn Observer>,
    pub xi0: Vec<f64>,
    pub grid: Vec<f64>,
    pub opts: SolverOptions,
    /// Slowest rate the error dynamics allow (assigned or structural).
    pub expected_rate: f64,
}

fn spectrum_of(config: &ObserverConfig, default: &[f64]) -> Vec<Complex<f64>> {
    match &config.spectrum {
        Some(s) => s.iter().map(|&(re, im)| Complex::new(re, im)).collect(),
        None => default.iter().map(|&l| Complex::new(l, 0.0)).collect(),
    }
}

fn dominant(spectrum: &[Complex<f64>]) -> f64 {
    spectrum.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn initial_or(config: &ObserverConfig, dim: usize, default: Vec<f64>) -> Result<Vec<f64>> {
    let v = config.initial.clone().unwrap_or(default);
    if v.len() != dim {
        return Err(Error::Dimension(format!(
            "{} observer needs an initial state of length {dim}, got {}",
            config.family,
            v.len()
        )));
    }
    Ok(v)
}

/// Builds the truth model and observer described by `config`.
pub fn prepare(config: &ObserverConfig) -> Result<ObserverSetup> {
    let expected_model = ObserverConfig::for_family(config.family).model_id;
    if config.model_id != expected_model {
        return Err(invalid(
            "model",
            format!("{} observers run on {expected_model}, not {}", config.family, config.model_id),
        ));
    }
    if config.points < 2 {
        return Err(invalid("points", "need at least two output points"));
    }
    let (entry, observer, xi0, expected_rate): (ZooEntry, Box<dyn Observer>, Vec<f64>, f64) = match config.family {
        Family::LuenbergerLinearUpToOutput => {
            let model = ThreeStage::standard(config.signal_seed);
            let spectrum = spectrum_of(config, &THREE_STAGE_SLOW);
            let (obs, _) = LuenbergerObserver::three_stage(&model, &spectrum)?;
            let xi0 = initial_or(config, 3, vec![0.5, 0.5, 0.5])?;
            (model.entry(), Box::new(obs), xi0, dominant(&spectrum))
        }
        Family::ChangeOfCoordinates => {
            let params = MalariaParams::default();
            let gain = config.gain.clone().unwrap_or_else(|| MALARIA_GAIN.to_vec());
            let obs = MalariaObserver::new(&params, &gain)?;
            let mut guess = params.x0.clone();
            guess[0] *= 0.8;
            guess[6] = 0.0;
            let y0 = params.x0[1] + params.x0[2];
            let xi0 = initial_or(config, 7, obs.w_from_estimate(&guess, y0))?;
            let slowest = obs
                .error_matrix()
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            (params.entry(), Box::new(obs), xi0, slowest)
        }
        Family::ReducedOrder => {
            let model = FluctuatingSir::standard(config.signal_seed);
            let obs = ReducedOrderSir::new(model.nu, model.mu, model.n)?;
            let xi0 = initial_or(config, 1, vec![0.5 * model.n])?;
            (model.entry(), Box::new(obs), xi0, -model.mu)
        }
        Family::HighGain => {
            let entry = by_id(ModelId::SirRecovered);
            let p = &entry.default_params;
            let spectrum = spectrum_of(config, &HIGH_GAIN_SPECTRUM);
            if spectrum.iter().any(|z| z.im != 0.0) {
                return Err(invalid("spectrum", "high-gain spectra must be real"));
            }
            let real: Vec<f64> = spectrum.iter().map(|z| z.re).collect();
            let obs = HighGainSir::new(p[0], p[1], p[2], &real)?;
            let x0 = &entry.default_x0;
            let xi0 = initial_or(config, 3, obs.z_from_state(0.9 * x0[0], 5.0 * x0[1], x0[2]))?;
            (entry.clone(), Box::new(obs), xi0, dominant(&spectrum))
        }
    };
    let horizon = config.horizon.unwrap_or(match config.family {
        Family::HighGain => HIGH_GAIN_HORIZON,
        _ => entry.horizon,
    });
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    Ok(ObserverSetup {
        theta: entry.default_params.clone(),
        x0: entry.default_x0.clone(),
        grid: linspace(0.0, horizon, config.points),
        opts: SolverOptions::with_tol(config.tol),
        entry,
        observer,
        xi0,
        expected_rate,
    })
}

impl ObserverSetup {
    /// Runs with exact continuous measurements.
    pub fn run_exact(&self) -> Result<ObserverRun> {
        self.run_with(&Measurement::Exact)
    }

    pub fn run_with(&self, measurement: &Measurement) -> Result<ObserverRun> {
        run_observer(
            &self.entry.spec,
            &self.theta,
            &self.x0,
            self.observer.as_ref(),
            &self.xi0,
            &self.grid,
            measurement,
            &self.opts,
        )
    }

    /// Measurements sampled over the whole horizon and corrupted by `noise`.
    pub fn measurements(&self, noise: &NoiseSpec, seed: u64) -> Result<Measurement> {
        if noise.is_exact() {
            return Ok(Measurement::Exact);
        }
        sampled_measurements(
            &self.entry.spec,
            &self.theta,
            &self.x0,
            self.grid[0],
            *self.grid.last().expect("grid has points"),
            noise,
            seed,
            &self.opts,
        )
    }
}

/// Generates the truth, corrupts its measurements and runs the observer.
pub fn simulate_with_noise(config: &ObserverConfig, noise: &NoiseSpec, seed: u64) -> Result<ObserverRun> {
    let setup = prepare(config)?;
    let m = setup.measurements(noise, seed)?;
    setup.run_with(&m)
}
