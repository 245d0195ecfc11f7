//! Built-in models.

mod malaria;
mod signal;
mod sir;
mod structured;
mod toy;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_with, linspace, ModelSpec, SolverOptions, Trajectory};

pub use malaria::{malaria_intrahost, MalariaParams};
pub use signal::{PiecewiseConstant, Signal};
pub use sir::{
    sir_classical, sir_classical_rate, sir_cumulative, sir_cumulative_rate, sir_demography,
    sir_fluctuating, sir_recovered, FluctuatingSir, Gain, Incidence, SirForm, SirOutput,
};
pub use structured::{five_class_age, three_stage, FiveClassAge, ThreeStage};
pub use toy::{academic_unobservable, two_compartment};

/// Identifier of a built-in model, as used on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    SirClassical,
    SirCumulative,
    SirCumulativeRate,
    SirRecovered,
    SirDemography,
    SirFluctuating,
    ThreeStage,
    FiveClassAge,
    Malaria,
    TwoCompartment,
    Academic,
}

impl ModelId {
    pub const ALL: [ModelId; 11] = [
        ModelId::SirClassical,
        ModelId::SirCumulative,
        ModelId::SirCumulativeRate,
        ModelId::SirRecovered,
        ModelId::SirDemography,
        ModelId::SirFluctuating,
        ModelId::ThreeStage,
        ModelId::FiveClassAge,
        ModelId::Malaria,
        ModelId::TwoCompartment,
        ModelId::Academic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::SirClassical => "sir-classical",
            ModelId::SirCumulative => "sir-cumulative",
            ModelId::SirCumulativeRate => "sir-cumulative-rate",
            ModelId::SirRecovered => "sir-recovered",
            ModelId::SirDemography => "sir-demography",
            ModelId::SirFluctuating => "sir-fluctuating",
            ModelId::ThreeStage => "three-stage",
            ModelId::FiveClassAge => "five-class-age",
            ModelId::Malaria => "malaria",
            ModelId::TwoCompartment => "two-compartment",
            ModelId::Academic => "academic",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .iter()
            .find(|id| id.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Unknown {
                kind: "model",
                name: s.to_string(),
            })
    }
}

pub type Admissible = Arc<dyn Fn(&[f64], &[f64]) -> bool + Send + Sync>;
pub type Sampler = Arc<dyn Fn(&mut dyn RngCore, &[f64]) -> Vec<f64> + Send + Sync>;

/// A built-in model with its default operating point.
#[derive(Clone)]
pub struct ZooEntry {
    pub id: ModelId,
    pub spec: ModelSpec,
    pub default_params: Vec<f64>,
    pub param_units: Vec<String>,
    pub default_x0: Vec<f64>,
    /// Documented simulation horizon.
    pub horizon: f64,
    /// Human-readable description of the admissible set.
    pub admissible_set: String,
    pub notes: String,
    admissible: Admissible,
    sampler: Sampler,
}

impl fmt::Debug for ZooEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZooEntry")
            .field("id", &self.id)
            .field("spec", &self.spec)
            .field("default_params", &self.default_params)
            .field("default_x0", &self.default_x0)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl ZooEntry {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        id: ModelId,
        spec: ModelSpec,
        default_params: Vec<f64>,
        param_units: &[&str],
        default_x0: Vec<f64>,
        horizon: f64,
        admissible_set: &str,
        notes: &str,
        admissible: Admissible,
        sampler: Sampler,
    ) -> Self {
        ZooEntry {
            id,
            spec,
            default_params,
            param_units: param_units.iter().map(|s| s.to_string()).collect(),
            default_x0,
            horizon,
            admissible_set: admissible_set.to_string(),
            notes: notes.to_string(),
            admissible,
            sampler,
        }
    }

    pub fn is_admissible(&self, x: &[f64], theta: &[f64]) -> bool {
        x.len() == self.spec.n_states() && (self.admissible)(x, theta)
    }

    /// Random admissible state for the given parameters.
    pub fn sample_state(&self, rng: &mut dyn RngCore, theta: &[f64]) -> Vec<f64> {
        (self.sampler)(rng, theta)
    }

    /// Integrates from the default point over the documented horizon.
    pub fn default_trajectory(&self, points: usize, opts: &SolverOptions) -> Result<Trajectory> {
        integrate_with(
            &self.spec,
            &self.default_x0,
            &self.default_params,
            &linspace(0.0, self.horizon, points),
            opts,
        )
    }

    /// Default parameters with named overrides applied.
    pub fn params_with(&self, overrides: &[(String, f64)]) -> Result<Vec<f64>> {
        let mut p = self.default_params.clone();
        for (name, v) in overrides {
            let i = self
                .spec
                .param_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Unknown {
                    kind: "parameter",
                    name: name.clone(),
                })?;
            p[i] = *v;
        }
        Ok(p)
    }
}

/// Entry with default parameters for a model id.
pub fn by_id(id: ModelId) -> ZooEntry {
    let built = match id {
        ModelId::SirClassical => sir_classical(1.9605032, 0.4751562, 763.0, 1.0),
        ModelId::SirCumulative => sir_cumulative(1.9605032, 0.4751562, 763.0, 1.0),
        ModelId::SirCumulativeRate => sir_cumulative_rate(0.0000855, 3.7161743, 48113.13, 1.4213612),
        ModelId::SirRecovered => sir_recovered(0.4, 0.1, 10000.0),
        ModelId::SirDemography => sir_demography(0.4, 0.1, 0.02, 1000.0),
        ModelId::SirFluctuating => Ok(FluctuatingSir::standard(0).entry()),
        ModelId::ThreeStage => Ok(ThreeStage::standard(0).entry()),
        ModelId::FiveClassAge => five_class_age(0.5, 1.2, 0.1, 0.2, 4),
        ModelId::Malaria => Ok(MalariaParams::default().entry()),
        ModelId::TwoCompartment => two_compartment(0.3, 0.7),
        ModelId::Academic => academic_unobservable(0.5),
    };
    built.expect("default parameters are valid")
}

pub(crate) fn nonnegative(x: &[f64]) -> bool {
    x.iter().all(|v| *v >= -1e-9 * (1.0 + v.abs()))
}

pub(crate) fn positive_params(names: &[String], theta: &[f64]) -> Result<()> {
    for (n, v) in names.iter().zip(theta) {
        crate::error::require_positive(n, *v)?;
    }
    Ok(())
}
