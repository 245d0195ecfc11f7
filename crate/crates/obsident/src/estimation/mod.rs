//! Sensitivities, least-squares fitting and Fisher information.

mod fim;
mod fit;
mod sensitivity;
mod tdist;

pub use fim::{
    condition_number, confidence_intervals, fim, fim_at, fim_report, report_at, scaled_inverse, FimReport,
    ILL_CONDITIONED_FIM,
};
pub use fit::{ols_fit, Dataset, DofConvention, FitOptions, FitResult, Problem, Termination};
pub use sensitivity::{output_sensitivity, sensitivity_solve, SensitivityBundle, Unknowns};
pub use tdist::{inc_beta, ln_gamma, t_cdf, t_pdf, t_quantile};
