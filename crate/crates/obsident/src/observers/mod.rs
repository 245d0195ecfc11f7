//! Observer synthesis and simulation.

mod families;
mod noise;
mod run;
mod spline;
mod synthesis;

pub use families::{sat, HighGainSir, LuenbergerObserver, MalariaObserver, OutputInjection, ReducedOrderSir};
pub use noise::{
    prepare, sampled_measurements, simulate_with_noise, NoiseKind, NoiseSpec, ObserverConfig, ObserverSetup,
    HIGH_GAIN_HORIZON, HIGH_GAIN_SPECTRUM, NOISE_DEMO_FAST, NOISE_DEMO_SLOW, MALARIA_GAIN, THREE_STAGE_FAST, THREE_STAGE_SLOW,
};
pub use run::{decay_rate, run_observer, Family, Measurement, Observer, ObserverRun, DECAY_WINDOW};
pub use spline::CubicSpline;
pub use synthesis::{
    characteristic_coefficients, high_gain_margin, high_gain_spectrum, pole_place_gain, real_spectrum,
    spectrum_mismatch, symmetric_functions, vandermonde, vandermonde_inverse, GainVector, ILL_CONDITIONED,
};
