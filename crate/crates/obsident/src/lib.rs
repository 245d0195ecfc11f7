//! Observability, observer synthesis and practical identifiability for
//! compartmental ODE models.

pub mod data;
pub mod error;
pub mod estimation;
pub mod observability;
pub mod observers;
pub mod ode;
pub mod zoo;

pub use error::{Error, Result};
