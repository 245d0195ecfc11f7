//! Models, integration, finite differences and Lie-derivative stacks.

pub mod fd;
pub mod integrate;
pub mod jet;
pub mod lie;
pub mod model;

pub use fd::finite_diff_jacobian;
pub use integrate::{integrate, integrate_with, linspace, solve, SolverOptions, Tolerances, Trajectory};
pub use jet::{Jet, Scalar};
pub use lie::{lie_stack, lie_stack_with, LieMethod, LieStack};
pub use model::{Equations, MatMap, ModelSpec, VecMap};
