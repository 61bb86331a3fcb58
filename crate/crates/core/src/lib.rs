//! Geometric exponential integrators for semilinear Poisson systems
//! `q̇ = J(Dq + ∇V(q))`, with Fourier pseudospectral NLS and KdV models.

pub mod error;
pub mod harness;
pub mod integrators;
pub mod linalg;
pub mod models;
pub mod psystem;
pub mod solvers;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use integrators::{DisrkScheme, Integrator, Method, SolverKind, StepOutcome};
pub use models::{KdvSystem, Model, ModelKind, NlsSystem};
pub use psystem::{PoissonSystem, State};
pub use solvers::{SolveOutcome, SolverConfig};
pub use spectral::SpectralGrid;
