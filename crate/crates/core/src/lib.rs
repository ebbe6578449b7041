//! Parabolic–elliptic chemotaxis with density-suppressed motility and
//! generalized logistic damping:
//!
//! ```text
//! u_t = Δ(γ(v) u) + a u - b u^σ,   -Δv + v = u,   ∂u/∂ν = ∂v/∂ν = 0
//! ```
//!
//! The crate provides the discrete fields and operators, motility families,
//! an exact Neumann Helmholtz solver, a positivity-preserving explicit
//! stepper, the explicit boundedness/convergence constants with regime
//! classification, and runtime diagnostics that check the analytical bounds
//! along simulated trajectories.

pub mod constants;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod helmholtz;
pub mod motility;
pub mod registry;
pub mod stepper;

pub use error::{Error, Result};
pub use fields::{Grid, ScalarField};
pub use helmholtz::{apply_helmholtz, solve_helmholtz, HelmholtzSolver};
pub use motility::{Motility, MotilitySpec};
pub use registry::{Args, Registry};
