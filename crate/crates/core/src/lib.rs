//! Shrinking-dimer saddle dynamics (SSD) for locating index-k saddle points of
//! gradient and non-gradient systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`algebra`]: frames, the Householder reflection, direction projectors,
//!   modified Gram-Schmidt, the dimer Hessian and the dimer-length law.
//! - [`problems`]: the [`Problem`] force-field record and built-in systems.
//! - [`dynamics`]: explicit Euler steppers and trajectory integration.
//! - [`extrapolation`]: Richardson combination of a `tau` / `tau/2` pair.
//! - [`harness`]: reference runs, error norms, convergence ladders and
//!   scaling probes.
//! - [`io`]: JSON-lines trajectory files.
//!
//! ```
//! use ssd::{integrate, registry_get, ProblemKind, SaddleConfig};
//!
//! let problem = registry_get("stingray").unwrap();
//! let ic = problem.default_initial_condition(1).unwrap();
//! let config = SaddleConfig::new(1, 1.0 / 64.0, ProblemKind::Gradient);
//! let traj = integrate(&problem, &ic, &config).unwrap();
//! assert_eq!(traj.states.len(), 65);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod extrapolation;
pub mod harness;
pub mod io;
pub mod par;
pub mod problems;

pub use algebra::{
    dimer_hessian_apply, dimer_length_at, gram_schmidt, householder_apply, stable_projector_apply,
    symmetrized_projector_apply, DimerLength, ForceField, OrthonormalFrame, PositionVector,
    RawFrame,
};
pub use dynamics::{
    integrate, saddle_residual, step_gradient, step_nongradient, InitialDimerLength, SaddleConfig,
    SaddleState, StepDiagnostics, Trajectory,
};
pub use error::{Result, SsdError};
pub use extrapolation::{richardson_combine, ExtrapolatedState, ExtrapolatedTrajectory};
pub use harness::{
    error_norms, ConvergenceReport, ErrorSummary, Harness, ProbeQuantity, ReferenceCache,
    ScalingProbeResult, Scheme,
};
pub use par::Execution;
pub use problems::{registry_get, InitialCondition, Problem, ProblemKind, ProblemRegistry};
