//! Reflected McKean-Vlasov SDEs in time-dependent domains.
//!
//! The crate simulates distribution-dependent diffusions that are kept inside a
//! moving region `D_t` by an oblique push along a direction field `γ`, and it
//! ships numerical checks for the three classical questions around them:
//! well-posedness through a fixed point on measure flows, propagation of chaos
//! for the interacting particle system, and small-noise large deviations.
//!
//! Module map:
//!
//! * [`geometry`]: time-dependent domains, direction fields and their validators.
//! * [`coefficients`]: empirical measures and measure-dependent drift/diffusion.
//! * [`reflection`]: the projected Euler step and frozen-law path driver.
//! * [`ensemble`]: interacting particles, frozen-law copies, Picard iteration, chaos.
//! * [`transport`]: Wasserstein-2 distances and path-ensemble distances.
//! * [`ldp`]: limit ODE, skeleton equation, rate functional and rare events.
//! * [`harness`]: experiment configuration, runs, CSV output and manifests.

pub mod coefficients;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod ldp;
pub mod noise;
pub mod reflection;
pub mod transport;

mod vecops;

pub use coefficients::{CoefficientSet, EmpiricalMeasure, InteractionKernel};
pub use ensemble::{InitialLaw, MeasureFlow, Model, ParticleEnsemble};
pub use error::{Error, Result};
pub use geometry::{BoundaryAnchor, DirectionField, TimeDomain};
pub use grid::TimeGrid;
pub use noise::NoiseDriver;
pub use reflection::{ReflectedPath, ReflectedState};

/// Relative tolerance used when checking that a located boundary point is a
/// near-minimizer of the distance.
pub const TOL_REL: f64 = 1e-6;

/// Maximum number of re-anchoring sub-steps in one oblique projection.
pub const MAX_PROJECT_ITERS: usize = 200;

/// Boundary tolerance relative to the bounding radius of a domain.
pub const TOL_BOUNDARY_FACTOR: f64 = 1e-9;
