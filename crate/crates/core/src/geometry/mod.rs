//! Time-dependent domains `D_t`, their distance function `d(t, x)`, and the
//! oblique direction field `γ(t, x)`.
//!
//! A domain is anything that can evaluate `d(t, x) = inf_{y ∈ D_t} ‖x − y‖`.
//! Three moving built-ins are provided in [`presets`]; arbitrary domains can be
//! supplied as closures through [`FnDomain`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub mod presets;
pub(crate) mod search;
pub mod validate;

pub use presets::{BuiltinDomain, FieldKind, MovingBall, MovingInterval, PresetField, RoundedBox};
pub use search::{nearest_boundary, sample_boundary_anchor};
pub use validate::{
    validate_cone_condition, validate_time_regularity, ConeReport, ConeViolation, RegularityReport,
};

/// A bounded region moving in time.
pub trait TimeDomain: Send + Sync {
    fn dim(&self) -> usize;

    fn horizon(&self) -> f64;

    /// Radius of an origin-centred ball containing every section `D_t`.
    fn bounding_radius(&self) -> f64;

    /// Unchecked `d(t, x)`; zero exactly on the closed section.
    fn dist(&self, t: f64, x: &[f64]) -> f64;

    /// Signed distance (negative inside) when the domain knows it in closed form.
    fn signed_distance(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Declared bound on `|∂_t d(t, x)|`, probed by [`validate_time_regularity`].
    fn speed_bound(&self) -> Option<f64> {
        None
    }

    fn tol_boundary(&self) -> f64 {
        crate::TOL_BOUNDARY_FACTOR * self.bounding_radius()
    }

    /// Checked `d(t, x)`.
    fn distance(&self, t: f64, x: &[f64]) -> Result<f64> {
        check_time(self.horizon(), t)?;
        if x.len() != self.dim() {
            return Err(Error::Shape {
                what: "point",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.dist(t, x))
    }
}

pub(crate) fn check_time(horizon: f64, t: f64) -> Result<()> {
    // One ulp of slack so grid endpoints computed by division stay in range.
    if !(t >= 0.0) || t > horizon * (1.0 + f64::EPSILON) {
        return Err(Error::DomainRange { t, horizon });
    }
    Ok(())
}

/// Direction of reflection. `‖γ‖ ≤ 1` everywhere and `‖γ‖ = 1` at and
/// outside the boundary.
pub trait DirectionField: Send + Sync {
    fn gamma(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Aperture of the exterior cone, in `(0, 1)`.
    fn rho(&self) -> f64;
}

/// A point on `∂D_t` together with a unit vector pointing into the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryAnchor {
    pub point: Vec<f64>,
    pub time: f64,
    pub inward_hint: Vec<f64>,
}

type DistFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type GammaFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Domain given by a user-supplied distance function.
#[derive(Clone)]
pub struct FnDomain {
    dim: usize,
    horizon: f64,
    bounding_radius: f64,
    speed_bound: Option<f64>,
    dist: Arc<DistFn>,
}

impl FnDomain {
    pub fn new(
        dim: usize,
        horizon: f64,
        bounding_radius: f64,
        dist: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 || !(horizon > 0.0) || !(bounding_radius > 0.0) {
            return Err(Error::InvalidArgument(
                "domain needs dim >= 1, positive horizon and bounding radius".into(),
            ));
        }
        Ok(FnDomain {
            dim,
            horizon,
            bounding_radius,
            speed_bound: None,
            dist: Arc::new(dist),
        })
    }

    pub fn with_speed_bound(mut self, bound: f64) -> Self {
        self.speed_bound = Some(bound);
        self
    }
}

impl fmt::Debug for FnDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDomain")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("bounding_radius", &self.bounding_radius)
            .finish_non_exhaustive()
    }
}

impl TimeDomain for FnDomain {
    fn dim(&self) -> usize {
        self.dim
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }
    fn dist(&self, t: f64, x: &[f64]) -> f64 {
        (self.dist)(t, x)
    }
    fn speed_bound(&self) -> Option<f64> {
        self.speed_bound
    }
}

/// Direction field given by a closure.
#[derive(Clone)]
pub struct FnField {
    rho: f64,
    gamma: Arc<GammaFn>,
}

impl FnField {
    pub fn new(rho: f64, gamma: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        FnField {
            rho,
            gamma: Arc::new(gamma),
        }
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("rho", &self.rho).finish_non_exhaustive()
    }
}

impl DirectionField for FnField {
    fn gamma(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.gamma)(t, x, out)
    }
    fn rho(&self) -> f64 {
        self.rho
    }
}
