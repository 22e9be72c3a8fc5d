//! Built-in moving domains with closed-form distance functions, and the
//! direction fields shipped with them.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{DirectionField, TimeDomain};
use crate::error::{Error, Result};
use crate::vecops::norm;

/// `D_t = (−r(t), r(t))` with `r(t) = radius · (1 + amplitude · sin(2πt / period))`.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingInterval {
    radius: f64,
    amplitude: f64,
    period: f64,
    horizon: f64,
}

impl MovingInterval {
    pub fn new(radius: f64, amplitude: f64, period: f64, horizon: f64) -> Result<Self> {
        if !(radius > 0.0) || !(amplitude.abs() < 1.0) || !(period > 0.0) || !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "interval needs radius > 0, |amplitude| < 1, period > 0, horizon > 0 \
                 (got {radius}, {amplitude}, {period}, {horizon})"
            )));
        }
        Ok(MovingInterval {
            radius,
            amplitude,
            period,
            horizon,
        })
    }

    pub fn half_width(&self, t: f64) -> f64 {
        self.radius * (1.0 + self.amplitude * (2.0 * PI * t / self.period).sin())
    }

    fn inward(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let r = self.half_width(t);
        out[0] = -x[0] / x[0].abs().max(0.5 * r);
    }
}

impl TimeDomain for MovingInterval {
    fn dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn bounding_radius(&self) -> f64 {
        self.radius * (1.0 + self.amplitude.abs())
    }
    fn dist(&self, t: f64, x: &[f64]) -> f64 {
        (x[0].abs() - self.half_width(t)).max(0.0)
    }
    fn signed_distance(&self, t: f64, x: &[f64]) -> Option<f64> {
        Some(x[0].abs() - self.half_width(t))
    }
    fn speed_bound(&self) -> Option<f64> {
        Some(self.radius * self.amplitude.abs() * 2.0 * PI / self.period)
    }
}

/// Ball of fixed radius whose centre oscillates along the first axis:
/// `c(t) = center + amplitude · sin(2πt / period) · e_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingBall {
    center: Vec<f64>,
    radius: f64,
    amplitude: f64,
    period: f64,
    horizon: f64,
}

impl MovingBall {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: f64, period: f64, horizon: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) || !(period > 0.0) || !(horizon > 0.0) {
            return Err(Error::InvalidArgument(
                "ball needs a centre, radius > 0, period > 0, horizon > 0".into(),
            ));
        }
        Ok(MovingBall {
            center,
            radius,
            amplitude,
            period,
            horizon,
        })
    }

    /// Static unit disk in the plane.
    pub fn unit_disk(horizon: f64) -> Self {
        MovingBall::new(vec![0.0, 0.0], 1.0, 0.0, 1.0, horizon).expect("valid")
    }

    pub fn center_at(&self, t: f64) -> Vec<f64> {
        let mut c = self.center.clone();
        c[0] += self.amplitude * (2.0 * PI * t / self.period).sin();
        c
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn offset(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let c = self.center_at(t);
        x.iter().zip(&c).map(|(a, b)| a - b).collect()
    }

    fn inward(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let v = self.offset(t, x);
        let scale = norm(&v).max(0.5 * self.radius);
        for (o, c) in out.iter_mut().zip(&v) {
            *o = -c / scale;
        }
    }
}

impl TimeDomain for MovingBall {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn bounding_radius(&self) -> f64 {
        norm(&self.center) + self.amplitude.abs() + self.radius
    }
    fn dist(&self, t: f64, x: &[f64]) -> f64 {
        (norm(&self.offset(t, x)) - self.radius).max(0.0)
    }
    fn signed_distance(&self, t: f64, x: &[f64]) -> Option<f64> {
        Some(norm(&self.offset(t, x)) - self.radius)
    }
    fn speed_bound(&self) -> Option<f64> {
        Some(self.amplitude.abs() * 2.0 * PI / self.period)
    }
}

/// Axis-aligned box with rounded corners, breathing in time: the set of points
/// within `corner_radius` of an inner box with half-widths
/// `(half_widths − corner_radius) · (1 + amplitude · sin(2πt / period))`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundedBox {
    half_widths: Vec<f64>,
    corner_radius: f64,
    amplitude: f64,
    period: f64,
    horizon: f64,
}

impl RoundedBox {
    pub fn new(
        half_widths: Vec<f64>,
        corner_radius: f64,
        amplitude: f64,
        period: f64,
        horizon: f64,
    ) -> Result<Self> {
        let ok = !half_widths.is_empty()
            && corner_radius > 0.0
            && half_widths.iter().all(|&w| w > corner_radius)
            && amplitude.abs() < 1.0
            && period > 0.0
            && horizon > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(
                "rounded box needs half widths > corner radius > 0, |amplitude| < 1, \
                 period > 0, horizon > 0"
                    .into(),
            ));
        }
        Ok(RoundedBox {
            half_widths,
            corner_radius,
            amplitude,
            period,
            horizon,
        })
    }

    fn scale(&self, t: f64) -> f64 {
        1.0 + self.amplitude * (2.0 * PI * t / self.period).sin()
    }

    /// `x − proj_inner(x)` for the inner box at time `t`.
    fn excess(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let s = self.scale(t);
        x.iter()
            .zip(&self.half_widths)
            .map(|(&xi, &w)| {
                let inner = (w - self.corner_radius) * s;
                xi - xi.clamp(-inner, inner)
            })
            .collect()
    }

    fn inward(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let v = self.excess(t, x);
        let scale = norm(&v).max(0.5 * self.corner_radius);
        for (o, c) in out.iter_mut().zip(&v) {
            *o = -c / scale;
        }
    }
}

impl TimeDomain for RoundedBox {
    fn dim(&self) -> usize {
        self.half_widths.len()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn bounding_radius(&self) -> f64 {
        let s = 1.0 + self.amplitude.abs();
        self.half_widths.iter().map(|w| (w * s) * (w * s)).sum::<f64>().sqrt()
    }
    fn dist(&self, t: f64, x: &[f64]) -> f64 {
        (norm(&self.excess(t, x)) - self.corner_radius).max(0.0)
    }
    fn signed_distance(&self, t: f64, x: &[f64]) -> Option<f64> {
        let outside = norm(&self.excess(t, x));
        if outside > 0.0 {
            return Some(outside - self.corner_radius);
        }
        let s = self.scale(t);
        let depth = x
            .iter()
            .zip(&self.half_widths)
            .map(|(&xi, &w)| (w - self.corner_radius) * s - xi.abs())
            .fold(f64::INFINITY, f64::min);
        Some(-depth - self.corner_radius)
    }
    fn speed_bound(&self) -> Option<f64> {
        let w = self
            .half_widths
            .iter()
            .map(|w| w - self.corner_radius)
            .fold(0.0, f64::max);
        Some(w * self.amplitude.abs() * 2.0 * PI / self.period)
    }
}

/// The built-in domains as one type, so fields can be attached to them.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinDomain {
    Interval(MovingInterval),
    Ball(MovingBall),
    Box(RoundedBox),
}

impl BuiltinDomain {
    /// Smoothed inward normal: unit length at and outside the boundary,
    /// shrinking to zero deep inside.
    pub fn inward_field(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            BuiltinDomain::Interval(d) => d.inward(t, x, out),
            BuiltinDomain::Ball(d) => d.inward(t, x, out),
            BuiltinDomain::Box(d) => d.inward(t, x, out),
        }
    }

    fn inner(&self) -> &dyn TimeDomain {
        match self {
            BuiltinDomain::Interval(d) => d,
            BuiltinDomain::Ball(d) => d,
            BuiltinDomain::Box(d) => d,
        }
    }
}

impl TimeDomain for BuiltinDomain {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn horizon(&self) -> f64 {
        self.inner().horizon()
    }
    fn bounding_radius(&self) -> f64 {
        self.inner().bounding_radius()
    }
    fn dist(&self, t: f64, x: &[f64]) -> f64 {
        self.inner().dist(t, x)
    }
    fn signed_distance(&self, t: f64, x: &[f64]) -> Option<f64> {
        self.inner().signed_distance(t, x)
    }
    fn speed_bound(&self) -> Option<f64> {
        self.inner().speed_bound()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldKind {
    /// Inward normal.
    Normal,
    /// Inward normal rotated by a fixed angle (radians); planar domains only.
    Rotated(f64),
    /// Outward normal. Violates the cone condition; kept as a negative control.
    Outward,
}

/// Direction field attached to a built-in domain.
#[derive(Clone, Debug)]
pub struct PresetField {
    domain: Arc<BuiltinDomain>,
    kind: FieldKind,
    rho: f64,
}

impl PresetField {
    pub fn new(domain: Arc<BuiltinDomain>, kind: FieldKind, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("cone aperture must lie in (0,1), got {rho}")));
        }
        if let FieldKind::Rotated(angle) = kind {
            if domain.dim() != 2 {
                return Err(Error::InvalidArgument(
                    "rotated direction fields need a planar domain".into(),
                ));
            }
            if !(angle.cos() > rho) {
                return Err(Error::InvalidArgument(format!(
                    "rotation {angle} rad leaves no exterior cone of aperture {rho}"
                )));
            }
        }
        Ok(PresetField { domain, kind, rho })
    }

    /// Default aperture for a field kind: half the cosine of the rotation.
    pub fn default_rho(kind: FieldKind) -> f64 {
        match kind {
            FieldKind::Rotated(a) => 0.5 * a.cos(),
            _ => 0.5,
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }
}

impl DirectionField for PresetField {
    fn gamma(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.domain.inward_field(t, x, out);
        match self.kind {
            FieldKind::Normal => {}
            FieldKind::Outward => out.iter_mut().for_each(|v| *v = -*v),
            FieldKind::Rotated(a) => {
                let (s, c) = a.sin_cos();
                let (u, v) = (out[0], out[1]);
                out[0] = c * u - s * v;
                out[1] = s * u + c * v;
            }
        }
    }

    fn rho(&self) -> f64 {
        self.rho
    }
}
