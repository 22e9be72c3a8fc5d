//! Projected Euler scheme for the reflected dynamics.
//!
//! One step makes the unconstrained Euler move and then pushes the tentative
//! point back into the section at the *new* time along `γ`. The push length
//! is the local-time increment, and the push displacement is the reflector
//! increment.

use crate::coefficients::EmpiricalMeasure;
use crate::ensemble::{MeasureFlow, Model};
use crate::error::{Error, Result};
use crate::geometry::{check_time, nearest_boundary, DirectionField, TimeDomain};
use crate::grid::TimeGrid;
use crate::noise::NoisePath;
use crate::vecops::{dist, norm};
use crate::MAX_PROJECT_ITERS;

/// Result of an oblique projection.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Total push `Σ s_i` over sub-steps (the local-time increment).
    pub xi: f64,
    /// Unit vector along the net displacement; zero when nothing moved.
    pub direction: Vec<f64>,
    /// Net displacement `Σ s_i γ_i` (the reflector increment).
    pub displacement: Vec<f64>,
}

fn along(x: &[f64], s: f64, g: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(g) {
        *o = a + s * b;
    }
}

/// Step length along `g` from `x` that brings the point back within `tol`:
/// bracket by doubling from `start`, then bisect. When doubling never enters,
/// falls back to the step minimizing the distance (golden section).
fn step_along(
    domain: &(impl TimeDomain + ?Sized),
    t: f64,
    x: &[f64],
    g: &[f64],
    start: f64,
    tol: f64,
) -> (f64, bool) {
    let mut buf = x.to_vec();
    let mut eval = |s: f64| {
        along(x, s, g, &mut buf);
        domain.dist(t, &buf)
    };
    let limit = 4.0 * domain.bounding_radius() + start;
    let (mut lo, mut hi) = (0.0, start.max(tol));
    loop {
        if eval(hi) <= tol {
            break;
        }
        if hi > limit {
            // Golden section on [0, limit] for the closest approach.
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (0.0, limit);
            for _ in 0..200 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if eval(c) <= eval(d) {
                    b = d;
                } else {
                    a = c;
                }
                if b - a < tol {
                    break;
                }
            }
            return (0.5 * (a + b), false);
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 0.5 * tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi, true)
}

/// Pushes `x` into `D̄_t` along the direction field.
///
/// Each sub-step re-anchors at the nearest boundary point of the current
/// iterate and moves along `γ` at that anchor. Points within `tol_boundary`
/// of the section are returned unchanged.
pub fn oblique_project(
    domain: &(impl TimeDomain + ?Sized),
    field: &(impl DirectionField + ?Sized),
    t: f64,
    x: &[f64],
) -> Result<Projection> {
    check_time(domain.horizon(), t)?;
    if x.len() != domain.dim() {
        return Err(Error::Shape {
            what: "point",
            expected: domain.dim(),
            got: x.len(),
        });
    }
    let d = x.len();
    let tol = domain.tol_boundary();
    let mut cur = x.to_vec();
    let mut dcur = domain.dist(t, &cur);
    let mut xi = 0.0;
    let mut gamma = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut iters = 0;
    while dcur > tol {
        if iters == MAX_PROJECT_ITERS {
            return Err(Error::ProjectionFailure { t, iters, last: cur });
        }
        iters += 1;
        let anchor = nearest_boundary(domain, t, &cur)?;
        field.gamma(t, &anchor.point, &mut gamma);
        if !(norm(&gamma) > 0.0) {
            return Err(Error::ProjectionFailure { t, iters, last: cur });
        }
        let (s, entered) = step_along(domain, t, &cur, &gamma, dcur, tol);
        along(&cur, s, &gamma, &mut next);
        let dnext = domain.dist(t, &next);
        if !entered && dnext >= dcur {
            return Err(Error::ProjectionFailure { t, iters, last: cur });
        }
        xi += s;
        std::mem::swap(&mut cur, &mut next);
        dcur = dnext;
    }
    let displacement: Vec<f64> = cur.iter().zip(x).map(|(a, b)| a - b).collect();
    let len = norm(&displacement);
    let direction = if len > 0.0 {
        displacement.iter().map(|v| v / len).collect()
    } else {
        vec![0.0; d]
    };
    Ok(Projection {
        point: cur,
        xi,
        direction,
        displacement,
    })
}

/// State of a reflected path at one grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectedState {
    pub t: f64,
    pub x: Vec<f64>,
    /// `|K|_t`.
    pub local_time: f64,
    /// `K_t`.
    pub reflector: Vec<f64>,
}

impl ReflectedState {
    pub fn start(x0: &[f64]) -> Self {
        ReflectedState {
            t: 0.0,
            x: x0.to_vec(),
            local_time: 0.0,
            reflector: vec![0.0; x0.len()],
        }
    }
}

/// One projected Euler step. `h` is an optional control rate added to the
/// noise forcing: `y = x + b·dt + σ·(scale·dW + h·dt)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn advance(
    model: &Model,
    state: &ReflectedState,
    mu: &EmpiricalMeasure,
    t_next: f64,
    dw: &[f64],
    scale: f64,
    h: Option<&[f64]>,
    scratch: &mut StepScratch,
) -> Result<(ReflectedState, f64)> {
    let cs = &model.coefficients;
    let d = cs.dim();
    let m = cs.noise_dim();
    let dt = t_next - state.t;
    cs.drift_into(state.t, &state.x, mu, &mut scratch.b);
    cs.diffusion_into(state.t, &state.x, mu, &mut scratch.sigma);
    for j in 0..m {
        let hj = h.map_or(0.0, |h| h[j]);
        scratch.forcing[j] = scale * dw[j] + hj * dt;
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let row = &scratch.sigma[i * m..(i + 1) * m];
        let noise: f64 = row.iter().zip(&scratch.forcing).map(|(s, f)| s * f).sum();
        y[i] = state.x[i] + scratch.b[i] * dt + noise;
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite tentative state {y:?}")));
    }
    let p = oblique_project(model.domain.as_ref(), model.field.as_ref(), t_next, &y)?;
    let reflector = state.reflector.iter().zip(&p.displacement).map(|(k, v)| k + v).collect();
    Ok((
        ReflectedState {
            t: t_next,
            x: p.point,
            local_time: state.local_time + p.xi,
            reflector,
        },
        p.xi,
    ))
}

pub(crate) struct StepScratch {
    b: Vec<f64>,
    sigma: Vec<f64>,
    forcing: Vec<f64>,
}

impl StepScratch {
    pub(crate) fn new(model: &Model) -> Self {
        let (d, m) = (model.coefficients.dim(), model.coefficients.noise_dim());
        StepScratch {
            b: vec![0.0; d],
            sigma: vec![0.0; d * m],
            forcing: vec![0.0; m],
        }
    }
}

/// One step of length `dt` driven by the increment `dw` scaled by `noise_scale`,
/// with coefficients evaluated against `mu`.
pub fn constrained_euler_step(
    model: &Model,
    state: &ReflectedState,
    mu: &EmpiricalMeasure,
    dt: f64,
    dw: &[f64],
    noise_scale: f64,
) -> Result<ReflectedState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step size {dt} must be positive")));
    }
    if !(noise_scale >= 0.0) {
        return Err(Error::InvalidArgument("noise scale must be nonnegative".into()));
    }
    let cs = &model.coefficients;
    if state.x.len() != cs.dim() {
        return Err(Error::Shape {
            what: "state",
            expected: cs.dim(),
            got: state.x.len(),
        });
    }
    if dw.len() != cs.noise_dim() {
        return Err(Error::Shape {
            what: "noise increment",
            expected: cs.noise_dim(),
            got: dw.len(),
        });
    }
    if mu.dim() != cs.dim() {
        return Err(Error::Shape {
            what: "measure dimension",
            expected: cs.dim(),
            got: mu.dim(),
        });
    }
    let mut scratch = StepScratch::new(model);
    Ok(advance(model, state, mu, state.t + dt, dw, noise_scale, None, &mut scratch)?.0)
}

/// A reflected trajectory on a grid: positions, `|K|` and `K` at every node,
/// and the local-time increment of every step.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectedPath {
    grid: TimeGrid,
    dim: usize,
    positions: Vec<f64>,
    local_time: Vec<f64>,
    reflector: Vec<f64>,
    xi: Vec<f64>,
}

impl ReflectedPath {
    pub(crate) fn with_start(grid: TimeGrid, x0: &[f64]) -> Self {
        let n = grid.n_nodes();
        let d = x0.len();
        let mut positions = Vec::with_capacity(n * d);
        positions.extend_from_slice(x0);
        let mut reflector = Vec::with_capacity(n * d);
        reflector.extend(std::iter::repeat(0.0).take(d));
        let mut local_time = Vec::with_capacity(n);
        local_time.push(0.0);
        ReflectedPath {
            grid,
            dim: d,
            positions,
            local_time,
            reflector,
            xi: Vec::with_capacity(n - 1),
        }
    }

    pub(crate) fn push(&mut self, s: &ReflectedState, xi: f64) {
        self.positions.extend_from_slice(&s.x);
        self.reflector.extend_from_slice(&s.reflector);
        self.local_time.push(s.local_time);
        self.xi.push(xi);
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.local_time.len()
    }

    pub fn position(&self, k: usize) -> &[f64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.position(self.n_nodes() - 1)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn local_time(&self, k: usize) -> f64 {
        self.local_time[k]
    }

    pub fn reflector(&self, k: usize) -> &[f64] {
        &self.reflector[k * self.dim..(k + 1) * self.dim]
    }

    /// Local-time increment of step `k` (from node `k` to `k + 1`).
    pub fn xi(&self, k: usize) -> f64 {
        self.xi[k]
    }

    pub fn state(&self, k: usize) -> ReflectedState {
        ReflectedState {
            t: self.grid.time(k),
            x: self.position(k).to_vec(),
            local_time: self.local_time[k],
            reflector: self.reflector(k).to_vec(),
        }
    }

    /// `max_k ‖x_k − y_k‖` over the shared grid.
    pub fn sup_distance(&self, other: &ReflectedPath) -> f64 {
        (0..self.n_nodes().min(other.n_nodes()))
            .map(|k| dist(self.position(k), other.position(k)))
            .fold(0.0, f64::max)
    }
}

/// Where the measure argument of the coefficients comes from along a path.
#[derive(Clone, Copy)]
pub(crate) enum Law<'a> {
    /// The given flow, read at the step-start node.
    Flow(&'a MeasureFlow),
    /// The Dirac mass at the current state.
    SelfDirac,
}

pub(crate) fn check_start(model: &Model, x0: &[f64]) -> Result<()> {
    let dom = model.domain.as_ref();
    let d0 = dom.distance(0.0, x0)?;
    if d0 > dom.tol_boundary() {
        return Err(Error::InvalidArgument(format!(
            "start point {x0:?} is at distance {d0} outside the initial section"
        )));
    }
    Ok(())
}

pub(crate) fn check_grid(model: &Model, grid: &TimeGrid) -> Result<()> {
    let horizon = model.domain.horizon();
    if grid.horizon() > horizon * (1.0 + f64::EPSILON) {
        return Err(Error::DomainRange {
            t: grid.horizon(),
            horizon,
        });
    }
    Ok(())
}

/// Folds [`advance`] over the grid for a single path. `noise(k, dt, out)`
/// supplies the raw increment of step `k`; `control` holds one `m`-vector per
/// step. The observer sees every new state with its local-time increment.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate(
    model: &Model,
    x0: &[f64],
    grid: &TimeGrid,
    law: Law<'_>,
    noise: &mut dyn FnMut(usize, f64, &mut [f64]),
    scale: f64,
    control: Option<&[f64]>,
    observer: &mut dyn FnMut(usize, &ReflectedState, f64),
) -> Result<ReflectedState> {
    let m = model.coefficients.noise_dim();
    let mut scratch = StepScratch::new(model);
    let mut dw = vec![0.0; m];
    let mut state = ReflectedState::start(x0);
    let mut dirac;
    for k in 0..grid.n_steps() {
        let dt = grid.dt(k);
        noise(k, dt, &mut dw);
        let mu = match law {
            Law::Flow(f) => f.measure(k),
            Law::SelfDirac => {
                dirac = EmpiricalMeasure::dirac(&state.x);
                &dirac
            }
        };
        let h = control.map(|c| &c[k * m..(k + 1) * m]);
        let (next, xi) = advance(model, &state, mu, grid.time(k + 1), &dw, scale, h, &mut scratch)
            .map_err(|e| e.at_step(None, k))?;
        observer(k + 1, &next, xi);
        state = next;
    }
    Ok(state)
}

pub(crate) fn record(
    model: &Model,
    x0: &[f64],
    grid: &TimeGrid,
    law: Law<'_>,
    noise: &mut dyn FnMut(usize, f64, &mut [f64]),
    scale: f64,
    control: Option<&[f64]>,
) -> Result<ReflectedPath> {
    let mut path = ReflectedPath::with_start(grid.clone(), x0);
    integrate(model, x0, grid, law, noise, scale, control, &mut |_, s, xi| path.push(s, xi))?;
    Ok(path)
}

/// Solves the reflected equation with the measure argument frozen at `flow`,
/// driven by `noise` scaled by `noise_scale`.
pub fn drive_path(
    model: &Model,
    x0: &[f64],
    flow: &MeasureFlow,
    noise: &NoisePath,
    noise_scale: f64,
) -> Result<ReflectedPath> {
    let grid = flow.grid();
    check_grid(model, grid)?;
    check_start(model, x0)?;
    if noise.n_steps() != grid.n_steps() || noise.noise_dim() != model.coefficients.noise_dim() {
        return Err(Error::InvalidArgument(format!(
            "noise path is {} x {}, grid needs {} x {}",
            noise.n_steps(),
            noise.noise_dim(),
            grid.n_steps(),
            model.coefficients.noise_dim()
        )));
    }
    flow.check_dim(model.coefficients.dim())?;
    record(
        model,
        x0,
        grid,
        Law::Flow(flow),
        &mut |k, _, out| out.copy_from_slice(noise.step(k)),
        noise_scale,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{preset, CoefficientSet, Functional, InteractionKernel, PresetParams};
    use crate::geometry::{BuiltinDomain, FieldKind, FnDomain, FnField, MovingBall, MovingInterval, PresetField};
    use crate::noise::NoiseDriver;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn static_interval(r: f64, horizon: f64) -> Arc<BuiltinDomain> {
        Arc::new(BuiltinDomain::Interval(MovingInterval::new(r, 0.0, 1.0, horizon).unwrap()))
    }

    fn model_with(dom: Arc<BuiltinDomain>, cs: CoefficientSet) -> Model {
        let field = PresetField::new(dom.clone(), FieldKind::Normal, 0.5).unwrap();
        Model::new(dom, Arc::new(field), Arc::new(cs)).unwrap()
    }

    fn constant_drift(v: f64) -> CoefficientSet {
        let p = PresetParams {
            drift: Some(vec![v]),
            ..Default::default()
        };
        preset("constant_drift", &p, 1, 1.0).unwrap()
    }

    #[test]
    fn interior_point_is_fixed() {
        let dom = MovingInterval::new(1.0, 0.25, 1.0, 1.0).unwrap();
        let f = FnField::new(0.5, |_, x: &[f64], o: &mut [f64]| o[0] = -x[0].signum());
        let p = oblique_project(&dom, &f, 0.0, &[0.5]).unwrap();
        assert_eq!(p.point, vec![0.5]);
        assert_eq!(p.xi, 0.0);
        assert_eq!(p.direction, vec![0.0]);
    }

    // 1-D bisection oracle for the landing point of 1.2 pushed along -1.
    #[test]
    fn interval_push() {
        let dom = MovingInterval::new(1.0, 0.25, 1.0, 1.0).unwrap();
        let f = FnField::new(0.5, |_, x: &[f64], o: &mut [f64]| o[0] = -x[0].signum());
        let (mut lo, mut hi) = (0.0, 1.2);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if dom.dist(0.0, &[1.2 - mid]) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let p = oblique_project(&dom, &f, 0.0, &[1.2]).unwrap();
        assert!((p.xi - hi).abs() < 1e-8 && (hi - 0.2).abs() < 1e-12);
        assert!((p.point[0] - 1.0).abs() < 1e-8);
        assert_eq!(p.direction, vec![-1.0]);
    }

    // Smaller root of (1.2 - ξ cos30°)² + (ξ sin30°)² = 1.
    #[test]
    fn rotated_disk_push_matches_quadratic_root() {
        let c = (PI / 6.0).cos();
        let (bq, cq) = (-2.4 * c, 1.44 - 1.0);
        let root = 0.5 * (-bq - (bq * bq - 4.0 * cq).sqrt());
        assert!((root - 0.2394).abs() < 5e-4);
        let dom = MovingBall::unit_disk(1.0);
        let f = FnField::new(0.4, move |_, _: &[f64], o: &mut [f64]| {
            o[0] = -c;
            o[1] = 0.5;
        });
        let p = oblique_project(&dom, &f, 0.0, &[1.2, 0.0]).unwrap();
        assert!((p.xi - root).abs() < 1e-8, "{} vs {root}", p.xi);
        assert!((norm(&p.point) - 1.0).abs() < 1e-8);
        assert!((norm(&p.displacement) - p.xi).abs() < 1e-12);
    }

    #[test]
    fn outward_field_fails_to_project() {
        let dom = Arc::new(BuiltinDomain::Ball(MovingBall::unit_disk(1.0)));
        let f = PresetField::new(dom.clone(), FieldKind::Outward, 0.4).unwrap();
        let e = oblique_project(dom.as_ref(), &f, 0.0, &[1.2, 0.0]).unwrap_err();
        assert!(matches!(e, Error::ProjectionFailure { .. }), "{e}");
        assert_eq!(e.code(), 6);
    }

    #[test]
    fn zero_coefficients_static_domain() {
        let m = model_with(static_interval(1.0, 1.0), preset("zero", &PresetParams::default(), 1, 1.0).unwrap());
        let s = ReflectedState::start(&[0.3]);
        let next = constrained_euler_step(&m, &s, &EmpiricalMeasure::dirac(&[0.0]), 0.1, &[0.7], 1.0).unwrap();
        assert_eq!(next.x, vec![0.3]);
        assert_eq!(next.local_time, 0.0);
        assert_eq!(next.t, 0.1);
    }

    // The interval shrinks from r = 1 to 0.9 over one step, pushing 0.95 to 0.9.
    #[test]
    fn domain_motion_alone_reflects() {
        let dom = FnDomain::new(1, 1.0, 1.0, |t, x: &[f64]| (x[0].abs() - (1.0 - t)).max(0.0)).unwrap();
        let field = FnField::new(0.5, |_, x: &[f64], o: &mut [f64]| o[0] = -x[0].signum());
        let m = Model::new(
            Arc::new(dom),
            Arc::new(field),
            Arc::new(preset("zero", &PresetParams::default(), 1, 1.0).unwrap()),
        )
        .unwrap();
        let s = ReflectedState::start(&[0.95]);
        let next = constrained_euler_step(&m, &s, &EmpiricalMeasure::dirac(&[0.0]), 0.1, &[0.0], 1.0).unwrap();
        assert!((next.x[0] - 0.9).abs() < 1e-8);
        assert!((next.local_time - 0.05).abs() < 1e-8);
        assert!((next.reflector[0] + 0.05).abs() < 1e-8);
    }

    #[test]
    fn drift_overshoot_is_projected() {
        let m = model_with(static_interval(1.0, 1.0), constant_drift(2.0));
        let s = ReflectedState {
            t: 0.0,
            x: vec![0.99],
            local_time: 0.0,
            reflector: vec![0.0],
        };
        let next = constrained_euler_step(&m, &s, &EmpiricalMeasure::dirac(&[0.0]), 0.01, &[0.0], 0.0).unwrap();
        assert!((next.x[0] - 1.0).abs() < 1e-8);
        assert!((next.local_time - 0.01).abs() < 1e-8);
    }

    fn flow_for(grid: &TimeGrid, x: f64) -> MeasureFlow {
        MeasureFlow::constant(grid.clone(), EmpiricalMeasure::dirac(&[x]))
    }

    #[test]
    fn constant_path_without_coefficients() {
        let m = model_with(static_interval(1.0, 1.0), preset("zero", &PresetParams::default(), 1, 1.0).unwrap());
        let grid = TimeGrid::uniform(1.0, 50).unwrap();
        let noise = NoiseDriver::new(1, 1).path(0, &grid);
        let p = drive_path(&m, &[0.2], &flow_for(&grid, 0.0), &noise, 1.0).unwrap();
        assert!((0..p.n_nodes()).all(|k| p.position(k) == [0.2]));
        assert_eq!(p.local_time(50), 0.0);
    }

    // dx = dt until the wall at 1, then the local time grows at rate 1.
    #[test]
    fn sticking_at_the_wall() {
        let m = model_with(static_interval(1.0, 2.0), constant_drift(1.0));
        let grid = TimeGrid::uniform(2.0, 200).unwrap();
        let p = drive_path(&m, &[0.0], &flow_for(&grid, 0.0), &NoisePath::zeros(1, 200), 0.0).unwrap();
        assert!((p.position(100)[0] - 1.0).abs() < 1e-8);
        assert!((p.terminal()[0] - 1.0).abs() < 1e-8);
        assert!(p.local_time(100) < 1e-8);
        assert!((p.local_time(200) - p.local_time(100) - 1.0).abs() < 1e-6);
        for k in 0..200 {
            assert!(p.local_time(k + 1) >= p.local_time(k));
        }
    }

    #[test]
    fn mismatched_noise_path_is_rejected() {
        let m = model_with(static_interval(1.0, 1.0), constant_drift(1.0));
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let e = drive_path(&m, &[0.0], &flow_for(&grid, 0.0), &NoisePath::zeros(1, 9), 0.0);
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
        let e = drive_path(&m, &[3.0], &flow_for(&grid, 0.0), &NoisePath::zeros(1, 10), 0.0);
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }

    fn mean_reversion_model(sigma: f64) -> Model {
        let dom = Arc::new(BuiltinDomain::Interval(MovingInterval::new(1.0, 0.25, 1.0, 1.0).unwrap()));
        let cs = preset(
            "mean_reversion",
            &PresetParams {
                sigma: Some(sigma),
                ..Default::default()
            },
            1,
            1.25,
        )
        .unwrap();
        model_with(dom, cs)
    }

    // Coarse path driven by the summed fine increments.
    fn coarse_vs_fine(m: &Model, n: usize, seed: u64) -> f64 {
        let fine = TimeGrid::uniform(1.0, 2 * n).unwrap();
        let coarse = TimeGrid::uniform(1.0, n).unwrap();
        let fnoise = NoiseDriver::new(seed, 1).path(0, &fine);
        let cvals: Vec<f64> = (0..n).map(|k| fnoise.step(2 * k)[0] + fnoise.step(2 * k + 1)[0]).collect();
        let cnoise = NoisePath::from_values(1, cvals).unwrap();
        let pf = drive_path(m, &[0.1], &flow_for(&fine, 0.5), &fnoise, 1.0).unwrap();
        let pc = drive_path(m, &[0.1], &flow_for(&coarse, 0.5), &cnoise, 1.0).unwrap();
        (0..=n).map(|k| (pc.position(k)[0] - pf.position(2 * k)[0]).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn deterministic_self_convergence_is_first_order() {
        let m = mean_reversion_model(0.0);
        let e1 = coarse_vs_fine(&m, 100, 0);
        let e2 = coarse_vs_fine(&m, 200, 0);
        assert!(e1 > 0.0);
        let ratio = e1 / e2;
        assert!(ratio > 1.6 && ratio < 2.5, "ratio {ratio}");
    }

    #[test]
    fn noisy_self_convergence_is_half_order() {
        let m = mean_reversion_model(1.0);
        let avg = |n| (0..40).map(|s| coarse_vs_fine(&m, n, s)).sum::<f64>() / 40.0;
        let (e1, e2) = (avg(64), avg(256));
        // Quartering dt halves the error at order 1/2 (ratio 2), not 4.
        let ratio = e1 / e2;
        assert!(ratio > 1.3 && ratio < 3.2, "ratio {ratio}");
    }

    #[test]
    fn identical_inputs_are_bit_identical() {
        let m = mean_reversion_model(1.0);
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let noise = NoiseDriver::new(3, 1).path(9, &grid);
        let a = drive_path(&m, &[0.0], &flow_for(&grid, 0.5), &noise, 1.0).unwrap();
        let b = drive_path(&m, &[0.0], &flow_for(&grid, 0.5), &noise, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn custom_functional_drift() {
        let drift = Functional::Kernel(InteractionKernel::zero().with_self_term(|_, _, o| o[0] = 1.0));
        let cs = CoefficientSet::new(1, 1, drift, Functional::Kernel(InteractionKernel::zero()));
        let m = model_with(static_interval(1.0, 1.0), cs);
        let s = constrained_euler_step(&m, &ReflectedState::start(&[0.0]), &EmpiricalMeasure::dirac(&[0.0]), 0.5, &[0.0], 1.0)
            .unwrap();
        assert_eq!(s.x, vec![0.5]);
    }
}
