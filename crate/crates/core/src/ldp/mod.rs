//! Small-noise large deviations: the noise-free limit `ψ`, the skeleton
//! equation `Y^h`, the rate functional, the controlled process `Z^ε`, and
//! Monte Carlo diagnostics.
//!
//! In the skeleton equation the measure argument is frozen at `δ_{ψ_t}`, so
//! `Y^h` does not depend on its own law. In the controlled process it is
//! frozen at the flow of the uncontrolled small-noise system, which callers
//! must compute first and pass in.

use serde::Serialize;

use crate::ensemble::{self_dirac_path, MeasureFlow, Model};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::reflection::{self, check_grid, check_start, Law, ReflectedPath};

mod checks;
mod optimize;
mod rare;

pub use checks::{
    check_ldp1, check_ldp2, check_limit_law, oscillatory_sequence, simulate_controlled, simulate_small_noise,
    Ldp1Report, Ldp2Report, Ldp2Row, LimitLawReport, LimitLawRow, SmallNoiseRun,
};
pub use optimize::{rate_of_path, OptConfig, RateTarget};
pub use rare::{clopper_pearson, estimate_rare_event, EventKind, RareEvent, RareEventRow, RareEventTable};

/// Piecewise-constant control: one `m`-vector per grid interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Control {
    grid: TimeGrid,
    noise_dim: usize,
    values: Vec<f64>,
}

impl Control {
    pub fn new(grid: TimeGrid, noise_dim: usize, values: Vec<f64>) -> Result<Self> {
        if noise_dim == 0 {
            return Err(Error::InvalidArgument("control dimension must be positive".into()));
        }
        if values.len() != grid.n_steps() * noise_dim {
            return Err(Error::Shape {
                what: "control values",
                expected: grid.n_steps() * noise_dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("control values must be finite".into()));
        }
        Ok(Control {
            grid,
            noise_dim,
            values,
        })
    }

    pub fn zeros(grid: TimeGrid, noise_dim: usize) -> Self {
        let values = vec![0.0; grid.n_steps() * noise_dim];
        Control {
            grid,
            noise_dim,
            values,
        }
    }

    /// `h ≡ c`.
    pub fn constant(grid: TimeGrid, c: &[f64]) -> Result<Self> {
        let values = c.repeat(grid.n_steps());
        Control::new(grid, c.len(), values)
    }

    /// Cell averages of `f` over each interval, given an antiderivative `F`
    /// of `f` (the same in every component).
    pub fn from_antiderivative(grid: TimeGrid, noise_dim: usize, big_f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n_steps() * noise_dim);
        for k in 0..grid.n_steps() {
            let v = (big_f(grid.time(k + 1)) - big_f(grid.time(k))) / grid.dt(k);
            values.extend(std::iter::repeat(v).take(noise_dim));
        }
        Control::new(grid, noise_dim, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.values[k * self.noise_dim..(k + 1) * self.noise_dim]
    }

    pub fn scaled(&self, c: f64) -> Control {
        Control {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    pub fn plus(&self, other: &Control) -> Result<Control> {
        if !self.grid.same_as(&other.grid) || self.noise_dim != other.noise_dim {
            return Err(Error::InvalidArgument("controls live on different grids".into()));
        }
        Ok(Control {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// `½ Σ_{k ∈ [k0, k1)} ‖h_k‖² dt_k`.
    pub fn energy_between(&self, k0: usize, k1: usize) -> f64 {
        (k0..k1)
            .map(|k| 0.5 * self.step(k).iter().map(|v| v * v).sum::<f64>() * self.grid.dt(k))
            .sum()
    }

    pub fn energy(&self) -> f64 {
        self.energy_between(0, self.grid.n_steps())
    }
}

/// `I(h) = ½ ∫ ‖h(t)‖² dt` for a piecewise-constant control.
pub fn rate_functional(h: &Control) -> f64 {
    h.energy()
}

/// Result of minimizing the control energy over a target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RateValue {
    /// An approximately feasible control was found. `value` is its energy, an
    /// upper-bound estimate of the rate; `residual` is the sup-norm miss.
    Finite {
        value: f64,
        #[serde(skip)]
        witness: Control,
        residual: f64,
    },
    /// No control brought the residual below the feasibility tolerance.
    Infinite { best_residual: f64 },
}

impl RateValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, RateValue::Infinite { .. })
    }

    /// The value, with `+∞` for the infinite case.
    pub fn value(&self) -> f64 {
        match self {
            RateValue::Finite { value, .. } => *value,
            RateValue::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn witness(&self) -> Option<&Control> {
        match self {
            RateValue::Finite { witness, .. } => Some(witness),
            RateValue::Infinite { .. } => None,
        }
    }
}

/// The noise-free limit `ψ`: `dψ = b(t, ψ, δ_ψ) dt` reflected, with the law
/// argument the Dirac mass at the current state.
pub fn solve_limit_ode(model: &Model, x0: &[f64], grid: &TimeGrid) -> Result<ReflectedPath> {
    self_dirac_path(model, x0, grid)
}

/// The skeleton equation `dY = b(t, Y, δ_{ψ_t}) dt + σ(t, Y, δ_{ψ_t}) h dt`,
/// reflected. `ψ` and `h` must live on the same grid.
pub fn solve_skeleton(model: &Model, x0: &[f64], psi: &ReflectedPath, h: &Control) -> Result<ReflectedPath> {
    let flow = MeasureFlow::dirac_flow(psi);
    skeleton_on_flow(model, x0, &flow, h)
}

pub(crate) fn skeleton_on_flow(model: &Model, x0: &[f64], flow: &MeasureFlow, h: &Control) -> Result<ReflectedPath> {
    let grid = flow.grid();
    if !h.grid().same_as(grid) {
        return Err(Error::InvalidArgument("control and limit path live on different grids".into()));
    }
    if h.noise_dim() != model.noise_dim() {
        return Err(Error::Shape {
            what: "control dimension",
            expected: model.noise_dim(),
            got: h.noise_dim(),
        });
    }
    flow.check_dim(model.dim())?;
    check_grid(model, grid)?;
    check_start(model, x0)?;
    reflection::record(
        model,
        x0,
        grid,
        Law::Flow(flow),
        &mut |_, _, out| out.iter_mut().for_each(|v| *v = 0.0),
        0.0,
        Some(h.values()),
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::coefficients::{preset, CoefficientSet, PresetParams, PRESET_NAMES};
    use crate::geometry::{BuiltinDomain, FieldKind, MovingInterval, PresetField};
    use proptest::prelude::*;
    use std::sync::Arc;

    pub(crate) fn model(r: f64, amp: f64, name: &str, params: PresetParams) -> Model {
        let dom = Arc::new(BuiltinDomain::Interval(MovingInterval::new(r, amp, 1.0, 1.0).unwrap()));
        let field = PresetField::new(dom.clone(), FieldKind::Normal, 0.5).unwrap();
        let cs: CoefficientSet = preset(name, &params, 1, r * (1.0 + amp.abs())).unwrap();
        Model::new(dom, Arc::new(field), Arc::new(cs)).unwrap()
    }

    pub(crate) fn free_model(r: f64) -> Model {
        model(r, 0.0, "brownian", PresetParams::default())
    }

    #[test]
    fn constant_limit_without_drift() {
        let m = free_model(5.0);
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let p = solve_limit_ode(&m, &[0.7], &grid).unwrap();
        assert!((0..=20).all(|k| p.position(k) == [0.7]));
    }

    // mean(δ_ψ) − ψ = 0, so the mean-reverting kernel leaves ψ constant.
    #[test]
    fn self_dirac_cancels_mean_reversion() {
        let m = model(1.0, 0.0, "mean_reversion", PresetParams::default());
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let p = solve_limit_ode(&m, &[0.3], &grid).unwrap();
        assert!((0..=20).all(|k| p.position(k) == [0.3]));
    }

    // ψ' = −ψ on a large static interval; halving dt halves the gap to exp(−t).
    #[test]
    fn limit_ode_is_first_order() {
        let m = model(5.0, 0.0, "ou", PresetParams::default());
        let err = |n| {
            let g = TimeGrid::uniform(1.0, n).unwrap();
            let p = solve_limit_ode(&m, &[1.0], &g).unwrap();
            (0..=n).map(|k| (p.position(k)[0] - (-g.time(k)).exp()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(50) / err(100);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn skeleton_with_zero_control_is_the_limit_bitwise() {
        let grid = TimeGrid::uniform(1.0, 40).unwrap();
        for name in PRESET_NAMES {
            let m = model(1.0, 0.25, name, PresetParams::default());
            let psi = solve_limit_ode(&m, &[0.6], &grid).unwrap();
            let y = solve_skeleton(&m, &[0.6], &psi, &Control::zeros(grid.clone(), 1)).unwrap();
            assert_eq!(y, psi, "{name}");
        }
    }

    #[test]
    fn skeleton_ignores_control_without_diffusion() {
        let m = model(1.0, 0.25, "ou", PresetParams { sigma: Some(0.0), ..Default::default() });
        let grid = TimeGrid::uniform(1.0, 40).unwrap();
        let psi = solve_limit_ode(&m, &[0.6], &grid).unwrap();
        let h = Control::constant(grid.clone(), &[3.0]).unwrap();
        assert_eq!(solve_skeleton(&m, &[0.6], &psi, &h).unwrap(), psi);
    }

    #[test]
    fn skeleton_integrates_a_constant_control() {
        let m = free_model(5.0);
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let psi = solve_limit_ode(&m, &[0.0], &grid).unwrap();
        let y = solve_skeleton(&m, &[0.0], &psi, &Control::constant(grid.clone(), &[0.8]).unwrap()).unwrap();
        for k in 0..=64 {
            assert!((y.position(k)[0] - 0.8 * grid.time(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_examples() {
        let grid = TimeGrid::uniform(2.0, 10).unwrap();
        assert_eq!(rate_functional(&Control::zeros(grid.clone(), 2)), 0.0);
        let h = Control::constant(grid.clone(), &[3.0]).unwrap();
        assert!((rate_functional(&h) - 0.5 * 9.0 * 2.0).abs() < 1e-12);
        assert!((h.energy_between(0, 5) + h.energy_between(5, 10) - h.energy()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_control_grid_is_rejected() {
        let m = free_model(5.0);
        let g1 = TimeGrid::uniform(1.0, 10).unwrap();
        let g2 = TimeGrid::uniform(1.0, 11).unwrap();
        let psi = solve_limit_ode(&m, &[0.0], &g1).unwrap();
        assert!(solve_skeleton(&m, &[0.0], &psi, &Control::zeros(g2, 1)).is_err());
    }

    proptest! {
        #[test]
        fn rate_is_quadratically_homogeneous(v in prop::collection::vec(-5.0..5.0f64, 8)) {
            let grid = TimeGrid::uniform(1.0, 8).unwrap();
            let h = Control::new(grid, 1, v).unwrap();
            let r = rate_functional(&h);
            prop_assert!(r >= 0.0);
            prop_assert_eq!(rate_functional(&h.scaled(2.0)), 4.0 * r);
        }

        #[test]
        fn rate_vanishes_only_at_zero(v in prop::collection::vec(-1.0..1.0f64, 6), i in 0usize..6) {
            let grid = TimeGrid::uniform(1.0, 6).unwrap();
            let mut v = v;
            v[i] = if v[i] == 0.0 { 0.5 } else { v[i] };
            prop_assert!(rate_functional(&Control::new(grid, 1, v).unwrap()) > 0.0);
        }
    }
}
