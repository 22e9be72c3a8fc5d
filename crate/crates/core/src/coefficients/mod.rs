//! Measure-dependent drift `b(t, x, μ)` and diffusion `σ(t, x, μ)`.
//!
//! Built-in coefficients use the interaction-kernel form
//! `b(t, x, μ) = self_term(t, x) + ∫ pair_term(t, x, y) μ(dy)`, which makes the
//! Lipschitz assumption checkable and the mean-field limit classical.
//! Arbitrary measure functionals can still be plugged in through
//! [`Functional::Custom`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

mod measure;
pub mod presets;
mod probe;

pub use measure::EmpiricalMeasure;
pub use presets::{preset, PresetParams, PRESET_NAMES};
pub use probe::{growth_probe, lipschitz_probe, GrowthReport, LipschitzReport, ProbeConfig, ScaleStats};

type SelfTerm = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type PairTerm = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
type MeasureFn = dyn Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;
type Envelope = dyn Fn(f64) -> f64 + Send + Sync;

/// `self_term(t, x) + Σ_j w_j · pair_term(t, x, y_j)`. Either term may be absent.
#[derive(Clone, Default)]
pub struct InteractionKernel {
    self_term: Option<Arc<SelfTerm>>,
    pair_term: Option<Arc<PairTerm>>,
}

impl InteractionKernel {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_self_term(mut self, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.self_term = Some(Arc::new(f));
        self
    }

    pub fn with_pair_term(
        mut self,
        f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.pair_term = Some(Arc::new(f));
        self
    }

    pub fn has_pair_term(&self) -> bool {
        self.pair_term.is_some()
    }

    /// Writes the kernel value into `out` (overwriting it).
    pub fn eval(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some(f) = &self.self_term {
            f(t, x, out);
        }
        if let Some(g) = &self.pair_term {
            let mut scratch = vec![0.0; out.len()];
            for (y, w) in mu.atoms() {
                scratch.iter_mut().for_each(|v| *v = 0.0);
                g(t, x, y, &mut scratch);
                for (o, s) in out.iter_mut().zip(&scratch) {
                    *o += w * s;
                }
            }
        }
    }
}

impl fmt::Debug for InteractionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InteractionKernel")
            .field("self_term", &self.self_term.is_some())
            .field("pair_term", &self.pair_term.is_some())
            .finish()
    }
}

/// One coefficient (drift or diffusion) as a function of `(t, x, μ)`.
#[derive(Clone)]
pub enum Functional {
    Kernel(InteractionKernel),
    Custom(Arc<MeasureFn>),
}

impl Functional {
    pub fn custom(f: impl Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static) -> Self {
        Functional::Custom(Arc::new(f))
    }

    fn eval(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        match self {
            Functional::Kernel(k) => k.eval(t, x, mu, out),
            Functional::Custom(f) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                f(t, x, mu, out)
            }
        }
    }

    fn is_measure_free(&self) -> bool {
        matches!(self, Functional::Kernel(k) if !k.has_pair_term())
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Kernel(k) => k.fmt(f),
            Functional::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Drift and diffusion of a reflected McKean-Vlasov equation, with the
/// declared Lipschitz envelope `L(t)` and growth constant `C`.
#[derive(Clone)]
pub struct CoefficientSet {
    name: String,
    dim: usize,
    noise_dim: usize,
    drift: Functional,
    diffusion: Functional,
    lipschitz: Arc<Envelope>,
    growth_constant: f64,
}

impl CoefficientSet {
    /// The diffusion functional must write a row-major `dim × noise_dim` matrix.
    pub fn new(dim: usize, noise_dim: usize, drift: Functional, diffusion: Functional) -> Self {
        assert!(dim > 0 && noise_dim > 0, "dimensions must be positive");
        CoefficientSet {
            name: "custom".into(),
            dim,
            noise_dim,
            drift,
            diffusion,
            lipschitz: Arc::new(|_| f64::INFINITY),
            growth_constant: f64::INFINITY,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_lipschitz(mut self, envelope: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.lipschitz = Arc::new(envelope);
        self
    }

    pub fn with_growth_constant(mut self, c: f64) -> Self {
        self.growth_constant = c;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn lipschitz(&self, t: f64) -> f64 {
        (self.lipschitz)(t)
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    /// True when neither coefficient reads the measure argument.
    pub fn is_measure_free(&self) -> bool {
        self.drift.is_measure_free() && self.diffusion.is_measure_free()
    }

    pub(crate) fn drift_into(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        self.drift.eval(t, x, mu, out)
    }

    pub(crate) fn diffusion_into(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        self.diffusion.eval(t, x, mu, out)
    }

    fn check_args(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Result<()> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time {t} must be finite and >= 0")));
        }
        if x.len() != self.dim {
            return Err(Error::Shape {
                what: "point",
                expected: self.dim,
                got: x.len(),
            });
        }
        if mu.dim() != self.dim {
            return Err(Error::Shape {
                what: "measure dimension",
                expected: self.dim,
                got: mu.dim(),
            });
        }
        Ok(())
    }

    /// `b(t, x, μ)`.
    pub fn eval_drift(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        self.check_args(t, x, mu)?;
        let mut out = vec![0.0; self.dim];
        self.drift_into(t, x, mu, &mut out);
        Ok(out)
    }

    /// `σ(t, x, μ)` as a row-major `d × m` matrix.
    pub fn eval_diffusion(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
        self.check_args(t, x, mu)?;
        let mut out = vec![0.0; self.dim * self.noise_dim];
        self.diffusion_into(t, x, mu, &mut out);
        Ok(out)
    }
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("drift", &self.drift)
            .field("diffusion", &self.diffusion)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mean_reversion() -> CoefficientSet {
        preset("mean_reversion", &PresetParams::default(), 1, 2.0).unwrap()
    }

    #[test]
    fn drift_examples() {
        let cs = mean_reversion();
        let b = cs.eval_drift(0.0, &[1.0], &EmpiricalMeasure::dirac(&[0.0])).unwrap();
        assert_eq!(b, vec![-1.0]);
        let mu = EmpiricalMeasure::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(cs.eval_drift(0.3, &[0.5], &mu).unwrap(), vec![0.0]);
        let zero = preset("zero", &PresetParams::default(), 2, 1.0).unwrap();
        let mu2 = EmpiricalMeasure::from_points(&[vec![3.0, 1.0]]).unwrap();
        assert_eq!(zero.eval_drift(0.1, &[7.0, -2.0], &mu2).unwrap(), vec![0.0, 0.0]);
        assert_eq!(zero.eval_diffusion(0.1, &[7.0, -2.0], &mu2).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn diffusion_examples() {
        let cs = mean_reversion();
        assert_eq!(cs.eval_diffusion(0.9, &[0.3], &EmpiricalMeasure::dirac(&[5.0])).unwrap(), vec![1.0]);
        let sv = preset("std_vol", &PresetParams::default(), 1, 2.0).unwrap();
        let mu = EmpiricalMeasure::from_points(&[vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(sv.eval_diffusion(0.0, &[0.0], &mu).unwrap(), vec![1.0]);
    }

    #[test]
    fn shape_errors() {
        let cs = mean_reversion();
        let mu = EmpiricalMeasure::dirac(&[0.0]);
        assert!(matches!(cs.eval_drift(0.0, &[1.0, 2.0], &mu), Err(Error::Shape { .. })));
        let mu2 = EmpiricalMeasure::dirac(&[0.0, 0.0]);
        assert!(matches!(cs.eval_diffusion(0.0, &[1.0], &mu2), Err(Error::Shape { .. })));
    }

    #[test]
    fn two_atom_pair_sum_by_hand() {
        // pair_term(x, y) = x * y^2, self_term = 1
        let k = InteractionKernel::zero()
            .with_self_term(|_, _, o| o[0] = 1.0)
            .with_pair_term(|_, x, y, o| o[0] = x[0] * y[0] * y[0]);
        let mu = EmpiricalMeasure::weighted(1, vec![2.0, -1.0], vec![0.25, 0.75]).unwrap();
        let mut out = [0.0];
        k.eval(0.0, &[3.0], &mu, &mut out);
        assert_eq!(out[0], 1.0 + 0.25 * 12.0 + 0.75 * 3.0);
    }

    proptest! {
        #[test]
        fn kernel_pair_term_is_linear_in_mixtures(
            a in prop::collection::vec(-2.0..2.0f64, 1..6),
            b in prop::collection::vec(-2.0..2.0f64, 1..6),
            lambda in 0.0..=1.0f64, x in -2.0..2.0f64,
        ) {
            let cs = mean_reversion();
            let mu = EmpiricalMeasure::uniform(1, a).unwrap();
            let nu = EmpiricalMeasure::uniform(1, b).unwrap();
            let mix = mu.mixture(&nu, lambda).unwrap();
            let lhs = cs.eval_drift(0.0, &[x], &mix).unwrap()[0];
            let rhs = lambda * cs.eval_drift(0.0, &[x], &mu).unwrap()[0]
                + (1.0 - lambda) * cs.eval_drift(0.0, &[x], &nu).unwrap()[0];
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
