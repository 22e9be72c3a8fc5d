//! Named coefficient presets selectable from experiment configs.

use serde::{Deserialize, Serialize};

use super::{CoefficientSet, Functional, InteractionKernel};
use crate::error::{Error, Result};

pub const PRESET_NAMES: &[&str] = &["zero", "mean_reversion", "std_vol", "brownian", "ou", "constant_drift"];

/// Optional preset parameters; unset fields take the preset default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    /// Interaction / restoring strength.
    pub theta: Option<f64>,
    /// Noise amplitude.
    pub sigma: Option<f64>,
    /// Constant drift vector for `constant_drift`.
    pub drift: Option<Vec<f64>>,
}

fn isotropic(dim: usize, sigma: f64) -> InteractionKernel {
    InteractionKernel::zero().with_self_term(move |_, _, out| {
        for i in 0..dim {
            out[i * dim + i] = sigma;
        }
    })
}

/// Builds a preset on `R^dim` with noise dimension `dim`. The growth constant
/// is derived from the bounding radius of the domain it will run in.
///
/// * `zero`: `b ≡ 0`, `σ ≡ 0`.
/// * `mean_reversion`: `b = θ(mean(μ) − x)`, `σ = s·I` (θ = 1, s = 1).
/// * `std_vol`: `b = θ(mean(μ) − x)`, `σ = s(1 + std(μ))·I` (θ = 1, s = 0.5).
/// * `brownian`: `b ≡ 0`, `σ = s·I` (s = 1).
/// * `ou`: `b = −θx`, `σ = s·I` (θ = 1, s = 1); no interaction.
/// * `constant_drift`: `b ≡ v`, `σ = s·I` (s = 0).
pub fn preset(name: &str, params: &PresetParams, dim: usize, bounding_radius: f64) -> Result<CoefficientSet> {
    if dim == 0 {
        return Err(Error::InvalidArgument("preset dimension must be positive".into()));
    }
    let r = bounding_radius;
    let sqrt_d = (dim as f64).sqrt();
    let theta = params.theta.unwrap_or(1.0);
    let cs = match name {
        "zero" => CoefficientSet::new(
            dim,
            dim,
            Functional::Kernel(InteractionKernel::zero()),
            Functional::Kernel(InteractionKernel::zero()),
        )
        .with_lipschitz(|_| 0.0)
        .with_growth_constant(0.0),
        "mean_reversion" => {
            let sigma = params.sigma.unwrap_or(1.0);
            let drift = InteractionKernel::zero().with_pair_term(move |_, x, y, out| {
                for i in 0..x.len() {
                    out[i] = theta * (y[i] - x[i]);
                }
            });
            CoefficientSet::new(dim, dim, Functional::Kernel(drift), Functional::Kernel(isotropic(dim, sigma)))
                .with_lipschitz(move |_| theta.abs())
                .with_growth_constant(2.0 * r + sigma.abs() * sqrt_d)
        }
        "std_vol" => {
            let sigma = params.sigma.unwrap_or(0.5);
            let drift = InteractionKernel::zero().with_pair_term(move |_, x, y, out| {
                for i in 0..x.len() {
                    out[i] = theta * (y[i] - x[i]);
                }
            });
            let diffusion = Functional::custom(move |_, _, mu, out| {
                let s = sigma * (1.0 + mu.std());
                for i in 0..dim {
                    out[i * dim + i] = s;
                }
            });
            CoefficientSet::new(dim, dim, Functional::Kernel(drift), diffusion)
                .with_lipschitz(move |_| theta.abs() + sigma.abs() * sqrt_d)
                .with_growth_constant(2.0 * r + sigma.abs() * (1.0 + r) * sqrt_d)
        }
        "brownian" => {
            let sigma = params.sigma.unwrap_or(1.0);
            CoefficientSet::new(
                dim,
                dim,
                Functional::Kernel(InteractionKernel::zero()),
                Functional::Kernel(isotropic(dim, sigma)),
            )
            .with_lipschitz(|_| 0.0)
            .with_growth_constant(sigma.abs() * sqrt_d)
        }
        "ou" => {
            let sigma = params.sigma.unwrap_or(1.0);
            let drift = InteractionKernel::zero().with_self_term(move |_, x, out| {
                for i in 0..x.len() {
                    out[i] = -theta * x[i];
                }
            });
            CoefficientSet::new(dim, dim, Functional::Kernel(drift), Functional::Kernel(isotropic(dim, sigma)))
                .with_lipschitz(move |_| theta.abs())
                .with_growth_constant(r + sigma.abs() * sqrt_d)
        }
        "constant_drift" => {
            let sigma = params.sigma.unwrap_or(0.0);
            let v = params.drift.clone().unwrap_or_else(|| vec![1.0; dim]);
            if v.len() != dim {
                return Err(Error::Shape {
                    what: "constant drift",
                    expected: dim,
                    got: v.len(),
                });
            }
            let speed = crate::vecops::norm(&v);
            let drift = InteractionKernel::zero().with_self_term(move |_, _, out| out.copy_from_slice(&v));
            CoefficientSet::new(dim, dim, Functional::Kernel(drift), Functional::Kernel(isotropic(dim, sigma)))
                .with_lipschitz(|_| 0.0)
                .with_growth_constant(speed + sigma.abs() * sqrt_d)
        }
        other => {
            return Err(Error::UnknownPreset {
                kind: "coefficient",
                name: other.to_string(),
            })
        }
    };
    Ok(cs.named(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::EmpiricalMeasure;

    #[test]
    fn unknown_preset() {
        let e = preset("nope", &PresetParams::default(), 1, 1.0).unwrap_err();
        assert_eq!(e.code(), 10);
    }

    #[test]
    fn interaction_flags() {
        let p = PresetParams::default();
        assert!(preset("ou", &p, 2, 1.0).unwrap().is_measure_free());
        assert!(preset("brownian", &p, 1, 1.0).unwrap().is_measure_free());
        assert!(!preset("mean_reversion", &p, 1, 1.0).unwrap().is_measure_free());
        assert!(!preset("std_vol", &p, 1, 1.0).unwrap().is_measure_free());
    }

    #[test]
    fn isotropic_diffusion_is_diagonal() {
        let cs = preset("brownian", &PresetParams { sigma: Some(0.3), ..Default::default() }, 2, 1.0).unwrap();
        let s = cs.eval_diffusion(0.0, &[0.0, 0.0], &EmpiricalMeasure::dirac(&[0.0, 0.0])).unwrap();
        assert_eq!(s, vec![0.3, 0.0, 0.0, 0.3]);
    }
}
