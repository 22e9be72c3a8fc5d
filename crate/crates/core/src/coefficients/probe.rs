//! Sampled probes of the Lipschitz assumption and the linear growth bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CoefficientSet, EmpiricalMeasure};
use crate::geometry::search::{sample_ball, sample_inside};
use crate::geometry::TimeDomain;
use crate::transport::wasserstein2;
use crate::vecops::{dist, norm};

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub n_pairs: usize,
    pub seed: u64,
    /// Sample box radii as multiples of the bounding radius. Scale 1 samples
    /// inside the sections; larger scales sample the surrounding ball.
    pub scales: Vec<f64>,
    pub max_atoms: usize,
    pub rel_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            n_pairs: 500,
            seed: 0,
            scales: vec![1.0, 2.0, 4.0, 8.0],
            max_atoms: 16,
            rel_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleStats {
    pub scale: f64,
    pub max_quotient: f64,
    /// Largest quotient divided by `L(t)` at the same time.
    pub max_envelope_ratio: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub per_scale: Vec<ScaleStats>,
    pub violations: usize,
    /// The largest quotient at least doubled between the first and last scale.
    pub unbounded_growth: bool,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && !self.unbounded_growth
    }
}

fn sample_point(domain: &(impl TimeDomain + ?Sized), t: f64, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if scale <= 1.0 {
        if let Some(p) = sample_inside(domain, t, rng) {
            return p;
        }
    }
    let zero = vec![0.0; domain.dim()];
    sample_ball(&zero, scale * domain.bounding_radius(), rng)
}

/// Coefficient difference `‖Δb‖ + ‖Δσ‖_HS` between two argument pairs.
fn coefficient_gap(
    cs: &CoefficientSet,
    t: f64,
    (x, mu): (&[f64], &EmpiricalMeasure),
    (y, nu): (&[f64], &EmpiricalMeasure),
) -> f64 {
    let d = cs.dim();
    let m = cs.noise_dim();
    let (mut b1, mut b2) = (vec![0.0; d], vec![0.0; d]);
    let (mut s1, mut s2) = (vec![0.0; d * m], vec![0.0; d * m]);
    cs.drift_into(t, x, mu, &mut b1);
    cs.drift_into(t, y, nu, &mut b2);
    cs.diffusion_into(t, x, mu, &mut s1);
    cs.diffusion_into(t, y, nu, &mut s2);
    dist(&b1, &b2) + dist(&s1, &s2)
}

/// Samples argument pairs `(x, μ)`, `(y, ν)` and reports the largest
/// `(‖Δb‖ + ‖Δσ‖) / (‖x − y‖ + W₂(μ, ν))` per sample scale against `L(t)`.
///
/// Half the pairs are independent draws, half are small perturbations, so
/// both global and local quotients are exercised.
pub fn lipschitz_probe(
    cs: &CoefficientSet,
    domain: &(impl TimeDomain + ?Sized),
    cfg: &ProbeConfig,
) -> LipschitzReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cs.dim();
    let mut per_scale = Vec::with_capacity(cfg.scales.len());
    for &scale in &cfg.scales {
        let mut stats = ScaleStats {
            scale,
            max_quotient: 0.0,
            max_envelope_ratio: 0.0,
            violations: 0,
        };
        for pair in 0..cfg.n_pairs {
            let t = rng.random_range(0.0..=domain.horizon());
            let k = rng.random_range(1..=cfg.max_atoms.max(1));
            let x = sample_point(domain, t, scale, &mut rng);
            let atoms: Vec<f64> = (0..k).flat_map(|_| sample_point(domain, t, scale, &mut rng)).collect();
            let mu = EmpiricalMeasure::uniform(d, atoms).expect("nonempty");
            let (y, nu) = if pair % 2 == 0 {
                let k2 = rng.random_range(1..=cfg.max_atoms.max(1));
                let y = sample_point(domain, t, scale, &mut rng);
                let atoms: Vec<f64> = (0..k2).flat_map(|_| sample_point(domain, t, scale, &mut rng)).collect();
                (y, EmpiricalMeasure::uniform(d, atoms).expect("nonempty"))
            } else {
                let h = 1e-3 * domain.bounding_radius() * scale;
                let y = sample_ball(&x, h, &mut rng);
                let moved: Vec<f64> = (0..k).flat_map(|i| sample_ball(mu.atom(i), h, &mut rng)).collect();
                (y, EmpiricalMeasure::uniform(d, moved).expect("nonempty"))
            };
            let w = match wasserstein2(&mu, &nu) {
                Ok(r) => r.distance,
                Err(_) => continue,
            };
            let denom = dist(&x, &y) + w;
            if denom < 1e-12 {
                continue;
            }
            let q = coefficient_gap(cs, t, (&x, &mu), (&y, &nu)) / denom;
            let l = cs.lipschitz(t);
            let ratio = if l > 0.0 {
                q / l
            } else if q > cfg.rel_tol {
                f64::INFINITY
            } else {
                0.0
            };
            stats.max_quotient = stats.max_quotient.max(q);
            stats.max_envelope_ratio = stats.max_envelope_ratio.max(ratio);
            if q > l * (1.0 + cfg.rel_tol) + cfg.rel_tol {
                stats.violations += 1;
            }
        }
        per_scale.push(stats);
    }
    let violations = per_scale.iter().map(|s| s.violations).sum();
    let unbounded_growth = match (per_scale.first(), per_scale.last()) {
        (Some(a), Some(b)) if per_scale.len() > 1 => b.max_quotient > 2.0 * a.max_quotient.max(1e-12),
        _ => false,
    };
    LipschitzReport {
        per_scale,
        violations,
        unbounded_growth,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub n_samples: usize,
    pub growth_constant: f64,
    /// Largest `(‖b‖ + ‖σ‖) / (1 + L(t))` over in-domain samples.
    pub max_ratio: f64,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.max_ratio <= self.growth_constant * (1.0 + 1e-9) + 1e-12
    }
}

/// Checks `‖b(t,x,μ)‖ + ‖σ(t,x,μ)‖ ≤ C(1 + L(t))` for `x ∈ D̄_t` and `μ`
/// supported in `D̄_t`.
pub fn growth_probe(
    cs: &CoefficientSet,
    domain: &(impl TimeDomain + ?Sized),
    n_samples: usize,
    seed: u64,
) -> GrowthReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cs.dim();
    let m = cs.noise_dim();
    let mut max_ratio: f64 = 0.0;
    let mut b = vec![0.0; d];
    let mut s = vec![0.0; d * m];
    for _ in 0..n_samples {
        let t = rng.random_range(0.0..=domain.horizon());
        let x = sample_point(domain, t, 1.0, &mut rng);
        let k = rng.random_range(1..=16);
        let atoms: Vec<f64> = (0..k).flat_map(|_| sample_point(domain, t, 1.0, &mut rng)).collect();
        let mu = EmpiricalMeasure::uniform(d, atoms).expect("nonempty");
        cs.drift_into(t, &x, &mu, &mut b);
        cs.diffusion_into(t, &x, &mu, &mut s);
        max_ratio = max_ratio.max((norm(&b) + norm(&s)) / (1.0 + cs.lipschitz(t)));
    }
    GrowthReport {
        n_samples,
        growth_constant: cs.growth_constant(),
        max_ratio,
    }
}
