//! Sampled falsifiers for the standing geometric assumptions: the exterior
//! cone condition and time regularity of `d(·, x)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::search::{sample_ball, sample_boundary_anchor};
use super::{DirectionField, TimeDomain};
use crate::vecops::norm;

const XI_STEPS: usize = 16;

#[derive(Clone, Debug, Serialize)]
pub struct ConeViolation {
    pub time: f64,
    pub anchor: Vec<f64>,
    pub xi: f64,
    pub point: Vec<f64>,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeReport {
    pub n_samples: usize,
    pub n_points_checked: usize,
    pub rho: f64,
    /// Anchors at which `‖γ‖` differs from 1 by more than 1e-9.
    pub gamma_norm_defects: usize,
    /// Anchors that could not be located.
    pub search_failures: usize,
    pub violations: Vec<ConeViolation>,
}

impl ConeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.gamma_norm_defects == 0 && self.search_failures == 0
    }
}

/// Unit offsets used to sample a ball around each cone centre.
fn ball_offsets(dim: usize) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut v = Vec::new();
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; dim];
                    e[i] = s;
                    v.push(e);
                }
            }
            for mask in 0..(1u32 << dim.min(3)) {
                let mut e = vec![0.0; dim];
                for (i, c) in e.iter_mut().take(3).enumerate() {
                    *c = if mask & (1 << i) != 0 { 1.0 } else { -1.0 } / 3f64.sqrt();
                }
                v.push(e);
            }
            v
        }
    };
    let mut out = vec![vec![0.0; dim]];
    for frac in [0.5, 1.0] {
        out.extend(dirs.iter().map(|d| d.iter().map(|c| c * frac).collect()));
    }
    out
}

/// Checks `⋃_{0<ξ≤ρ} B(x − ξγ(t,x), ξρ) ⊂ D_t^c` at `n_samples` random
/// boundary anchors, on a deterministic ξ-grid and ball-sample grid.
pub fn validate_cone_condition(
    domain: &(impl TimeDomain + ?Sized),
    field: &(impl DirectionField + ?Sized),
    n_samples: usize,
    seed: u64,
) -> ConeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = domain.dim();
    let rho = field.rho();
    let offsets = ball_offsets(d);
    let mut report = ConeReport {
        n_samples,
        n_points_checked: 0,
        rho,
        gamma_norm_defects: 0,
        search_failures: 0,
        violations: Vec::new(),
    };
    let mut gamma = vec![0.0; d];
    let mut point = vec![0.0; d];
    for _ in 0..n_samples {
        let t = rng.random_range(0.0..=domain.horizon());
        let anchor = match sample_boundary_anchor(domain, t, &mut rng) {
            Ok(a) => a,
            Err(_) => {
                report.search_failures += 1;
                continue;
            }
        };
        field.gamma(t, &anchor.point, &mut gamma);
        if (norm(&gamma) - 1.0).abs() > 1e-9 {
            report.gamma_norm_defects += 1;
        }
        for k in 1..=XI_STEPS {
            let xi = rho * k as f64 / XI_STEPS as f64;
            for off in &offsets {
                for i in 0..d {
                    point[i] = anchor.point[i] - xi * gamma[i] + xi * rho * off[i];
                }
                report.n_points_checked += 1;
                let dist = domain.dist(t, &point);
                if !(dist > 0.0) {
                    report.violations.push(ConeViolation {
                        time: t,
                        anchor: anchor.point.clone(),
                        xi,
                        point: point.clone(),
                        distance: dist,
                    });
                }
            }
        }
    }
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub dt_probe: f64,
    pub max_quotient: f64,
    pub worst_time: f64,
    pub worst_point: Vec<f64>,
    pub declared_bound: Option<f64>,
    pub exceeds_bound: bool,
}

/// Largest `|d(t+dt, x) − d(t, x)| / dt` over a time scan at the given points.
pub fn time_quotient_at(
    domain: &(impl TimeDomain + ?Sized),
    points: &[Vec<f64>],
    dt_probe: f64,
) -> RegularityReport {
    let horizon = domain.horizon();
    let n_t = ((horizon / dt_probe).floor() as usize).max(1);
    let mut best = (0.0, 0.0, points.first().cloned().unwrap_or_default());
    for x in points {
        for k in 0..n_t {
            let t = (k as f64 * dt_probe).min(horizon - dt_probe).max(0.0);
            let t2 = (t + dt_probe).min(horizon);
            let q = (domain.dist(t2, x) - domain.dist(t, x)).abs() / (t2 - t);
            if q > best.0 {
                best = (q, t, x.clone());
            }
        }
    }
    let declared_bound = domain.speed_bound();
    let exceeds_bound = declared_bound.is_some_and(|b| best.0 > b * (1.0 + 1e-9) + 1e-12);
    RegularityReport {
        dt_probe,
        max_quotient: best.0,
        worst_time: best.1,
        worst_point: best.2,
        declared_bound,
        exceeds_bound,
    }
}

/// [`time_quotient_at`] on `x_samples` random points of the ball of radius
/// `1.5 ×` the bounding radius.
pub fn validate_time_regularity(
    domain: &(impl TimeDomain + ?Sized),
    x_samples: usize,
    dt_probe: f64,
    seed: u64,
) -> RegularityReport {
    assert!(dt_probe > 0.0, "dt_probe must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; domain.dim()];
    let r = 1.5 * domain.bounding_radius();
    let points: Vec<Vec<f64>> = (0..x_samples).map(|_| sample_ball(&zero, r, &mut rng)).collect();
    time_quotient_at(domain, &points, dt_probe)
}
