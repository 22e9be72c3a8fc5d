use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::solve_limit_ode;
use crate::ensemble::{simulate_interacting, InitialLaw, Model};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::NoiseDriver;
use crate::reflection::{self, Law, ReflectedPath};
use crate::vecops::dist;

/// Copies simulated per parallel task when the coefficients ignore the law.
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `‖X_T − ψ_T‖ > threshold`.
    TerminalDeviation,
    /// `sup_t ‖X_t − ψ_t‖ > threshold` over grid nodes.
    SupDeviation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RareEvent {
    pub kind: EventKind,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RareEventRow {
    pub epsilon: f64,
    pub n: usize,
    pub hits: usize,
    pub p_hat: f64,
    /// Two-sided 95% Clopper-Pearson interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `−ε ln p̂`, absent when there are no hits.
    pub exponent: Option<f64>,
    /// With no hits: one-sided 95% upper bound on `p`, and the matching
    /// lower bound `−ε ln p_up` on the exponent.
    pub p_upper_one_sided: Option<f64>,
    pub exponent_lower_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RareEventTable {
    pub event: RareEvent,
    pub rows: Vec<RareEventRow>,
}

fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact binomial interval of level `1 − alpha` for `hits` successes in `n`.
pub fn clopper_pearson(hits: usize, n: usize, alpha: f64) -> (f64, f64) {
    assert!(hits <= n && n > 0);
    let (k, n) = (hits as f64, n as f64);
    let low = if hits == 0 { 0.0 } else { beta_quantile(k, n - k + 1.0, alpha / 2.0) };
    let high = if hits as f64 == n { 1.0 } else { beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0) };
    (low, high)
}

fn hits_event(event: &RareEvent, psi: &ReflectedPath, k: usize, x: &[f64]) -> bool {
    match event.kind {
        EventKind::TerminalDeviation if k + 1 != psi.n_nodes() => false,
        _ => dist(x, psi.position(k)) > event.threshold,
    }
}

/// Crude Monte Carlo for `P(event)` under `X^ε`, one row per `ε`, all rows
/// sharing the same noise streams. Deviations are measured from the
/// noise-free limit started at the centre of `init`.
///
/// When the coefficients do not read the law, copies are independent and are
/// streamed without storing paths, so `n_copies` can be large.
pub fn estimate_rare_event(
    model: &Model,
    init: &InitialLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    epsilon_list: &[f64],
    event: RareEvent,
    n_copies: usize,
) -> Result<RareEventTable> {
    if epsilon_list.is_empty() || epsilon_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::InvalidArgument("epsilon values must lie in (0, 1]".into()));
    }
    if n_copies == 0 {
        return Err(Error::InvalidArgument("copy count must be at least 1".into()));
    }
    if !event.threshold.is_finite() || event.threshold < 0.0 {
        return Err(Error::InvalidArgument("event threshold must be finite and >= 0".into()));
    }
    let psi = solve_limit_ode(model, &init.center, grid)?;
    let mut rows = Vec::with_capacity(epsilon_list.len());
    for &eps in epsilon_list {
        let hits = if model.coefficients.is_measure_free() {
            streamed_hits(model, init, grid, driver, eps.sqrt(), &event, &psi, n_copies)?
        } else {
            let e = simulate_interacting(model, n_copies, init, grid, driver, eps.sqrt())?;
            e.paths()
                .iter()
                .filter(|p| (1..p.n_nodes()).any(|k| hits_event(&event, &psi, k, p.position(k))))
                .count()
        };
        rows.push(row(eps, hits, n_copies));
    }
    Ok(RareEventTable { event, rows })
}

fn row(epsilon: f64, hits: usize, n: usize) -> RareEventRow {
    let p_hat = hits as f64 / n as f64;
    let (ci_low, ci_high) = clopper_pearson(hits, n, 0.05);
    let (exponent, p_up, bound) = if hits == 0 {
        let p_up = 1.0 - 0.05f64.powf(1.0 / n as f64);
        (None, Some(p_up), Some(-epsilon * p_up.ln()))
    } else {
        // Adding 0.0 turns −0 into +0 when p̂ = 1.
        (Some(-epsilon * p_hat.ln() + 0.0), None, None)
    };
    RareEventRow {
        epsilon,
        n,
        hits,
        p_hat,
        ci_low,
        ci_high,
        exponent,
        p_upper_one_sided: p_up,
        exponent_lower_bound: bound,
    }
}

#[allow(clippy::too_many_arguments)]
fn streamed_hits(
    model: &Model,
    init: &InitialLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    scale: f64,
    event: &RareEvent,
    psi: &ReflectedPath,
    n: usize,
) -> Result<usize> {
    let dummy = crate::ensemble::MeasureFlow::dirac_flow(psi);
    let counts = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut hits = 0usize;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let x0 = init.sample(i, model.domain.as_ref())?;
                let mut hit = false;
                reflection::integrate(
                    model,
                    &x0,
                    grid,
                    Law::Flow(&dummy),
                    &mut |k, dt, out| driver.increment(i as u64, k, dt, out),
                    scale,
                    None,
                    &mut |k, s, _| hit |= hits_event(event, psi, k, &s.x),
                )?;
                hits += hit as usize;
            }
            Ok(hits)
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(counts.into_iter().sum())
}
