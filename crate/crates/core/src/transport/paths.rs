//! Distances between path ensembles on a shared grid, truncated at a time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::w2_distance;
use crate::coefficients::EmpiricalMeasure;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::geometry::check_time;
use crate::vecops::dist_sq;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PathDistanceMode {
    /// `(mean_i sup_{t ≤ t_cut} ‖x^i_t − y^i_t‖²)^{1/2}`: pairs particle `i`
    /// with particle `i`. An upper bound for the truncated path distance;
    /// needs equal particle counts.
    IdentityCoupling,
    /// `sup_{t_k ≤ t_cut} W₂(μ_{t_k}, ν_{t_k})`: the time-marginal proxy.
    Proxy,
}

fn check_pair(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<()> {
    if !a.grid().same_as(b.grid()) {
        return Err(Error::InvalidArgument("ensembles live on different grids".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Shape {
            what: "ensemble dimension",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

fn identity(a: &ParticleEnsemble, ia: &[usize], b: &ParticleEnsemble, ib: &[usize], k_cut: usize) -> f64 {
    let total: f64 = ia
        .iter()
        .zip(ib)
        .map(|(&i, &j)| {
            (0..=k_cut)
                .map(|k| dist_sq(a.position(i, k), b.position(j, k)))
                .fold(0.0, f64::max)
        })
        .sum();
    (total / ia.len() as f64).sqrt()
}

fn node_measure(e: &ParticleEnsemble, idx: &[usize], k: usize) -> Result<EmpiricalMeasure> {
    let pts: Vec<f64> = idx.iter().flat_map(|&i| e.position(i, k).iter().copied()).collect();
    EmpiricalMeasure::uniform(e.dim(), pts)
}

fn proxy(a: &ParticleEnsemble, ia: &[usize], b: &ParticleEnsemble, ib: &[usize], k_cut: usize) -> Result<f64> {
    let mut best: f64 = 0.0;
    for k in 0..=k_cut {
        best = best.max(w2_distance(&node_measure(a, ia, k)?, &node_measure(b, ib, k)?)?);
    }
    Ok(best)
}

pub fn truncated_path_distance(
    a: &ParticleEnsemble,
    b: &ParticleEnsemble,
    t_cut: f64,
    mode: PathDistanceMode,
) -> Result<f64> {
    check_pair(a, b)?;
    check_time(a.grid().horizon(), t_cut)?;
    let k_cut = a.grid().last_node_at_or_before(t_cut);
    let ia: Vec<usize> = (0..a.n()).collect();
    let ib: Vec<usize> = (0..b.n()).collect();
    match mode {
        PathDistanceMode::IdentityCoupling => {
            if a.n() != b.n() {
                return Err(Error::InvalidArgument(format!(
                    "identity coupling needs equal particle counts, got {} and {}",
                    a.n(),
                    b.n()
                )));
            }
            Ok(identity(a, &ia, b, &ib, k_cut))
        }
        PathDistanceMode::Proxy => proxy(a, &ia, b, &ib, k_cut),
    }
}

/// Per-pair comparison of the time-marginal proxy with the identity-coupling
/// path distance over the whole grid.
#[derive(Clone, Debug, Serialize)]
pub struct PushforwardReport {
    pub n_pairs: usize,
    pub proxy: Vec<f64>,
    pub identity: Vec<f64>,
    /// `identity − proxy`; nonnegative when the inequality holds.
    pub margins: Vec<f64>,
    pub violations: usize,
}

impl PushforwardReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, p: f64, i: f64) {
        self.n_pairs += 1;
        self.proxy.push(p);
        self.identity.push(i);
        self.margins.push(i - p);
        if p > i * (1.0 + 1e-12) + 1e-12 {
            self.violations += 1;
        }
    }

    fn empty() -> Self {
        PushforwardReport {
            n_pairs: 0,
            proxy: Vec::new(),
            identity: Vec::new(),
            margins: Vec::new(),
            violations: 0,
        }
    }
}

/// Splits `ens` into random disjoint halves `n_pairs` times and checks that
/// the node-wise W₂ supremum never exceeds the identity-coupling distance of
/// the two halves.
pub fn pushforward_check(ens: &ParticleEnsemble, n_pairs: usize, seed: u64) -> Result<PushforwardReport> {
    if ens.n() < 2 {
        return Err(Error::InvalidArgument("pushforward check needs at least two particles".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = ens.n() / 2;
    let k_cut = ens.grid().n_steps();
    let mut idx: Vec<usize> = (0..ens.n()).collect();
    let mut report = PushforwardReport::empty();
    for _ in 0..n_pairs {
        idx.shuffle(&mut rng);
        let (ia, ib) = (&idx[..half], &idx[half..2 * half]);
        let p = proxy(ens, ia, ens, ib, k_cut)?;
        let i = identity(ens, ia, ens, ib, k_cut);
        report.push(p, i);
    }
    Ok(report)
}

/// The same comparison for one given pair of equally sized ensembles.
pub fn pushforward_pair(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<PushforwardReport> {
    let t = a.grid().horizon();
    let i = truncated_path_distance(a, b, t, PathDistanceMode::IdentityCoupling)?;
    let p = truncated_path_distance(a, b, t, PathDistanceMode::Proxy)?;
    let mut report = PushforwardReport::empty();
    report.push(p, i);
    Ok(report)
}
