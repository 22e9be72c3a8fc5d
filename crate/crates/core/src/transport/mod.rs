//! Wasserstein-2 distances between empirical measures, and distances between
//! path ensembles.
//!
//! Small problems are solved exactly: the quantile coupling in one dimension,
//! a primal-dual assignment for uniform measures of equal size, and successive
//! shortest paths otherwise. Above [`EXACT_CAP`] total atoms in two or more
//! dimensions the sliced estimator is used, and the result says so.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::EmpiricalMeasure;
use crate::error::{Error, Result};

mod paths;
mod solvers;

pub use paths::{
    pushforward_check, pushforward_pair, truncated_path_distance, PathDistanceMode, PushforwardReport,
};

/// Largest combined atom count solved exactly in dimension ≥ 2.
pub const EXACT_CAP: usize = 1024;
pub const SLICED_PROJECTIONS: usize = 256;
const SLICED_SEED: u64 = 0x5eed_51ce;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    /// Quantile coupling on the line.
    Exact1d,
    /// Uniform measures of equal size, solved as an assignment problem.
    Assignment,
    /// General weights, solved as a transport problem.
    Transport,
    /// Averaged 1-D costs over random projections. A lower estimate; no plan.
    Sliced,
}

/// A coupling of two discrete measures, stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingPlan {
    pub rows: usize,
    pub cols: usize,
    /// `(i, j, mass)` triples, sorted by `(i, j)`.
    pub entries: Vec<(usize, usize, f64)>,
    /// `Σ π_ij ‖x_i − y_j‖²`.
    pub cost: f64,
}

impl CouplingPlan {
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for &(i, j, w) in &self.entries {
            out[i][j] += w;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for &(i, _, w) in &self.entries {
            s[i] += w;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, j, w) in &self.entries {
            s[j] += w;
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct Wasserstein {
    pub distance: f64,
    pub plan: Option<CouplingPlan>,
    pub method: Method,
}

impl Wasserstein {
    pub fn is_estimate(&self) -> bool {
        self.method == Method::Sliced
    }
}

#[derive(Clone, Debug)]
pub struct W2Options {
    pub exact_cap: usize,
    pub n_projections: usize,
    pub seed: u64,
    /// Skip building the plan when only the distance is needed.
    pub with_plan: bool,
}

impl Default for W2Options {
    fn default() -> Self {
        W2Options {
            exact_cap: EXACT_CAP,
            n_projections: SLICED_PROJECTIONS,
            seed: SLICED_SEED,
            with_plan: true,
        }
    }
}

/// `W₂(μ, ν)` with default options.
pub fn wasserstein2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<Wasserstein> {
    wasserstein2_with(mu, nu, &W2Options::default())
}

/// `W₂(μ, ν)` without building a plan. Cheaper for the uniform 1-D case.
pub fn w2_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    let opts = W2Options {
        with_plan: false,
        ..Default::default()
    };
    Ok(wasserstein2_with(mu, nu, &opts)?.distance)
}

pub fn wasserstein2_with(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, opts: &W2Options) -> Result<Wasserstein> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::InvalidArgument("wasserstein2 needs nonempty measures".into()));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::Shape {
            what: "measure dimension",
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let (n, m) = (mu.len(), nu.len());
    let finish = |cost: f64, entries: Vec<(usize, usize, f64)>, method| {
        let mut entries = entries;
        entries.sort_by(solvers::cmp_entries);
        Wasserstein {
            distance: cost.max(0.0).sqrt(),
            plan: Some(CouplingPlan {
                rows: n,
                cols: m,
                entries,
                cost,
            }),
            method,
        }
    };
    if mu.dim() == 1 {
        if !opts.with_plan && n == m && mu.is_uniform() && nu.is_uniform() {
            let cost = solvers::sorted_pairing_cost(&mut mu.points().to_vec(), &mut nu.points().to_vec());
            return Ok(Wasserstein {
                distance: cost.max(0.0).sqrt(),
                plan: None,
                method: Method::Exact1d,
            });
        }
        let (cost, entries) = solvers::quantile_1d(mu.points(), mu.weights(), nu.points(), nu.weights());
        return Ok(finish(cost, entries, Method::Exact1d));
    }
    if n + m > opts.exact_cap {
        return Ok(Wasserstein {
            distance: sliced(mu, nu, opts.n_projections, opts.seed),
            plan: None,
            method: Method::Sliced,
        });
    }
    if n == m && mu.is_uniform() && nu.is_uniform() {
        let (cost, entries) = solvers::assignment(mu, nu);
        Ok(finish(cost, entries, Method::Assignment))
    } else {
        let (cost, entries) = solvers::min_cost_transport(mu, nu);
        Ok(finish(cost, entries, Method::Transport))
    }
}

/// Sliced W₂ estimate: `(mean over projections of W₂²(P_θ μ, P_θ ν))^{1/2}`.
/// Each projection is drawn from its own seeded stream, so the value does not
/// depend on thread scheduling.
fn sliced(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, n_proj: usize, seed: u64) -> f64 {
    let d = mu.dim();
    let project = |m: &EmpiricalMeasure, theta: &[f64]| -> Vec<f64> {
        m.points()
            .chunks_exact(d)
            .map(|p| p.iter().zip(theta).map(|(a, b)| a * b).sum())
            .collect()
    };
    let costs: Vec<f64> = (0..n_proj)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let theta = crate::geometry::search::random_unit(d, &mut rng);
            let (xs, ys) = (project(mu, &theta), project(nu, &theta));
            solvers::quantile_1d(&xs, mu.weights(), &ys, nu.weights()).0
        })
        .collect();
    (costs.iter().sum::<f64>() / n_proj.max(1) as f64).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn cloud(d: usize, pts: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform(d, pts.to_vec()).unwrap()
    }

    // Factorial oracle: minimum over all permutations.
    fn brute_force(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
        fn rec(k: usize, perm: &mut Vec<usize>, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, best: &mut f64) {
            let n = perm.len();
            if k == n {
                let c: f64 = (0..n).map(|i| crate::vecops::dist_sq(mu.atom(i), nu.atom(perm[i]))).sum();
                *best = best.min(c / n as f64);
                return;
            }
            for i in k..n {
                perm.swap(k, i);
                rec(k + 1, perm, mu, nu, best);
                perm.swap(k, i);
            }
        }
        let mut best = f64::INFINITY;
        rec(0, &mut (0..mu.len()).collect(), mu, nu, &mut best);
        best.sqrt()
    }

    #[test]
    fn examples() {
        let a = cloud(1, &[0.0, 1.0]);
        assert_eq!(wasserstein2(&a, &a).unwrap().distance, 0.0);
        let b = cloud(1, &[0.0, 2.0]);
        assert!((wasserstein2(&a, &b).unwrap().distance - 0.5f64.sqrt()).abs() < 1e-15);
        let p = EmpiricalMeasure::dirac(&[0.0, 0.0]);
        let q = EmpiricalMeasure::dirac(&[3.0, 4.0]);
        assert_eq!(wasserstein2(&p, &q).unwrap().distance, 5.0);
    }

    #[test]
    fn empty_or_mismatched_measures_are_errors() {
        let p = EmpiricalMeasure::dirac(&[0.0, 0.0]);
        let q = EmpiricalMeasure::dirac(&[0.0]);
        assert!(matches!(wasserstein2(&p, &q), Err(Error::Shape { .. })));
    }

    #[test]
    fn matches_brute_force_on_small_uniform_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=3 {
            for _ in 0..20 {
                let n = rng.random_range(1..=6);
                let a: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let b: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let (mu, nu) = (cloud(d, &a), cloud(d, &b));
                let w = wasserstein2(&mu, &nu).unwrap();
                assert!((w.distance - brute_force(&mu, &nu)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn transport_solver_agrees_with_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(1..=7);
            let a: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (mu, nu) = (cloud(2, &a), cloud(2, &b));
            let (c1, _) = solvers::assignment(&mu, &nu);
            let (c2, _) = solvers::min_cost_transport(&mu, &nu);
            assert!((c1 - c2).abs() < 1e-12, "{c1} vs {c2}");
        }
    }

    // Splitting every atom in two equal halves leaves W2 unchanged, and the
    // split measure goes through the weighted solver.
    #[test]
    fn weighted_solver_on_split_atoms() {
        let a = cloud(2, &[0.0, 0.0, 1.0, 0.5, -0.3, 2.0]);
        let b = cloud(2, &[1.0, 1.0, 0.0, -1.0, 0.7, 0.1]);
        let split = EmpiricalMeasure::weighted(
            2,
            [a.points(), a.points()].concat(),
            vec![1.0 / 6.0; 6],
        )
        .unwrap();
        let w = wasserstein2(&split, &b).unwrap();
        assert_eq!(w.method, Method::Transport);
        assert!((w.distance - brute_force(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn sliced_is_flagged_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..2 * 600).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..2 * 600).map(|_| rng.random_range(-1.0..1.0) + 0.5).collect();
        let (mu, nu) = (cloud(2, &a), cloud(2, &b));
        let w1 = wasserstein2(&mu, &nu).unwrap();
        let w2 = wasserstein2(&mu, &nu).unwrap();
        assert!(w1.is_estimate());
        assert!(w1.plan.is_none());
        assert_eq!(w1.distance.to_bits(), w2.distance.to_bits());
        // Sliced W2 of a pure shift by v is |v|/sqrt(d).
        assert!(w1.distance > 0.3 && w1.distance < 0.8);
    }

    fn arb_measure(d: usize) -> impl Strategy<Value = EmpiricalMeasure> {
        (1usize..6).prop_flat_map(move |n| {
            (
                prop::collection::vec(-2.0..2.0f64, n * d),
                prop::collection::vec(0.05..1.0f64, n),
            )
                .prop_map(move |(p, w)| {
                    let s: f64 = w.iter().sum();
                    let mut w: Vec<f64> = w.iter().map(|v| v / s).collect();
                    let rest: f64 = w[1..].iter().sum();
                    w[0] = 1.0 - rest;
                    EmpiricalMeasure::weighted(d, p, w).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn plan_marginals_and_cost(mu in arb_measure(2), nu in arb_measure(2)) {
            let w = wasserstein2(&mu, &nu).unwrap();
            let plan = w.plan.unwrap();
            for (s, t) in plan.row_sums().iter().zip(mu.weights()) {
                prop_assert!((s - t).abs() < 1e-9);
            }
            for (s, t) in plan.col_sums().iter().zip(nu.weights()) {
                prop_assert!((s - t).abs() < 1e-9);
            }
            let c: f64 = plan.entries.iter()
                .map(|&(i, j, m)| m * crate::vecops::dist_sq(mu.atom(i), nu.atom(j))).sum();
            prop_assert!((c - plan.cost).abs() < 1e-12);
            prop_assert!(plan.entries.iter().all(|e| e.2 >= 0.0));
        }

        #[test]
        fn symmetric(mu in arb_measure(2), nu in arb_measure(2)) {
            let a = wasserstein2(&mu, &nu).unwrap().distance;
            let b = wasserstein2(&nu, &mu).unwrap().distance;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn triangle_inequality(a in arb_measure(2), b in arb_measure(2), c in arb_measure(2)) {
            let ab = wasserstein2(&a, &b).unwrap().distance;
            let bc = wasserstein2(&b, &c).unwrap().distance;
            let ac = wasserstein2(&a, &c).unwrap().distance;
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn indiscernibles(mu in arb_measure(3), shift in 1e-3..1.0f64) {
            let mut rows: Vec<Vec<f64>> = mu.points().chunks(3).map(<[f64]>::to_vec).collect();
            rows.reverse();
            let w: Vec<f64> = mu.weights().iter().rev().copied().collect();
            let same = EmpiricalMeasure::weighted(3, rows.concat(), w.clone()).unwrap();
            prop_assert!(wasserstein2(&mu, &same).unwrap().distance < 1e-9);
            rows[0][1] += shift;
            let moved = EmpiricalMeasure::weighted(3, rows.concat(), w).unwrap();
            prop_assert!(wasserstein2(&mu, &moved).unwrap().distance >= 1e-9);
        }

        #[test]
        fn sorted_formula_matches_assignment(a in prop::collection::vec(-3.0..3.0f64, 1..=7),
                                             seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = (0..a.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (mu, nu) = (cloud(1, &a), cloud(1, &b));
            let sorted = w2_distance(&mu, &nu).unwrap();
            let (c, _) = solvers::assignment(&mu, &nu);
            prop_assert!((sorted - c.sqrt()).abs() < 1e-9);
            prop_assert!((sorted - brute_force(&mu, &nu)).abs() < 1e-9);
        }
    }
}
