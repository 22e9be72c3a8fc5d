use serde::Serialize;

use super::{solve_limit_ode, solve_skeleton, Control};
use crate::ensemble::{simulate_interacting, InitialLaw, MeasureFlow, Model, ParticleEnsemble, Run, Coupling};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::NoiseDriver;
use crate::reflection::ReflectedPath;
use crate::vecops::dist_sq;

/// A small-noise McKean-Vlasov run together with its empirical law.
#[derive(Clone, Debug)]
pub struct SmallNoiseRun {
    pub epsilon: f64,
    /// `√ε`.
    pub noise_scale: f64,
    pub ensemble: ParticleEnsemble,
    pub flow: MeasureFlow,
}

/// `X^ε`: the interacting system of `n_copies` particles with noise scaled by
/// `√ε`. Particle `i` uses stream `i`.
pub fn simulate_small_noise(
    model: &Model,
    init: &InitialLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    epsilon: f64,
    n_copies: usize,
) -> Result<SmallNoiseRun> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must lie in (0, 1]")));
    }
    let noise_scale = epsilon.sqrt();
    let ensemble = simulate_interacting(model, n_copies, init, grid, driver, noise_scale)?;
    let flow = ensemble.flow();
    Ok(SmallNoiseRun {
        epsilon,
        noise_scale,
        ensemble,
        flow,
    })
}

/// `Z^ε`: copies driven by `√ε dW` plus the deterministic control `h`, with
/// the measure argument frozen at `mv_flow`, which should be the flow of
/// [`simulate_small_noise`] at the same `ε`. `ε = 0` is allowed. Copy `i`
/// uses stream `i`.
pub fn simulate_controlled(
    model: &Model,
    init: &InitialLaw,
    driver: &NoiseDriver,
    epsilon: f64,
    h: &Control,
    mv_flow: &MeasureFlow,
    n_copies: usize,
) -> Result<ParticleEnsemble> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must lie in [0, 1]")));
    }
    if n_copies == 0 {
        return Err(Error::InvalidArgument("copy count must be at least 1".into()));
    }
    let grid = mv_flow.grid();
    if !h.grid().same_as(grid) {
        return Err(Error::InvalidArgument("control and flow live on different grids".into()));
    }
    if h.noise_dim() != model.noise_dim() {
        return Err(Error::Shape {
            what: "control dimension",
            expected: model.noise_dim(),
            got: h.noise_dim(),
        });
    }
    let starts = init.sample_n(n_copies, model.domain.as_ref())?;
    let streams: Vec<u64> = (0..n_copies as u64).collect();
    Run {
        model,
        grid,
        starts: &starts,
        streams: &streams,
        driver,
        scale: epsilon.sqrt(),
        coupling: Coupling::Frozen(mv_flow),
        control: Some(h.values()),
    }
    .execute()
}

/// `h + A sin(2πn t)` in every component, for each frequency `n`, using exact
/// cell averages of the sine.
pub fn oscillatory_sequence(h: &Control, amplitude: f64, freqs: &[u32]) -> Result<Vec<Control>> {
    freqs
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::InvalidArgument("frequencies must be positive".into()));
            }
            let w = 2.0 * std::f64::consts::PI * n as f64;
            let osc = Control::from_antiderivative(h.grid().clone(), h.noise_dim(), |t| -amplitude * (w * t).cos() / w)?;
            h.plus(&osc)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ldp1Report {
    /// `‖Y^{h_n} − Y^h‖_sup` for each control of the sequence.
    pub distances: Vec<f64>,
    pub energies: Vec<f64>,
    pub limit_energy: f64,
    pub tol: f64,
    /// Distances nonincreasing along the sequence.
    pub monotone: bool,
    /// Last distance at most `tol`.
    pub below_tol: bool,
}

impl Ldp1Report {
    pub fn converged(&self) -> bool {
        self.monotone && self.below_tol
    }
}

/// Continuity of the skeleton map along a sequence of controls.
pub fn check_ldp1(
    model: &Model,
    x0: &[f64],
    psi: &ReflectedPath,
    h_sequence: &[Control],
    h_limit: &Control,
    tol: f64,
) -> Result<Ldp1Report> {
    if h_sequence.is_empty() {
        return Err(Error::InvalidArgument("empty control sequence".into()));
    }
    let y = solve_skeleton(model, x0, psi, h_limit)?;
    let distances = h_sequence
        .iter()
        .map(|h| Ok(solve_skeleton(model, x0, psi, h)?.sup_distance(&y)))
        .collect::<Result<Vec<f64>>>()?;
    let monotone = distances.windows(2).all(|w| w[1] <= w[0]);
    let below_tol = distances[distances.len() - 1] <= tol;
    Ok(Ldp1Report {
        energies: h_sequence.iter().map(Control::energy).collect(),
        limit_energy: h_limit.energy(),
        distances,
        tol,
        monotone,
        below_tol,
    })
}

fn check_eps_list(eps: &[f64]) -> Result<()> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("epsilon list must be nonempty, in (0, 1] and descending".into()));
    }
    Ok(())
}

/// `b ≤ a` up to two combined standard errors.
fn nonincreasing_within_2se(values: &[(f64, f64)]) -> bool {
    values.windows(2).all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ldp2Row {
    pub epsilon: f64,
    pub n: usize,
    pub hits: usize,
    pub p_hat: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ldp2Report {
    pub theta: f64,
    pub rows: Vec<Ldp2Row>,
    pub nonincreasing: bool,
}

/// Empirical `P(sup_t ‖Z^ε − Y^h‖ > θ)` along a descending `ε` list.
///
/// For each `ε` the flow of `X^ε` is simulated first (driver purpose
/// `"small-noise"`), then `Z^ε` is run on that frozen flow (purpose
/// `"controlled"`); both use the same streams at every `ε`. `Y^h` is the
/// skeleton on `δ_ψ` started at the centre of `init`.
#[allow(clippy::too_many_arguments)]
pub fn check_ldp2(
    model: &Model,
    init: &InitialLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    epsilon_list: &[f64],
    h: &Control,
    theta: f64,
    n_copies: usize,
) -> Result<Ldp2Report> {
    check_eps_list(epsilon_list)?;
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument("theta must be positive".into()));
    }
    let psi = solve_limit_ode(model, &init.center, grid)?;
    let y = solve_skeleton(model, &init.center, &psi, h)?;
    let flow_driver = driver.derive("small-noise");
    let z_driver = driver.derive("controlled");
    let mut rows = Vec::with_capacity(epsilon_list.len());
    for &eps in epsilon_list {
        let run = simulate_small_noise(model, init, grid, &flow_driver, eps, n_copies)?;
        let z = simulate_controlled(model, init, &z_driver, eps, h, &run.flow, n_copies)?;
        let hits = z.paths().iter().filter(|p| p.sup_distance(&y) > theta).count();
        let p_hat = hits as f64 / n_copies as f64;
        rows.push(Ldp2Row {
            epsilon: eps,
            n: n_copies,
            hits,
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / n_copies as f64).sqrt(),
        });
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.p_hat, r.stderr)).collect();
    Ok(Ldp2Report {
        theta,
        nonincreasing: nonincreasing_within_2se(&pairs),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitLawRow {
    pub epsilon: f64,
    /// `sup_t W₂(μ^ε_t, δ_{ψ_t})`.
    pub sup_w2: f64,
    /// Delta-method standard error at the maximizing node, treating the
    /// particles as independent.
    pub stderr: f64,
    pub argmax_node: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitLawReport {
    pub rows: Vec<LimitLawRow>,
    pub nonincreasing: bool,
}

/// Distance from the empirical law of `X^ε` to the Dirac flow of the limit.
/// `W₂(μ, δ_p)² = ∫‖x − p‖² dμ`, so no transport solve is needed.
pub fn check_limit_law(
    model: &Model,
    init: &InitialLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    epsilon_list: &[f64],
    n_copies: usize,
) -> Result<LimitLawReport> {
    check_eps_list(epsilon_list)?;
    let psi = solve_limit_ode(model, &init.center, grid)?;
    let flow_driver = driver.derive("small-noise");
    let mut rows = Vec::with_capacity(epsilon_list.len());
    for &eps in epsilon_list {
        let run = simulate_small_noise(model, init, grid, &flow_driver, eps, n_copies)?;
        let mut best = (0usize, -1.0f64, Vec::new());
        for k in 0..grid.n_nodes() {
            let q: Vec<f64> = run.ensemble.paths().iter().map(|p| dist_sq(p.position(k), psi.position(k))).collect();
            let m2 = q.iter().sum::<f64>() / q.len() as f64;
            if m2 > best.1 {
                best = (k, m2, q);
            }
        }
        let (k, m2, q) = best;
        let n = q.len() as f64;
        let sup_w2 = m2.sqrt();
        let stderr = if n > 1.0 && sup_w2 > 0.0 {
            let var = q.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt() / (2.0 * sup_w2)
        } else {
            0.0
        };
        rows.push(LimitLawRow {
            epsilon: eps,
            sup_w2,
            stderr,
            argmax_node: k,
        });
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.sup_w2, r.stderr)).collect();
    Ok(LimitLawReport {
        nonincreasing: nonincreasing_within_2se(&pairs),
        rows,
    })
}
