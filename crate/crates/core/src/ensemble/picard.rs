use super::{self_dirac_path, simulate_frozen_law, InitialLaw, MeasureFlow, Model, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::NoiseDriver;

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub flow: MeasureFlow,
    /// Last frozen-law ensemble, whose flow is `flow`.
    pub ensemble: ParticleEnsemble,
    /// `history[k] = sup_t W₂(μ^k_t, μ^{k+1}_t)`.
    pub history: Vec<f64>,
}

/// Fixed-point iteration `μ^{k+1} = Law(X^{μ^k})` on measure flows.
///
/// `μ^0` is the Dirac flow of the noise-free self-consistent path started at
/// the centre of `init`. Each iterate is the empirical flow of `n_copies`
/// frozen-law copies driven by the same noise streams every time, so the
/// contraction shows up pathwise. Stops once the successive distance drops
/// below `tol`; after `max_iters` without that, returns
/// [`Error::FixedPoint`] with the history.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    model: &Model,
    init: &InitialLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    noise_scale: f64,
    n_copies: usize,
    max_iters: usize,
    tol: f64,
) -> Result<PicardResult> {
    if max_iters == 0 || !(tol > 0.0) {
        return Err(Error::InvalidArgument("picard needs max_iters >= 1 and tol > 0".into()));
    }
    let psi = self_dirac_path(model, &init.center, grid)?;
    let mut flow = MeasureFlow::dirac_flow(&psi);
    let mut history = Vec::with_capacity(max_iters);
    for _ in 0..max_iters {
        let ensemble = simulate_frozen_law(model, init, &flow, driver, noise_scale, n_copies)?;
        let next = ensemble.flow();
        let gap = flow.sup_distance(&next)?;
        history.push(gap);
        flow = next;
        if gap < tol {
            return Ok(PicardResult {
                flow,
                ensemble,
                history,
            });
        }
    }
    Err(Error::FixedPoint { tol, history })
}
