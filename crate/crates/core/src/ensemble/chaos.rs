use rayon::prelude::*;
use serde::Serialize;

use super::{simulate_interacting, InitialLaw, Model};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{derive_seed, NoiseDriver};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosRow {
    pub n: usize,
    /// Mean over repetitions of `sup_t W₂(μ^n_t, μ^ref_t)²`.
    pub mean_sq_dist: f64,
    /// Standard error of that mean.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosTable {
    pub n_ref: usize,
    pub n_rep: usize,
    pub rows: Vec<ChaosRow>,
}

impl ChaosTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_sq_dist < w[0].mean_sq_dist)
    }
}

/// Propagation-of-chaos table. The reference flow is an interacting system of
/// `4 · max(n_list)` particles; each `(n, repetition)` cell draws its own
/// initial sample and noise from sub-seeds of `master_seed`.
pub fn chaos_experiment(
    model: &Model,
    init: &InitialLaw,
    grid: &TimeGrid,
    n_list: &[usize],
    n_rep: usize,
    master_seed: u64,
    noise_scale: f64,
) -> Result<ChaosTable> {
    if n_list.is_empty() || n_list.contains(&0) || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("n_list must be nonempty, positive and ascending".into()));
    }
    if n_rep == 0 {
        return Err(Error::InvalidArgument("n_rep must be at least 1".into()));
    }
    let m = model.noise_dim();
    let n_ref = 4 * n_list[n_list.len() - 1];
    let ref_init = init.with_seed(derive_seed(master_seed, "chaos/reference/init"));
    let ref_driver = NoiseDriver::new(derive_seed(master_seed, "chaos/reference/noise"), m);
    let reference = simulate_interacting(model, n_ref, &ref_init, grid, &ref_driver, noise_scale)?.flow();

    let cells: Vec<(usize, usize)> = n_list.iter().flat_map(|&n| (0..n_rep).map(move |r| (n, r))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(n, r)| {
            let tag = format!("chaos/n{n}/rep{r}");
            let init = init.with_seed(derive_seed(master_seed, &format!("{tag}/init")));
            let driver = NoiseDriver::new(derive_seed(master_seed, &format!("{tag}/noise")), m);
            let e = simulate_interacting(model, n, &init, grid, &driver, noise_scale)?;
            let d = e.flow().sup_distance(&reference)?;
            Ok(d * d)
        })
        .collect::<Result<_>>()?;

    let rows = n_list
        .iter()
        .zip(values.chunks(n_rep))
        .map(|(&n, v)| {
            let mean = v.iter().sum::<f64>() / n_rep as f64;
            let stderr = if n_rep > 1 {
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_rep - 1) as f64;
                (var / n_rep as f64).sqrt()
            } else {
                0.0
            };
            ChaosRow {
                n,
                mean_sq_dist: mean,
                stderr,
            }
        })
        .collect();
    Ok(ChaosTable { n_ref, n_rep, rows })
}
