use std::sync::Arc;

use crate::error::{Error, Result};

/// Time nodes `0 = t_0 < t_1 < ... < t_N = T`. Cheap to clone.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Arc<[f64]>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid horizon must be positive, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        let times: Vec<f64> = (0..=n_steps)
            .map(|k| horizon * k as f64 / n_steps as f64)
            .collect();
        Ok(TimeGrid { times: times.into() })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "grid must start at 0 and have at least two nodes".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidArgument(
                "grid nodes must be finite and strictly increasing".into(),
            ));
        }
        Ok(TimeGrid { times: times.into() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// Length of step `k`, i.e. `t_{k+1} - t_k`.
    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Grid with every step split in two.
    pub fn refined(&self) -> TimeGrid {
        let mut times = Vec::with_capacity(2 * self.times.len() - 1);
        for w in self.times.windows(2) {
            times.push(w[0]);
            times.push(0.5 * (w[0] + w[1]));
        }
        times.push(self.horizon());
        TimeGrid { times: times.into() }
    }

    /// Index of the last node not exceeding `t` (clamped to the grid).
    pub fn last_node_at_or_before(&self, t: f64) -> usize {
        match self.times.iter().rposition(|&s| s <= t) {
            Some(k) => k,
            None => 0,
        }
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        Arc::ptr_eq(&self.times, &other.times) || self.times == other.times
    }
}
