use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{skeleton_on_flow, Control, RateValue};
use crate::ensemble::{MeasureFlow, Model};
use crate::error::{Error, Result};
use crate::reflection::ReflectedPath;
use crate::vecops::dist;

/// What the skeleton path has to hit.
#[derive(Clone, Debug, PartialEq)]
pub enum RateTarget {
    /// A full grid path, row-major `n_nodes × d`, matched in sup norm.
    Path(Vec<f64>),
    /// `‖Y_T − center‖ ≤ radius`.
    TerminalBall { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub penalty_start: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    /// Largest sup-norm miss that still counts as hitting the target.
    pub feas_tol: f64,
    pub energy_ceiling: f64,
    pub max_inner_iters: usize,
    pub fd_step: f64,
    pub memory: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            penalty_start: 1.0,
            penalty_growth: 10.0,
            penalty_max: 1e8,
            feas_tol: 1e-3,
            energy_ceiling: 1e3,
            max_inner_iters: 300,
            fd_step: 1e-6,
            memory: 8,
        }
    }
}

impl OptConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.penalty_start > 0.0
            && self.penalty_growth > 1.0
            && self.penalty_max >= self.penalty_start
            && self.feas_tol > 0.0
            && self.energy_ceiling > 0.0
            && self.fd_step > 0.0
            && self.memory > 0
            && self.max_inner_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad optimizer config {self:?}")))
        }
    }
}

struct Problem<'a> {
    model: &'a Model,
    x0: &'a [f64],
    flow: MeasureFlow,
    template: Control,
    target: &'a RateTarget,
}

impl Problem<'_> {
    fn solve(&self, h: &[f64]) -> Result<ReflectedPath> {
        let c = Control::new(self.template.grid().clone(), self.template.noise_dim(), h.to_vec())?;
        skeleton_on_flow(self.model, self.x0, &self.flow, &c)
    }

    /// `(residual, penalty)`: the sup-norm miss and its smooth surrogate.
    fn miss(&self, y: &ReflectedPath) -> (f64, f64) {
        match self.target {
            RateTarget::Path(phi) => {
                let d = y.dim();
                let grid = y.grid();
                let mut sup: f64 = 0.0;
                let mut pen = 0.0;
                for k in 1..y.n_nodes() {
                    let e = dist(y.position(k), &phi[k * d..(k + 1) * d]);
                    sup = sup.max(e);
                    pen += grid.dt(k - 1) * e * e;
                }
                (sup, pen)
            }
            RateTarget::TerminalBall { center, radius } => {
                let r = (dist(y.terminal(), center) - radius).max(0.0);
                (r, r * r)
            }
        }
    }

    fn energy(&self, h: &[f64]) -> f64 {
        let m = self.template.noise_dim();
        let grid = self.template.grid();
        h.chunks(m)
            .enumerate()
            .map(|(k, v)| 0.5 * v.iter().map(|a| a * a).sum::<f64>() * grid.dt(k))
            .sum()
    }

    fn objective(&self, h: &[f64], lambda: f64) -> Result<f64> {
        let (_, pen) = self.miss(&self.solve(h)?);
        Ok(self.energy(h) + lambda * pen)
    }

    /// Central differences, one pair of skeleton solves per coordinate.
    fn gradient(&self, h: &[f64], lambda: f64, fd: f64) -> Result<Vec<f64>> {
        (0..h.len())
            .into_par_iter()
            .map(|i| {
                let step = fd * (1.0 + h[i].abs());
                let mut hp = h.to_vec();
                hp[i] += step;
                let fp = self.objective(&hp, lambda)?;
                hp[i] = h[i] - step;
                let fm = self.objective(&hp, lambda)?;
                Ok((fp - fm) / (2.0 * step))
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// L-BFGS with Armijo backtracking; falls back to compass search when the
/// line search stalls (the reflected dynamics are only piecewise smooth).
fn minimize(p: &Problem<'_>, h0: Vec<f64>, lambda: f64, cfg: &OptConfig) -> Result<Vec<f64>> {
    let mut h = h0;
    let mut f = p.objective(&h, lambda)?;
    let mut g = p.gradient(&h, lambda, cfg.fd_step)?;
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(cfg.memory);
    for _ in 0..cfg.max_inner_iters {
        let gnorm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gnorm <= 1e-10 * (1.0 + f.abs()) {
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q = axpy(&q, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q = axpy(&q, a - b, s);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            mem.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if mem.is_empty() { 1.0 / gnorm.max(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let hn = axpy(&h, step, &dir);
            let fn_ = p.objective(&hn, lambda)?;
            if fn_ <= f + 1e-4 * step * slope {
                accepted = Some((hn, fn_));
                break;
            }
            step *= 0.5;
        }
        let (hn, fn_) = match accepted {
            Some(v) => v,
            None => match compass(p, &h, f, lambda)? {
                Some(v) => {
                    mem.clear();
                    v
                }
                None => break,
            },
        };
        let gn = p.gradient(&hn, lambda, cfg.fd_step)?;
        let s: Vec<f64> = hn.iter().zip(&h).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == cfg.memory {
                mem.remove(0);
            }
            mem.push((s, y, 1.0 / sy));
        }
        let decrease = f - fn_;
        h = hn;
        f = fn_;
        g = gn;
        if decrease <= 1e-15 * (1.0 + f.abs()) {
            break;
        }
    }
    Ok(h)
}

/// Coordinate search with a shrinking pattern. Returns the first improving
/// point, or `None` once the pattern size is negligible.
fn compass(p: &Problem<'_>, h: &[f64], f: f64, lambda: f64) -> Result<Option<(Vec<f64>, f64)>> {
    let scale = 1.0 + h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut size = 0.1 * scale;
    while size > 1e-9 * scale {
        let trials: Vec<(Vec<f64>, f64)> = (0..2 * h.len())
            .into_par_iter()
            .map(|j| {
                let mut hn = h.to_vec();
                hn[j / 2] += if j % 2 == 0 { size } else { -size };
                let v = p.objective(&hn, lambda)?;
                Ok((hn, v))
            })
            .collect::<Result<_>>()?;
        // First best in index order keeps the choice deterministic.
        let best = trials
            .into_iter()
            .fold(None::<(Vec<f64>, f64)>, |acc, t| match acc {
                Some(a) if a.1 <= t.1 => Some(a),
                _ => Some(t),
            });
        if let Some(b) = best.filter(|b| b.1 < f) {
            return Ok(Some(b));
        }
        size *= 0.25;
    }
    Ok(None)
}

/// Estimates `inf { ½∫‖h‖² : Y^h hits target }` by a quadratic penalty on
/// the miss with geometric continuation in the penalty weight, stopping at
/// the first weight whose minimizer misses by at most `feas_tol`.
///
/// The returned value is the energy of an approximately feasible control,
/// i.e. an upper-bound estimate of the rate at tolerance `feas_tol`. If no
/// weight up to `penalty_max` achieves feasibility the result is
/// [`RateValue::Infinite`]; if the iterates blow past `energy_ceiling` the
/// call fails with [`Error::Optimization`].
pub fn rate_of_path(
    model: &Model,
    x0: &[f64],
    psi: &ReflectedPath,
    target: &RateTarget,
    cfg: &OptConfig,
) -> Result<RateValue> {
    cfg.validate()?;
    let d = model.dim();
    match target {
        RateTarget::Path(phi) if phi.len() != psi.n_nodes() * d => {
            return Err(Error::Shape {
                what: "target path",
                expected: psi.n_nodes() * d,
                got: phi.len(),
            })
        }
        RateTarget::Path(phi) if phi.iter().any(|v| !v.is_finite()) => {
            return Err(Error::InvalidArgument("target path must be finite".into()))
        }
        RateTarget::TerminalBall { center, radius } if center.len() != d || !(*radius >= 0.0) => {
            return Err(Error::InvalidArgument(format!("terminal ball needs a {d}-point centre and radius >= 0")))
        }
        _ => {}
    }
    let p = Problem {
        model,
        x0,
        flow: MeasureFlow::dirac_flow(psi),
        template: Control::zeros(psi.grid().clone(), model.noise_dim()),
        target,
    };
    let mut h = p.template.values().to_vec();
    let (res0, _) = p.miss(&p.solve(&h)?);
    if res0 <= cfg.feas_tol {
        return Ok(RateValue::Finite {
            value: 0.0,
            witness: p.template.clone(),
            residual: res0,
        });
    }
    let mut best_residual = res0;
    let mut lambda = cfg.penalty_start;
    while lambda <= cfg.penalty_max * (1.0 + 1e-12) {
        h = minimize(&p, h, lambda, cfg)?;
        let energy = p.energy(&h);
        if energy > cfg.energy_ceiling {
            return Err(Error::Optimization {
                energy,
                ceiling: cfg.energy_ceiling,
            });
        }
        let (res, _) = p.miss(&p.solve(&h)?);
        best_residual = best_residual.min(res);
        if res <= cfg.feas_tol {
            let witness = Control::new(p.template.grid().clone(), p.template.noise_dim(), h)?;
            return Ok(RateValue::Finite {
                value: witness.energy(),
                witness,
                residual: res,
            });
        }
        lambda *= cfg.penalty_growth;
    }
    Ok(RateValue::Infinite { best_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{PresetParams, PRESET_NAMES};
    use crate::grid::TimeGrid;
    use crate::ldp::solve_limit_ode;
    use crate::ldp::tests::{free_model, model};

    #[test]
    fn limit_path_has_zero_rate_for_every_preset() {
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        for name in PRESET_NAMES {
            let m = model(1.0, 0.25, name, PresetParams::default());
            let psi = solve_limit_ode(&m, &[0.4], &grid).unwrap();
            let r = rate_of_path(&m, &[0.4], &psi, &RateTarget::Path(psi.positions().to_vec()), &OptConfig::default())
                .unwrap();
            assert_eq!(r.value(), 0.0, "{name}");
            assert!(r.witness().unwrap().values().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn no_diffusion_means_infinite_rate_off_the_limit() {
        let m = model(1.0, 0.0, "ou", PresetParams { sigma: Some(0.0), ..Default::default() });
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let psi = solve_limit_ode(&m, &[0.4], &grid).unwrap();
        let target = RateTarget::TerminalBall {
            center: vec![0.0],
            radius: 0.0,
        };
        let r = rate_of_path(&m, &[0.4], &psi, &target, &OptConfig::default()).unwrap();
        assert!(r.is_infinite());
        assert_eq!(r.value(), f64::INFINITY);
    }

    // min ½∫h² subject to ∫h = a is attained by h ≡ a/T, with value a²/(2T).
    #[test]
    fn brownian_terminal_rate_matches_closed_form() {
        let m = free_model(5.0);
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let psi = solve_limit_ode(&m, &[0.0], &grid).unwrap();
        let a = 1.5;
        let target = RateTarget::TerminalBall {
            center: vec![a],
            radius: 0.0,
        };
        let r = rate_of_path(&m, &[0.0], &psi, &target, &OptConfig::default()).unwrap();
        let exact = a * a / 2.0;
        assert!((r.value() - exact).abs() < 0.01 * exact, "{} vs {exact}", r.value());
        let w = r.witness().unwrap();
        assert_eq!(r.value(), w.energy());
        for v in w.values() {
            assert!((v - a).abs() < 0.02, "{v}");
        }
    }

    // For a path target φ_t = c t the only admissible control is h ≡ c.
    #[test]
    fn linear_path_target_recovers_its_slope() {
        let m = free_model(5.0);
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let psi = solve_limit_ode(&m, &[0.0], &grid).unwrap();
        let phi: Vec<f64> = (0..=8).map(|k| 0.7 * grid.time(k)).collect();
        let r = rate_of_path(&m, &[0.0], &psi, &RateTarget::Path(phi), &OptConfig::default()).unwrap();
        assert!((r.value() - 0.5 * 0.49).abs() < 0.01, "{}", r.value());
    }

    #[test]
    fn energy_ceiling_is_enforced() {
        let m = free_model(60.0);
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let psi = solve_limit_ode(&m, &[0.0], &grid).unwrap();
        let target = RateTarget::TerminalBall {
            center: vec![48.0],
            radius: 0.0,
        };
        let e = rate_of_path(&m, &[0.0], &psi, &target, &OptConfig::default()).unwrap_err();
        assert_eq!(e.code(), 8);
    }

    #[test]
    fn bad_target_shape_is_rejected() {
        let m = free_model(5.0);
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let psi = solve_limit_ode(&m, &[0.0], &grid).unwrap();
        assert!(rate_of_path(&m, &[0.0], &psi, &RateTarget::Path(vec![0.0; 3]), &OptConfig::default()).is_err());
    }
}
