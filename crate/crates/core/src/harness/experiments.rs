use std::collections::BTreeMap;

use super::config::{Experiment, ExperimentConfig, Resolved, TargetSpec};
use super::output::{num, opt, Table};
use super::Check;
use crate::ensemble::{chaos_experiment, picard_iterate, simulate_interacting, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::geometry::nearest_boundary;
use crate::ldp::{
    check_ldp1, check_ldp2, check_limit_law, estimate_rare_event, oscillatory_sequence, rate_of_path,
    solve_limit_ode, RareEvent, RateTarget, RateValue,
};
use crate::noise::{derive_seed, NoiseDriver};
use crate::vecops::dist;

type Outcome = (BTreeMap<String, Table>, Vec<Check>);

pub(super) fn dispatch(e: Experiment, cfg: &ExperimentConfig, r: &Resolved) -> Result<Outcome> {
    let driver = NoiseDriver::new(derive_seed(cfg.master_seed, "noise"), r.model.noise_dim());
    match e {
        Experiment::Simulate => simulate(cfg, r, &driver),
        Experiment::Picard => picard(cfg, r, &driver),
        Experiment::Chaos => chaos(cfg, r),
        Experiment::LdpRate => rate(cfg, r),
        Experiment::LdpRareEvent => rare_event(cfg, r, &driver),
        Experiment::LdpCheckLdp1 => ldp1(cfg, r),
        Experiment::LdpCheckLdp2 => ldp2(cfg, r, &driver),
        Experiment::LdpCheckLimitLaw => limit_law(cfg, r, &driver),
    }
}

fn coords(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn table(fixed: &[&str], prefix: &str, d: usize, tail: &[&str]) -> Table {
    let mut h: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    h.extend(coords(prefix, d));
    h.extend(tail.iter().map(|s| s.to_string()));
    Table {
        header: h,
        rows: Vec::new(),
    }
}

fn paths_table(e: &ParticleEnsemble) -> Table {
    let d = e.dim();
    let grid = e.grid();
    let mut t = table(&["particle", "step", "t"], "x", d, &["local_time", "xi"]);
    for (i, p) in e.paths().iter().enumerate() {
        for k in 0..p.n_nodes() {
            let mut row = vec![i.to_string(), k.to_string(), num(grid.time(k))];
            row.extend(p.position(k).iter().map(|v| num(*v)));
            row.push(num(p.local_time(k)));
            row.push(num(if k == 0 { 0.0 } else { p.xi(k - 1) }));
            t.push(row);
        }
    }
    t
}

fn summary_table(e: &ParticleEnsemble) -> Table {
    let d = e.dim();
    let mut t = table(&["step", "t"], "mean", d, &["std"]);
    for k in 0..e.grid().n_nodes() {
        let mu = e.measure_at(k);
        let mut row = vec![k.to_string(), num(e.grid().time(k))];
        row.extend(mu.mean().iter().map(|v| num(*v)));
        row.push(num(mu.std()));
        t.push(row);
    }
    t
}

/// Containment of every state and the support condition of the local time.
pub(crate) fn reflection_checks(r: &Resolved, e: &ParticleEnsemble) -> Result<Vec<Check>> {
    let dom = r.model.domain.as_ref();
    let tol = dom.tol_boundary();
    let grid = e.grid();
    let (mut worst_out, mut worst_support, mut pushes) = (0.0f64, 0.0f64, 0usize);
    let mut monotone = true;
    for p in e.paths() {
        for k in 0..p.n_nodes() {
            worst_out = worst_out.max(dom.dist(grid.time(k), p.position(k)));
        }
        for k in 0..grid.n_steps() {
            monotone &= p.local_time(k + 1) >= p.local_time(k);
            if p.xi(k) > 0.0 {
                pushes += 1;
                let (t, x) = (grid.time(k + 1), p.position(k + 1));
                let gap = match dom.signed_distance(t, x) {
                    Some(s) => s.abs(),
                    None => dist(x, &nearest_boundary(dom, t, x)?.point),
                };
                worst_support = worst_support.max(gap);
            }
        }
    }
    Ok(vec![
        Check::new("containment", worst_out <= tol, format!("max distance {worst_out:e}, tol {tol:e}")),
        Check::new(
            "local_time_support",
            worst_support <= tol,
            format!("{pushes} pushes, max boundary gap {worst_support:e}"),
        ),
        Check::new("local_time_nondecreasing", monotone, ""),
    ])
}

fn simulate(cfg: &ExperimentConfig, r: &Resolved, driver: &NoiseDriver) -> Result<Outcome> {
    let e = simulate_interacting(&r.model, cfg.particles.n, &r.init, &r.grid, driver, 1.0)?;
    let checks = reflection_checks(r, &e)?;
    let mut tables = BTreeMap::new();
    tables.insert("paths".into(), paths_table(&e));
    tables.insert("summary".into(), summary_table(&e));
    Ok((tables, checks))
}

fn picard(cfg: &ExperimentConfig, r: &Resolved, driver: &NoiseDriver) -> Result<Outcome> {
    let p = &cfg.picard;
    let (history, converged, ensemble) =
        match picard_iterate(&r.model, &r.init, &r.grid, driver, 1.0, p.n_copies, p.max_iters, p.tol) {
            Ok(res) => (res.history, true, Some(res.ensemble)),
            Err(Error::FixedPoint { history, .. }) => (history, false, None),
            Err(e) => return Err(e),
        };
    let mut t = Table::new(&["iteration", "sup_w2"]);
    for (k, h) in history.iter().enumerate() {
        t.push(vec![(k + 1).to_string(), num(*h)]);
    }
    let decreasing = history.len() < 3 || history[1..].windows(2).all(|w| w[1] < w[0]);
    let last = history.last().copied().unwrap_or(f64::NAN);
    let mut tables = BTreeMap::new();
    tables.insert("history".into(), t);
    if let Some(e) = ensemble {
        tables.insert("summary".into(), summary_table(&e));
    }
    let checks = vec![
        Check::new("converged", converged, format!("{} iterations, last {last:e}, tol {:e}", history.len(), p.tol)),
        Check::new("contracting_from_second_iterate", decreasing, ""),
    ];
    Ok((tables, checks))
}

fn chaos(cfg: &ExperimentConfig, r: &Resolved) -> Result<Outcome> {
    let p = &cfg.particles;
    let table = chaos_experiment(&r.model, &r.init, &r.grid, &p.n_list, p.n_rep, cfg.master_seed, 1.0)?;
    let mut t = Table::new(&["n", "mean_sq_dist", "stderr", "n_ref", "n_rep"]);
    for row in &table.rows {
        t.push(vec![
            row.n.to_string(),
            num(row.mean_sq_dist),
            num(row.stderr),
            table.n_ref.to_string(),
            table.n_rep.to_string(),
        ]);
    }
    let checks = vec![Check::new("strictly_decreasing", table.strictly_decreasing(), "")];
    Ok((BTreeMap::from([("chaos".to_string(), t)]), checks))
}

fn target(cfg: &ExperimentConfig, r: &Resolved, psi: &crate::ReflectedPath) -> Result<RateTarget> {
    let d = r.model.dim();
    Ok(match &cfg.ldp.target {
        TargetSpec::Limit => RateTarget::Path(psi.positions().to_vec()),
        TargetSpec::TerminalBall { center, radius } => RateTarget::TerminalBall {
            center: center.clone(),
            radius: *radius,
        },
        TargetSpec::Linear { velocity } => {
            if velocity.len() != d {
                return Err(Error::Config(format!("target velocity needs {d} components")));
            }
            let x0 = &r.init.center;
            let phi = (0..r.grid.n_nodes())
                .flat_map(|k| {
                    let t = r.grid.time(k);
                    x0.iter().zip(velocity).map(move |(a, v)| a + t * v).collect::<Vec<_>>()
                })
                .collect();
            RateTarget::Path(phi)
        }
    })
}

fn rate(cfg: &ExperimentConfig, r: &Resolved) -> Result<Outcome> {
    let psi = solve_limit_ode(&r.model, &r.init.center, &r.grid)?;
    let tgt = target(cfg, r, &psi)?;
    let value = rate_of_path(&r.model, &r.init.center, &psi, &tgt, &cfg.optimizer)?;
    let mut tables = BTreeMap::new();
    let mut t = Table::new(&["rate_estimate", "infinite", "residual", "feas_tol"]);
    let residual = match &value {
        RateValue::Finite { residual, .. } => *residual,
        RateValue::Infinite { best_residual } => *best_residual,
    };
    t.push(vec![
        num(value.value()),
        value.is_infinite().to_string(),
        num(residual),
        num(cfg.optimizer.feas_tol),
    ]);
    tables.insert("rate".into(), t);
    let mut consistent = true;
    if let Some(w) = value.witness() {
        consistent = w.energy() == value.value();
        let mut wt = table(&["step", "t"], "h", w.noise_dim(), &[]);
        for k in 0..r.grid.n_steps() {
            let mut row = vec![k.to_string(), num(r.grid.time(k))];
            row.extend(w.step(k).iter().map(|v| num(*v)));
            wt.push(row);
        }
        tables.insert("witness".into(), wt);
    }
    Ok((tables, vec![Check::new("witness_energy_is_value", consistent, "")]))
}

fn rare_event(cfg: &ExperimentConfig, r: &Resolved, driver: &NoiseDriver) -> Result<Outcome> {
    let l = &cfg.ldp;
    let event = RareEvent {
        kind: l.event,
        threshold: l.threshold,
    };
    let res = estimate_rare_event(&r.model, &r.init, &r.grid, driver, &l.epsilon, event, l.n_copies)?;
    // Terminal-point proxy for the event's closure: reach ψ_T + threshold·e₁.
    let rate = if l.compare_rate {
        let psi = solve_limit_ode(&r.model, &r.init.center, &r.grid)?;
        let mut center = psi.terminal().to_vec();
        center[0] += l.threshold;
        let v = rate_of_path(
            &r.model,
            &r.init.center,
            &psi,
            &RateTarget::TerminalBall { center, radius: 0.0 },
            &cfg.optimizer,
        )?;
        Some(v.value())
    } else {
        None
    };
    let mut t = Table::new(&[
        "epsilon",
        "n",
        "hits",
        "p_hat",
        "ci_low",
        "ci_high",
        "exponent",
        "p_upper_one_sided",
        "exponent_lower_bound",
        "rate_estimate",
    ]);
    let mut ci_ok = true;
    for row in &res.rows {
        ci_ok &= row.ci_low <= row.p_hat && row.p_hat <= row.ci_high;
        t.push(vec![
            num(row.epsilon),
            row.n.to_string(),
            row.hits.to_string(),
            num(row.p_hat),
            num(row.ci_low),
            num(row.ci_high),
            opt(row.exponent),
            opt(row.p_upper_one_sided),
            opt(row.exponent_lower_bound),
            opt(rate),
        ]);
    }
    Ok((
        BTreeMap::from([("rare_event".to_string(), t)]),
        vec![Check::new("interval_contains_estimate", ci_ok, "")],
    ))
}

fn ldp1(cfg: &ExperimentConfig, r: &Resolved) -> Result<Outcome> {
    let l = &cfg.ldp;
    let m = r.model.noise_dim();
    let h = cfg.control(&r.grid, m)?;
    let psi = solve_limit_ode(&r.model, &r.init.center, &r.grid)?;
    let seq = oscillatory_sequence(&h, l.amplitude, &l.freqs)?;
    let rep = check_ldp1(&r.model, &r.init.center, &psi, &seq, &h, l.ldp1_tol)?;
    let mut t = Table::new(&["freq", "distance", "energy"]);
    for ((f, d), e) in l.freqs.iter().zip(&rep.distances).zip(&rep.energies) {
        t.push(vec![f.to_string(), num(*d), num(*e)]);
    }
    let checks = vec![
        Check::new("monotone", rep.monotone, ""),
        Check::new(
            "below_tol",
            rep.below_tol,
            format!("last {:e}, tol {:e}", rep.distances[rep.distances.len() - 1], rep.tol),
        ),
    ];
    Ok((BTreeMap::from([("ldp1".to_string(), t)]), checks))
}

fn ldp2(cfg: &ExperimentConfig, r: &Resolved, driver: &NoiseDriver) -> Result<Outcome> {
    let l = &cfg.ldp;
    let h = cfg.control(&r.grid, r.model.noise_dim())?;
    let rep = check_ldp2(&r.model, &r.init, &r.grid, driver, &l.epsilon, &h, l.theta, l.n_copies)?;
    let mut t = Table::new(&["epsilon", "n", "hits", "p_hat", "stderr"]);
    for row in &rep.rows {
        t.push(vec![num(row.epsilon), row.n.to_string(), row.hits.to_string(), num(row.p_hat), num(row.stderr)]);
    }
    let checks = vec![Check::new("nonincreasing_within_2se", rep.nonincreasing, "")];
    Ok((BTreeMap::from([("ldp2".to_string(), t)]), checks))
}

fn limit_law(cfg: &ExperimentConfig, r: &Resolved, driver: &NoiseDriver) -> Result<Outcome> {
    let l = &cfg.ldp;
    let rep = check_limit_law(&r.model, &r.init, &r.grid, driver, &l.epsilon, l.n_copies)?;
    let mut t = Table::new(&["epsilon", "sup_w2", "stderr", "argmax_t"]);
    for row in &rep.rows {
        t.push(vec![num(row.epsilon), num(row.sup_w2), num(row.stderr), num(r.grid.time(row.argmax_node))]);
    }
    let checks = vec![Check::new("nonincreasing_within_2se", rep.nonincreasing, "")];
    Ok((BTreeMap::from([("limit_law".to_string(), t)]), checks))
}
