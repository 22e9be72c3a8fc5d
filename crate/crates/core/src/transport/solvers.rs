//! Exact discrete transport solvers on squared Euclidean cost.

use std::cmp::Ordering;

use crate::coefficients::EmpiricalMeasure;
use crate::vecops::dist_sq;

/// Sparse plan entry `(row, col, mass)`.
pub(crate) type Entry = (usize, usize, f64);

fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Vec<f64> {
    let (n, m) = (mu.len(), nu.len());
    let mut c = vec![0.0; n * m];
    for i in 0..n {
        let x = mu.atom(i);
        for j in 0..m {
            c[i * m + j] = dist_sq(x, nu.atom(j));
        }
    }
    c
}

/// Quantile coupling on the line. Exact for any weights in one dimension.
pub(crate) fn quantile_1d(xs: &[f64], wx: &[f64], ys: &[f64], wy: &[f64]) -> (f64, Vec<Entry>) {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        idx
    };
    let (ix, iy) = (order(xs), order(ys));
    let mut entries = Vec::with_capacity(xs.len() + ys.len());
    let (mut a, mut b) = (0, 0);
    let (mut ra, mut rb) = (wx[ix[0]], wy[iy[0]]);
    let mut cost = 0.0;
    while a < ix.len() && b < iy.len() {
        let mass = ra.min(rb);
        let (i, j) = (ix[a], iy[b]);
        if mass > 0.0 {
            cost += mass * (xs[i] - ys[j]).powi(2);
            entries.push((i, j, mass));
        }
        // The smaller remainder drops to exactly zero.
        ra -= mass;
        rb -= mass;
        if ra == 0.0 {
            a += 1;
            if a < ix.len() {
                ra = wx[ix[a]];
            }
        }
        if rb == 0.0 {
            b += 1;
            if b < iy.len() {
                rb = wy[iy[b]];
            }
        }
    }
    (cost, entries)
}

/// Sorted pairing for uniform measures of equal size on the line.
pub(crate) fn sorted_pairing_cost(xs: &mut [f64], ys: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().zip(ys.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

/// Minimum-cost perfect matching (shortest augmenting paths with potentials).
/// Returns the column assigned to each row.
pub(crate) fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

pub(crate) fn assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> (f64, Vec<Entry>) {
    let n = mu.len();
    let c = cost_matrix(mu, nu);
    let assign = hungarian(&c, n);
    let w = 1.0 / n as f64;
    let cost = assign.iter().enumerate().map(|(i, &j)| c[i * n + j]).sum::<f64>() * w;
    let entries = assign.iter().enumerate().map(|(i, &j)| (i, j, w)).collect();
    (cost, entries)
}

const MASS_EPS: f64 = 1e-14;

/// General weighted transport by successive shortest paths on the bipartite
/// residual graph, with Dijkstra on reduced costs.
pub(crate) fn min_cost_transport(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> (f64, Vec<Entry>) {
    let (n, m) = (mu.len(), nu.len());
    let c = cost_matrix(mu, nu);
    let mut supply = mu.weights().to_vec();
    let mut demand = nu.weights().to_vec();
    let mut flow = vec![0.0; n * m];
    // Potentials: rows 0..n, columns n..n+m.
    let mut pot = vec![0.0; n + m];
    let total = n + m;
    let mut dist = vec![0.0; total];
    let mut prev = vec![usize::MAX; total];
    let mut done = vec![false; total];

    for _round in 0..(4 * (n + m) * (n + m) + 16) {
        if supply.iter().all(|&s| s <= MASS_EPS) || demand.iter().all(|&d| d <= MASS_EPS) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|b| *b = false);
        for i in 0..n {
            if supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            for v in 0..total {
                if !done[v] && dist[v] < bd {
                    bd = dist[v];
                    best = v;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best >= n && demand[best - n] > MASS_EPS {
                target = Some(best);
                break;
            }
            if best < n {
                let i = best;
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (c[i * m + j] + pot[i] - pot[v]).max(0.0);
                    if dist[i] + rc < dist[v] {
                        dist[v] = dist[i] + rc;
                        prev[v] = i;
                    }
                }
            } else {
                let j = best - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= MASS_EPS {
                        continue;
                    }
                    let rc = (-c[i * m + j] + pot[best] - pot[i]).max(0.0);
                    if dist[best] + rc < dist[i] {
                        dist[i] = dist[best] + rc;
                        prev[i] = best;
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let dt = dist[t];
        for v in 0..total {
            pot[v] += dist[v].min(dt);
        }
        // Bottleneck along the path back to a supplying row.
        let mut bottleneck = demand[t - n];
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                bottleneck = bottleneck.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        bottleneck = bottleneck.min(supply[v]);
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += bottleneck;
            } else {
                let f = &mut flow[v * m + (u - n)];
                *f = (*f - bottleneck).max(0.0);
            }
            v = u;
        }
        supply[v] -= bottleneck;
        demand[t - n] -= bottleneck;
    }

    let mut cost = 0.0;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > MASS_EPS {
                cost += f * c[i * m + j];
                entries.push((i, j, f));
            }
        }
    }
    (cost, entries)
}

pub(crate) fn cmp_entries(a: &Entry, b: &Entry) -> Ordering {
    a.0.cmp(&b.0).then(a.1.cmp(&b.1))
}
