//! Boundary location by derivative-free search on `d(t, ·)`.

use std::f64::consts::PI;

use rand::Rng;

use super::{check_time, BoundaryAnchor, TimeDomain};
use crate::error::{Error, Result};
use crate::vecops::{dist, normalize, offset};

/// Central-difference gradient of `d(t, ·)` at `x`, normalized.
pub(crate) fn unit_gradient(domain: &(impl TimeDomain + ?Sized), t: f64, x: &[f64], h: f64) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = domain.dist(t, &probe);
        probe[i] = x[i] - h;
        let down = domain.dist(t, &probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    normalize(&mut g).then_some(g)
}

/// Smallest `s` (up to `tol`) with `d(t, x + s·dir) ≤ tol`, given that the
/// bracket `[lo, hi]` has `d > tol` at `lo` and `d ≤ tol` at `hi`.
pub(crate) fn bisect_entry(
    domain: &(impl TimeDomain + ?Sized),
    t: f64,
    x: &[f64],
    dir: &[f64],
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let mut buf = x.to_vec();
    while hi - lo > 0.5 * tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        for ((b, &xi), &di) in buf.iter_mut().zip(x).zip(dir) {
            *b = xi + mid * di;
        }
        if domain.dist(t, &buf) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Last `s` along `x + s·dir` still inside, given `d = 0` at `lo` and `d > 0` at `hi`.
fn bisect_exit(
    domain: &(impl TimeDomain + ?Sized),
    t: f64,
    x: &[f64],
    dir: &[f64],
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let mut buf = x.to_vec();
    while hi - lo > 0.5 * tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        for ((b, &xi), &di) in buf.iter_mut().zip(x).zip(dir) {
            *b = xi + mid * di;
        }
        if domain.dist(t, &buf) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// First boundary crossing when leaving the closed section from the inside
/// point `x` along the unit vector `dir`.
fn exit_point(domain: &(impl TimeDomain + ?Sized), t: f64, x: &[f64], dir: &[f64]) -> Option<f64> {
    let r = domain.bounding_radius();
    let tol = domain.tol_boundary();
    let step = r / 64.0;
    let max_s = 3.0 * r + dist(x, &vec![0.0; x.len()]);
    let mut s_prev = 0.0;
    let mut s = step.min(tol.max(1e-3 * step));
    loop {
        if domain.dist(t, &offset(x, s, dir)) > 0.0 {
            return Some(bisect_exit(domain, t, x, dir, s_prev, s, tol));
        }
        if s >= max_s {
            return None;
        }
        s_prev = s;
        // geometric growth near the start, then uniform marching
        s = (2.0 * s).min(s + step).min(max_s);
    }
}

fn search_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 64.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // Deterministic quasi-uniform directions: axes, then a Fibonacci
            // sphere lifted into the first three coordinates.
            let mut dirs = Vec::new();
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; dim];
                    v[i] = s;
                    dirs.push(v);
                }
            }
            let n = 192;
            let golden = PI * (3.0 - 5f64.sqrt());
            for k in 0..n {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let rad = (1.0 - z * z).sqrt();
                let a = golden * k as f64;
                let mut v = vec![0.0; dim];
                v[0] = rad * a.cos();
                v[1] = rad * a.sin();
                v[2] = z;
                dirs.push(v);
            }
            dirs
        }
    }
}

fn inward_hint_at(domain: &(impl TimeDomain + ?Sized), t: f64, p: &[f64], fallback_outward: &[f64]) -> Vec<f64> {
    let h = 1e-6 * domain.bounding_radius();
    let mut n = unit_gradient(domain, t, p, h).unwrap_or_else(|| fallback_outward.to_vec());
    n.iter_mut().for_each(|v| *v = -*v);
    n
}

/// Closest boundary point of `D_t` to `x`.
///
/// Exterior points follow the ray against the distance gradient and bisect
/// onto the boundary. Interior points run a directional exit search and then
/// refine along the outward normal of the best candidate.
pub fn nearest_boundary(domain: &(impl TimeDomain + ?Sized), t: f64, x: &[f64]) -> Result<BoundaryAnchor> {
    check_time(domain.horizon(), t)?;
    if x.len() != domain.dim() {
        return Err(Error::Shape {
            what: "point",
            expected: domain.dim(),
            got: x.len(),
        });
    }
    let r = domain.bounding_radius();
    let tol = domain.tol_boundary();
    let d0 = domain.dist(t, x);

    if d0 > tol {
        let h = (0.25 * d0).clamp(1e-11 * r, 1e-5 * r);
        let g = unit_gradient(domain, t, x, h).ok_or_else(|| Error::GeometrySearch {
            t,
            reason: format!("vanishing distance gradient at {x:?}"),
        })?;
        let down: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut hi = d0;
        let limit = 4.0 * r + d0;
        while domain.dist(t, &offset(x, hi, &down)) > tol {
            hi *= 2.0;
            if hi > limit {
                return Err(Error::GeometrySearch {
                    t,
                    reason: format!("no boundary crossing along the gradient ray from {x:?}"),
                });
            }
        }
        let s = bisect_entry(domain, t, x, &down, 0.0, hi, tol);
        let point = offset(x, s, &down);
        let inward_hint = inward_hint_at(domain, t, &point, &g);
        return Ok(BoundaryAnchor {
            point,
            time: t,
            inward_hint,
        });
    }

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for dir in search_directions(x.len()) {
        if let Some(s) = exit_point(domain, t, x, &dir) {
            if best.as_ref().map_or(true, |b| s < b.0) {
                best = Some((s, offset(x, s, &dir), dir));
            }
        }
    }
    let (mut best_s, mut best_p, mut best_dir) = best.ok_or_else(|| Error::GeometrySearch {
        t,
        reason: format!("no exit found from {x:?} within the bounding ball"),
    })?;
    // Fixed-point refinement: re-aim along the outward normal at the current
    // candidate until the candidate stops moving.
    for _ in 0..64 {
        let h = 1e-6 * r;
        let probe = offset(&best_p, 4.0 * h, &best_dir);
        let Some(n) = unit_gradient(domain, t, &probe, h) else { break };
        match exit_point(domain, t, x, &n) {
            Some(s) if s <= best_s + tol => {
                let p = offset(x, s, &n);
                let moved = dist(&p, &best_p);
                best_s = s;
                best_p = p;
                best_dir = n;
                if moved <= tol {
                    break;
                }
            }
            _ => break,
        }
    }
    let inward_hint = inward_hint_at(domain, t, &best_p, &best_dir);
    Ok(BoundaryAnchor {
        point: best_p,
        time: t,
        inward_hint,
    })
}

/// Random boundary anchor of `D_t`: exit point of a random ray started at a
/// random interior point.
pub fn sample_boundary_anchor<R: Rng + ?Sized>(
    domain: &(impl TimeDomain + ?Sized),
    t: f64,
    rng: &mut R,
) -> Result<BoundaryAnchor> {
    let d = domain.dim();
    let start = sample_inside(domain, t, rng).ok_or_else(|| Error::GeometrySearch {
        t,
        reason: "could not sample an interior point".into(),
    })?;
    for _ in 0..64 {
        let mut dir = random_unit(d, rng);
        if !normalize(&mut dir) {
            continue;
        }
        if let Some(s) = exit_point(domain, t, &start, &dir) {
            let point = offset(&start, s, &dir);
            let inward_hint = inward_hint_at(domain, t, &point, &dir);
            return Ok(BoundaryAnchor {
                point,
                time: t,
                inward_hint,
            });
        }
    }
    Err(Error::GeometrySearch {
        t,
        reason: "random rays never left the section".into(),
    })
}

pub(crate) fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Uniform sample from the ball of radius `radius` about `center`.
pub(crate) fn sample_ball<R: Rng + ?Sized>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..center.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return center.iter().zip(&v).map(|(c, o)| c + radius * o).collect();
        }
    }
}

/// Rejection sample of a point of the closed section `D̄_t`.
pub(crate) fn sample_inside<R: Rng + ?Sized>(
    domain: &(impl TimeDomain + ?Sized),
    t: f64,
    rng: &mut R,
) -> Option<Vec<f64>> {
    let zero = vec![0.0; domain.dim()];
    (0..100_000)
        .map(|_| sample_ball(&zero, domain.bounding_radius(), rng))
        .find(|x| domain.dist(t, x) == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FnDomain, MovingBall, MovingInterval};
    use rand::SeedableRng;

    fn interval() -> MovingInterval {
        MovingInterval::new(1.0, 0.25, 1.0, 1.0).unwrap()
    }

    // 1-D oracle: bisection on the segment from x towards the nearest sampled
    // interior point.
    fn segment_bisection(dom: &MovingInterval, t: f64, x: f64) -> f64 {
        let inner = (-1000..=1000)
            .map(|i| 2.0 * i as f64 / 1000.0)
            .filter(|y| dom.dist(t, &[*y]) == 0.0)
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
            .unwrap();
        let (mut lo, mut hi) = (x, inner);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dom.dist(t, &[mid]) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        hi
    }

    #[test]
    fn exterior_interval_anchor() {
        let dom = interval();
        let a = nearest_boundary(&dom, 0.0, &[1.5]).unwrap();
        let oracle = segment_bisection(&dom, 0.0, 1.5);
        assert!((oracle - 1.0).abs() < 1e-12);
        assert!((a.point[0] - oracle).abs() < 1e-8);
        assert_eq!(a.inward_hint, vec![-1.0]);
        assert!((dist(&a.point, &[1.5]) / 0.5 - 1.0).abs() < crate::TOL_REL);
    }

    #[test]
    fn interior_interval_anchor() {
        let dom = interval();
        let a = nearest_boundary(&dom, 0.0, &[0.9]).unwrap();
        // Directional oracle in 1-D: the two exits are 1 and -1.
        assert!((a.point[0] - 1.0).abs() < 1e-8);
        assert!(dom.dist(0.0, &a.point) <= dom.tol_boundary());
    }

    #[test]
    fn unit_disk_anchor_by_symmetry() {
        let disk = MovingBall::unit_disk(1.0);
        let a = nearest_boundary(&disk, 0.0, &[2.0, 0.0]).unwrap();
        assert!(dist(&a.point, &[1.0, 0.0]) < 1e-8);
        assert!(dist(&a.inward_hint, &[-1.0, 0.0]) < 1e-6);
        let a = nearest_boundary(&disk, 0.0, &[0.3, 0.4]).unwrap();
        assert!(dist(&a.point, &[0.6, 0.8]) < 1e-6, "{:?}", a.point);
    }

    #[test]
    fn exterior_anchor_within_relative_tolerance() {
        let disk = MovingBall::new(vec![0.1, 0.2, -0.3], 0.8, 0.2, 1.0, 1.0).unwrap();
        let x = [1.1, -0.4, 0.7];
        let a = nearest_boundary(&disk, 0.4, &x).unwrap();
        let d = disk.dist(0.4, &x);
        assert!(disk.dist(0.4, &a.point) <= disk.tol_boundary());
        assert!(dist(&x, &a.point) <= d * (1.0 + crate::TOL_REL));
    }

    #[test]
    fn search_failure_is_reported() {
        // A "domain" whose distance never reaches zero along any ray.
        let dom = FnDomain::new(1, 1.0, 1.0, |_, x: &[f64]| 1.0 + x[0].abs()).unwrap();
        assert!(matches!(nearest_boundary(&dom, 0.0, &[0.5]), Err(Error::GeometrySearch { .. })));
    }

    #[test]
    fn sampled_anchors_lie_on_the_boundary() {
        let disk = MovingBall::new(vec![0.0, 0.0], 1.0, 0.3, 1.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = sample_boundary_anchor(&disk, 0.37, &mut rng).unwrap();
            let sd = disk.signed_distance(0.37, &a.point).unwrap();
            assert!(sd.abs() <= disk.tol_boundary(), "{sd}");
            let out = offset(&a.point, -1e-6, &a.inward_hint);
            assert!(disk.dist(0.37, &out) > 0.0);
        }
    }
}
