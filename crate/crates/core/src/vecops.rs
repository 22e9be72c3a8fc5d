#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    dist_sq(x, y).sqrt()
}

/// `x + s * v`
#[inline]
pub fn offset(x: &[f64], s: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + s * b).collect()
}

/// Normalizes in place; returns false when the vector is (numerically) zero.
pub fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if !(n > 1e-300) || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|c| *c /= n);
    true
}
