use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Weighted point cloud in `R^d`; the finite stand-in for a law `μ_t`.
///
/// Points are stored row-major in one flat buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl EmpiricalMeasure {
    /// Uniform weights on the rows of `points` (flat, `n × dim`).
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "empirical measure needs a nonempty n x {dim} point buffer, got {} values",
                points.len()
            )));
        }
        let n = points.len() / dim;
        Ok(EmpiricalMeasure {
            dim,
            points,
            weights: vec![1.0 / n as f64; n],
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument("atoms of differing dimension".into()));
        }
        Self::uniform(dim, points.concat())
    }

    pub fn weighted(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut m = Self::uniform(dim, points)?;
        if weights.len() != m.len() {
            return Err(Error::Shape {
                what: "measure weights",
                expected: m.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        m.weights = weights;
        Ok(m)
    }

    pub fn dirac(point: &[f64]) -> Self {
        assert!(!point.is_empty(), "dirac needs a point");
        EmpiricalMeasure {
            dim: point.len(),
            points: point.to_vec(),
            weights: vec![1.0],
        }
    }

    /// Uniform measure whose atoms are sorted lexicographically, so the result
    /// (and every sum over it) does not depend on the order of `points`.
    pub fn uniform_canonical(dim: usize, points: &[f64]) -> Result<Self> {
        let mut rows: Vec<&[f64]> = points.chunks_exact(dim.max(1)).collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        Self::uniform(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&v| v == w)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (p, w) in self.atoms() {
            for (mi, pi) in m.iter_mut().zip(p) {
                *mi += w * pi;
            }
        }
        m
    }

    /// Population standard deviation `sqrt(E‖X − EX‖²)`.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        self.atoms()
            .map(|(p, w)| w * crate::vecops::dist_sq(p, &m))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// `λ·self + (1 − λ)·other`, as a measure on the union of atoms.
    pub fn mixture(&self, other: &EmpiricalMeasure, lambda: f64) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::Shape {
                what: "mixture dimension",
                expected: self.dim,
                got: other.dim,
            });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("mixture weight {lambda} not in [0,1]")));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let weights: Vec<f64> = self
            .weights
            .iter()
            .map(|w| lambda * w)
            .chain(other.weights.iter().map(|w| (1.0 - lambda) * w))
            .collect();
        Ok(EmpiricalMeasure {
            dim: self.dim,
            points,
            weights,
        })
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(EmpiricalMeasure::uniform(1, vec![]).is_err());
        assert!(EmpiricalMeasure::uniform(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(EmpiricalMeasure::weighted(1, vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(EmpiricalMeasure::weighted(1, vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
        let m = EmpiricalMeasure::weighted(1, vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(m.mean(), vec![0.75]);
    }

    #[test]
    fn std_of_symmetric_pair() {
        let m = EmpiricalMeasure::from_points(&[vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(m.std(), 1.0);
    }

    #[test]
    fn canonical_order_is_permutation_invariant() {
        let a = EmpiricalMeasure::uniform_canonical(2, &[3.0, 1.0, -1.0, 2.0, 3.0, 0.0]).unwrap();
        let b = EmpiricalMeasure::uniform_canonical(2, &[-1.0, 2.0, 3.0, 0.0, 3.0, 1.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.atom(0), &[-1.0, 2.0]);
    }
}
