//! Sampling regions for pointwise sign, rank and convergence checks.

use serde::{Deserialize, Serialize};

use crate::poly::Polynomial;
use crate::scalar::Scalar;

/// Axis-aligned box, optionally cut down by polynomial constraints
/// `c(x) >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SampleRegion<T: Scalar> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    #[serde(default)]
    pub constraints: Vec<Polynomial<T>>,
}

impl<T: Scalar> SampleRegion<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds must have equal length");
        SampleRegion {
            lower,
            upper,
            constraints: Vec::new(),
        }
    }

    /// The cube `[-r, r]^dim`.
    pub fn cube(dim: usize, r: T) -> Self {
        Self::new(vec![-r; dim], vec![r; dim])
    }

    pub fn with_constraint(mut self, c: Polynomial<T>) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[T]) -> bool {
        // Constraint values within this slack of zero count as satisfied so
        // that grid points on a curved boundary are not lost to rounding.
        let slack = T::lit(1e-12);
        self.constraints.iter().all(|c| {
            c.eval_real(p)
                .map(|v| v.re >= -slack)
                .unwrap_or(false)
        })
    }

    /// Uniform tensor grid with `per_axis` points per coordinate (endpoints
    /// included), filtered by the constraints. Points are produced in
    /// lexicographic order of their grid indices.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<T>> {
        let d = self.dim();
        if d == 0 || per_axis == 0 {
            return Vec::new();
        }
        let axis = |k: usize, j: usize| -> T {
            if per_axis == 1 {
                (self.lower[k] + self.upper[k]) * T::lit(0.5)
            } else {
                let t = T::lit(j as f64) / T::lit((per_axis - 1) as f64);
                self.lower[k] + (self.upper[k] - self.lower[k]) * t
            }
        };
        let total = per_axis.pow(d as u32);
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let p: Vec<T> = (0..d).map(|k| axis(k, idx[k])).collect();
            if self.contains(&p) {
                out.push(p);
            }
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_and_constraints() {
        let r = SampleRegion::<f64>::new(vec![0.0, -1.0], vec![1.0, 1.0]);
        assert_eq!(r.grid(3).len(), 9);
        // keep x2 <= x1
        let c = &Polynomial::var(2, 0) - &Polynomial::var(2, 1);
        let r = r.with_constraint(c);
        let pts = r.grid(3);
        assert!(pts.iter().all(|p| p[1] <= p[0] + 1e-12));
        assert_eq!(pts.len(), 7);
    }
}
