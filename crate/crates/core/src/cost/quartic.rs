use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{AgentCost, CostEnsemble, HessianBounds};
use crate::error::{Error, Result};

/// Scalar `a x² + b x⁴`.
///
/// The Hessian `2a + 12 b x²` is unbounded on ℝ, so the upper bound is
/// declared over the box `|x| ≤ radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCost {
    pub a: f64,
    pub b: f64,
    pub radius: f64,
}

impl QuarticCost {
    pub fn new(a: f64, b: f64, radius: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quartic coefficient a = {a} must be positive for strong convexity"
            )));
        }
        if !(b >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quartic coefficient b = {b} must be non-negative"
            )));
        }
        if !(radius >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box radius {radius} must be non-negative"
            )));
        }
        Ok(QuarticCost { a, b, radius })
    }

    /// `n` agents with `a, b` drawn uniformly from `[lo, hi]`.
    ///
    /// With `lo = 0` an `a` may come out as exactly zero, which breaks strong
    /// convexity; such draws are rejected with an error.
    pub fn random_ensemble<R: Rng + ?Sized>(
        n: usize,
        lo: f64,
        hi: f64,
        radius: f64,
        rng: &mut R,
    ) -> Result<CostEnsemble> {
        if !(lo <= hi) || lo < 0.0 {
            return Err(Error::InvalidArgument(format!("bad coefficient range [{lo}, {hi}]")));
        }
        let mut costs = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.random_range(lo..=hi);
            let b = rng.random_range(lo..=hi);
            costs.push(Self::new(a, b, radius)?);
        }
        CostEnsemble::from_costs(costs)
    }
}

impl AgentCost for QuarticCost {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let x2 = x[0] * x[0];
        self.a * x2 + self.b * x2 * x2
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let x = x[0];
        DVector::from_element(1, 2.0 * self.a * x + 4.0 * self.b * x * x * x)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let x = x[0];
        DMatrix::from_element(1, 1, 2.0 * self.a + 12.0 * self.b * x * x)
    }

    fn hessian_bounds(&self) -> HessianBounds {
        HessianBounds {
            lower: 2.0 * self.a,
            upper: 2.0 * self.a + 12.0 * self.b * self.radius * self.radius,
        }
    }
}
