use nalgebra::{DMatrix, DVector};

use super::{AgentCost, CostEnsemble, HessianBounds};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eigenvalues};

/// `½ (x - c)ᵀ Q (x - c)` with symmetric positive definite `Q`.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    center: DVector<f64>,
    curvature: DMatrix<f64>,
    bounds: HessianBounds,
}

impl QuadraticCost {
    pub fn new(center: DVector<f64>, curvature: DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if curvature.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: curvature.nrows(),
            });
        }
        let sym = (&curvature + curvature.transpose()) * 0.5;
        if cholesky(&sym).is_none() {
            return Err(Error::InvalidArgument(
                "quadratic curvature must be positive definite".into(),
            ));
        }
        let eig = sym_eigenvalues(&sym);
        Ok(QuadraticCost {
            center,
            curvature: sym,
            bounds: HessianBounds {
                lower: eig[0],
                upper: eig[d - 1],
            },
        })
    }

    /// `½ ‖x - c‖²`.
    pub fn isotropic(center: DVector<f64>) -> Self {
        let d = center.len();
        QuadraticCost {
            center,
            curvature: DMatrix::identity(d, d),
            bounds: HessianBounds { lower: 1.0, upper: 1.0 },
        }
    }

    /// One scalar agent `½ (x - c_i)²` per center.
    pub fn scalar_ensemble(centers: &[f64]) -> CostEnsemble {
        CostEnsemble::from_costs(
            centers
                .iter()
                .map(|&c| Self::isotropic(DVector::from_vec(vec![c])))
                .collect(),
        )
        .expect("scalar quadratics share dimension 1")
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
}

impl AgentCost for QuadraticCost {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let r = x - &self.center;
        0.5 * r.dot(&(&self.curvature * &r))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.curvature * (x - &self.center)
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.curvature.clone()
    }

    fn hessian_bounds(&self) -> HessianBounds {
        self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_indefinite_curvature() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(QuadraticCost::new(DVector::zeros(2), q).is_err());
    }

    #[test]
    fn bounds_from_spectrum() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let c = QuadraticCost::new(DVector::zeros(2), q).unwrap();
        let b = c.hessian_bounds();
        assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 3.0).abs() < 1e-12);
    }
}
