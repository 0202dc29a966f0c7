//! Per-agent twice-differentiable convex cost oracles.

mod logistic;
mod quadratic;
mod quartic;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use logistic::{generate_logreg_data, generate_logreg_data_with, LogRegData, LogisticCost, Sample};
pub use quadratic::QuadraticCost;
pub use quartic::QuarticCost;

/// Declared Hessian eigenvalue bounds `lower·I ≼ H(x) ≼ upper·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Value, gradient and Hessian of one agent's local cost `f^i`.
pub trait AgentCost: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn hessian_bounds(&self) -> HessianBounds;
}

/// The agents' costs `f = Σ f^i`, all over the same dimension.
#[derive(Debug, Clone)]
pub struct CostEnsemble {
    agents: Vec<Arc<dyn AgentCost>>,
    dim: usize,
}

impl CostEnsemble {
    pub fn new(agents: Vec<Arc<dyn AgentCost>>) -> Result<Self> {
        let first = agents
            .first()
            .ok_or_else(|| Error::InvalidArgument("cost ensemble needs at least one agent".into()))?;
        let dim = first.dim();
        for a in &agents {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        Ok(CostEnsemble { agents, dim })
    }

    pub fn from_costs<C: AgentCost + 'static>(costs: Vec<C>) -> Result<Self> {
        Self::new(costs.into_iter().map(|c| Arc::new(c) as Arc<dyn AgentCost>).collect())
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn agent(&self, i: usize) -> &dyn AgentCost {
        self.agents[i].as_ref()
    }

    pub fn agents(&self) -> impl Iterator<Item = &dyn AgentCost> {
        self.agents.iter().map(|a| a.as_ref())
    }

    /// `f(x) = Σ f^i(x)`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.agents().map(|a| a.value(x)).sum()
    }

    /// `Σ g^i(x)`.
    pub fn gradient_sum(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for a in self.agents() {
            g += a.gradient(x);
        }
        g
    }

    /// `Σ H^i(x)`.
    pub fn hessian_sum(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for a in self.agents() {
            h += a.hessian(x);
        }
        h
    }

    pub fn hessians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.agents().map(|a| a.hessian(x)).collect()
    }

    /// `min_i` of the declared lower bounds. Zero for costs that are not
    /// uniformly strongly convex (the unregularized logistic bias).
    pub fn m_lower(&self) -> f64 {
        self.agents()
            .map(|a| a.hessian_bounds().lower)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn m_upper(&self) -> f64 {
        self.agents().map(|a| a.hessian_bounds().upper).fold(0.0, f64::max)
    }

    /// Replace every agent's Hessian by the identity, keeping values and gradients.
    pub fn with_identity_hessians(&self) -> CostEnsemble {
        CostEnsemble {
            agents: self
                .agents
                .iter()
                .map(|a| Arc::new(IdentityHessian(a.clone())) as Arc<dyn AgentCost>)
                .collect(),
            dim: self.dim,
        }
    }
}

/// Wraps a cost and reports `I` as its Hessian.
#[derive(Debug)]
struct IdentityHessian(Arc<dyn AgentCost>);

impl AgentCost for IdentityHessian {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.0.value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.gradient(x)
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }
    fn hessian_bounds(&self) -> HessianBounds {
        HessianBounds { lower: 1.0, upper: 1.0 }
    }
}

/// Finite-difference derivative check.
///
/// Gradient is compared against central differences of `value`, the Hessian
/// against central differences of `gradient`. Errors are
/// `‖fd - analytic‖ / max(‖analytic‖, 1)`, so they are relative for large
/// derivatives and absolute near stationary points.
pub fn fd_check(cost: &dyn AgentCost, x: &DVector<f64>, h: f64) -> (f64, f64) {
    assert!(h > 0.0, "finite-difference step must be positive");
    let d = cost.dim();
    let grad = cost.gradient(x);
    let hess = cost.hessian(x);
    let mut fd_grad = DVector::zeros(d);
    let mut fd_hess = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        fd_grad[k] = (cost.value(&xp) - cost.value(&xm)) / (2.0 * h);
        let col = (cost.gradient(&xp) - cost.gradient(&xm)) / (2.0 * h);
        fd_hess.set_column(k, &col);
    }
    let grad_err = (&fd_grad - &grad).norm() / grad.norm().max(1.0);
    let hess_err = (&fd_hess - &hess).norm() / hess.norm().max(1.0);
    (grad_err, hess_err)
}
