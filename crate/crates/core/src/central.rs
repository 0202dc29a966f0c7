//! Centralized continuous-time flows and their forward-Euler discretization.
//!
//! Three descent fields over the aggregate cost `f = Σ f^i`:
//!
//! - GD:   `u = -Σ g^i(x)`
//! - NR:   `u = -(Σ H^i(x))⁻¹ Σ g^i(x)`
//! - HISO: `u = -((1/N) Σ H^i(x)⁻¹) Σ g^i(x)`
//!
//! Every run integrates `x(k+1) = x(k) + δ α u(x(k))`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cost::CostEnsemble;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, sym_spectral_norm};

/// Default stopping gap `f(x) - f(x*)`.
pub const DEFAULT_STOP_GAP: f64 = 1e-8;
/// Default horizon in time units.
pub const DEFAULT_HORIZON: f64 = 50.0;
/// A run aborts once its gap exceeds this multiple of the initial gap.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    Gd,
    Nr,
    Hiso,
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowKind::Gd => "GD",
            FlowKind::Nr => "NR",
            FlowKind::Hiso => "HISO",
        })
    }
}

/// A descent field scaled by a positive gain `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowField {
    kind: FlowKind,
    gain: f64,
}

impl FlowField {
    pub fn new(kind: FlowKind, gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("gain must be positive, got {gain}")));
        }
        Ok(FlowField { kind, gain })
    }

    pub fn unit(kind: FlowKind) -> Self {
        FlowField { kind, gain: 1.0 }
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `α u(x)`.
    pub fn evaluate(&self, costs: &CostEnsemble, x: &DVector<f64>) -> Result<DVector<f64>> {
        let u = match self.kind {
            FlowKind::Gd => gd_field(costs, x),
            FlowKind::Nr => nr_field(costs, x)?,
            FlowKind::Hiso => hiso_field(costs, x)?,
        };
        Ok(u * self.gain)
    }
}

pub fn gd_field(costs: &CostEnsemble, x: &DVector<f64>) -> DVector<f64> {
    -costs.gradient_sum(x)
}

/// Newton-Raphson direction by a Cholesky solve of the aggregate Hessian.
pub fn nr_field(costs: &CostEnsemble, x: &DVector<f64>) -> Result<DVector<f64>> {
    let g = costs.gradient_sum(x);
    let chol = cholesky(&costs.hessian_sum(x)).ok_or(Error::AggregateNotPositiveDefinite)?;
    Ok(-chol.solve(&g))
}

/// HISO direction: one local Cholesky solve per agent against the gradient sum.
pub fn hiso_field(costs: &CostEnsemble, x: &DVector<f64>) -> Result<DVector<f64>> {
    let g = costs.gradient_sum(x);
    let mut acc = DVector::zeros(costs.dim());
    for (i, agent) in costs.agents().enumerate() {
        let chol = cholesky(&agent.hessian(x)).ok_or(Error::NotPositiveDefinite { agent: i })?;
        acc += chol.solve(&g);
    }
    Ok(acc / -(costs.len() as f64))
}

/// `(1/N) Σ H^i(x)⁻¹`.
pub fn mean_hessian_inverse(costs: &CostEnsemble, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d = costs.dim();
    let mut acc = DMatrix::zeros(d, d);
    for (i, agent) in costs.agents().enumerate() {
        acc += spd_inverse(&agent.hessian(x)).ok_or(Error::NotPositiveDefinite { agent: i })?;
    }
    Ok(acc / costs.len() as f64)
}

/// Gains that bring GD and NR to HISO's control-effort level at `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffortGains {
    /// `‖(1/N) Σ H^i(x0)⁻¹‖₂`
    pub gd: f64,
    /// `‖Σ H^i(x0)‖₂ · ‖(1/N) Σ H^i(x0)⁻¹‖₂`
    pub nr: f64,
}

impl EffortGains {
    pub fn for_kind(&self, kind: FlowKind) -> f64 {
        match kind {
            FlowKind::Gd => self.gd,
            FlowKind::Nr => self.nr,
            FlowKind::Hiso => 1.0,
        }
    }
}

/// Effort normalization with respect to HISO (whose gain stays 1).
///
/// With these gains the spectral-norm effort bounds `‖αu‖ ≤ c‖Σg‖` of GD and
/// HISO coincide, and the NR effort is bounded below by the same constant.
pub fn normalize_effort(costs: &CostEnsemble, x0: &DVector<f64>) -> Result<EffortGains> {
    let hinv = sym_spectral_norm(&mean_hessian_inverse(costs, x0)?);
    let hsum = sym_spectral_norm(&costs.hessian_sum(x0));
    Ok(EffortGains {
        gd: hinv,
        nr: hsum * hinv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerOptions {
    pub step: f64,
    pub horizon: f64,
    pub stop_gap: f64,
}

impl EulerOptions {
    pub fn new(step: f64) -> Self {
        EulerOptions {
            step,
            horizon: DEFAULT_HORIZON,
            stop_gap: DEFAULT_STOP_GAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub x: DVector<f64>,
    /// `f(x) - f(x*)`.
    pub f_gap: f64,
    /// `‖α u(x)‖`.
    pub field_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub field: FlowField,
    pub step: f64,
    /// Sample `k` is the state after `k` Euler steps.
    pub samples: Vec<FlowSample>,
}

impl FlowTrace {
    /// Steps needed for the gap to first reach `gap`, if it ever did.
    pub fn iterations_to(&self, gap: f64) -> Option<usize> {
        self.samples.iter().position(|s| s.f_gap <= gap)
    }

    pub fn final_sample(&self) -> &FlowSample {
        self.samples.last().expect("trace holds at least the initial sample")
    }

    /// Largest control effort along the run.
    pub fn max_field_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.field_norm).fold(0.0, f64::max)
    }
}

/// Forward-Euler integration of `field` from `x0`.
///
/// `f_star` is the reference optimal value used for the gap. Stops at
/// `gap ≤ stop_gap` or `t ≥ horizon`; errors with [`Error::Diverged`] if
/// the gap exceeds [`DIVERGENCE_FACTOR`] times its initial value.
pub fn euler_run(
    field: FlowField,
    costs: &CostEnsemble,
    x0: &DVector<f64>,
    f_star: f64,
    opts: EulerOptions,
) -> Result<FlowTrace> {
    opts.validate()?;
    if x0.len() != costs.dim() {
        return Err(Error::DimensionMismatch {
            expected: costs.dim(),
            got: x0.len(),
        });
    }
    let max_steps = (opts.horizon / opts.step).ceil() as usize;
    let mut x = x0.clone();
    let gap0 = costs.value(&x) - f_star;
    let limit = DIVERGENCE_FACTOR * gap0.abs();
    let mut u = field.evaluate(costs, &x)?;
    let mut samples = vec![FlowSample {
        t: 0.0,
        x: x.clone(),
        f_gap: gap0,
        field_norm: u.norm(),
    }];
    let mut gap = gap0;
    let mut k = 0;
    while gap > opts.stop_gap && k < max_steps {
        x.axpy(opts.step, &u, 1.0);
        k += 1;
        let t = k as f64 * opts.step;
        gap = costs.value(&x) - f_star;
        if !gap.is_finite() || gap > limit || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { t, gap, limit });
        }
        u = field.evaluate(costs, &x)?;
        samples.push(FlowSample {
            t,
            x: x.clone(),
            f_gap: gap,
            field_norm: u.norm(),
        });
    }
    Ok(FlowTrace {
        field,
        step: opts.step,
        samples,
    })
}

/// `n` points spaced geometrically from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect()
}

/// Stepsize grid used when none is given: 41 points, eight per decade, over `[1e-4, 1e1]`.
pub fn default_step_grid() -> Vec<f64> {
    geometric_grid(1e-4, 1e1, 41)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub step: f64,
    pub iterations: usize,
    /// Every grid point with its iteration count; `None` marks divergence or
    /// failure to reach the target within the horizon.
    pub scores: Vec<(f64, Option<usize>)>,
}

/// Picks the grid stepsize that reaches `target_gap` in the fewest Euler
/// steps. Ties go to the smaller stepsize.
pub fn grid_search_stepsize(
    field: FlowField,
    costs: &CostEnsemble,
    x0: &DVector<f64>,
    f_star: f64,
    grid: &[f64],
    target_gap: f64,
    horizon: f64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("stepsize grid is empty".into()));
    }
    let scores = grid
        .par_iter()
        .map(|&step| {
            let opts = EulerOptions {
                step,
                horizon,
                stop_gap: target_gap,
            };
            match euler_run(field, costs, x0, f_star, opts) {
                Ok(trace) => Ok((step, trace.iterations_to(target_gap))),
                Err(Error::Diverged { .. }) => Ok((step, None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .filter_map(|&(s, it)| it.map(|it| (s, it)))
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .ok_or(Error::NoAdmissibleStepsize)?;
    Ok(GridSearchResult {
        step: best.0,
        iterations: best.1,
        scores,
    })
}

/// Damped Newton method with Armijo backtracking on `f`, used as the
/// reference minimizer. Stops when `‖Σ g(x)‖ ≤ tol`.
pub fn newton_oracle(costs: &CostEnsemble, x0: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    const MAX_ITERS: usize = 200;
    let mut x = x0.clone();
    for _ in 0..MAX_ITERS {
        let g = costs.gradient_sum(&x);
        if g.norm() <= tol {
            return Ok(x);
        }
        let chol = cholesky(&costs.hessian_sum(&x)).ok_or(Error::AggregateNotPositiveDefinite)?;
        let dir = -chol.solve(&g);
        let decrement = -g.dot(&dir);
        let fx = costs.value(&x);
        let mut t = 1.0;
        // Inside the quadratic region the Armijo test drowns in roundoff of f.
        if decrement > 1e-12 * (1.0 + fx.abs()) {
            while t > 1e-12 && costs.value(&(&x + &dir * t)) > fx - 1e-4 * t * decrement {
                t *= 0.5;
            }
        }
        x.axpy(t, &dir, 1.0);
    }
    let grad_norm = costs.gradient_sum(&x).norm();
    if grad_norm <= tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            iterations: MAX_ITERS,
            grad_norm,
        })
    }
}
