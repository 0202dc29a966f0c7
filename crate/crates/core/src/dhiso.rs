//! Distributed HISO protocol.
//!
//! Agent `i` holds a decision `x^i` and an integral consensus state `v^i`,
//! and forms `z^i = g^i(x^i) + v^i`. With neighbour sets from the graph:
//!
//! ```text
//! v̇^i = -Σ_j a_ij sgn(z^i - z^j) + Σ_j a_ij (x^i - x^j)
//! ẋ^i = -H^i(x^i)⁻¹ (z^i + Σ_j a_ij (x^i - x^j))
//! ```
//!
//! `z` is never integrated; it is recomputed from `x` and `v` each step so
//! `Σ z^i = Σ g^i(x^i)` holds whenever `Σ v^i = 0`. The Hessian is applied
//! through a local Cholesky solve and never leaves the agent: per step each
//! agent sends `x^i` and `z^i` (2d floats) to each neighbour.

use std::fmt;

use nalgebra::DVector;

use crate::cost::CostEnsemble;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphMatrices};
use crate::linalg::cholesky;

/// Componentwise sign.
///
/// `epsilon = 0` is the exact sign with `sgn(0) = 0`; `epsilon > 0` is the
/// boundary-layer surrogate `u_k / max(|u_k|, epsilon)`.
pub fn sgn(u: &DVector<f64>, epsilon: f64) -> DVector<f64> {
    u.map(|c| sgn_scalar(c, epsilon))
}

fn sgn_scalar(c: f64, epsilon: f64) -> f64 {
    if epsilon > 0.0 {
        c / c.abs().max(epsilon)
    } else if c > 0.0 {
        1.0
    } else if c < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Stacked per-agent state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub t: f64,
}

impl NetworkState {
    /// Start from decisions `x0` with `v(0) = 0`.
    pub fn new(x0: Vec<DVector<f64>>) -> Result<Self> {
        let v = x0.iter().map(|xi| DVector::zeros(xi.len())).collect();
        Self::with_v(x0, v)
    }

    /// Arbitrary `v(0)`. The protocol only tracks the average gradient when
    /// `Σ v(0) = 0`, which is the caller's responsibility.
    pub fn with_v(x: Vec<DVector<f64>>, v: Vec<DVector<f64>>) -> Result<Self> {
        let d = x
            .first()
            .map(|xi| xi.len())
            .ok_or_else(|| Error::InvalidArgument("network state needs at least one agent".into()))?;
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: v.len(),
            });
        }
        for vec in x.iter().chain(&v) {
            if vec.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: vec.len(),
                });
            }
        }
        Ok(NetworkState { x, v, t: 0.0 })
    }

    pub fn n_agents(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Local gradients `g^i(x^i)`.
    pub fn gradients(&self, costs: &CostEnsemble) -> Vec<DVector<f64>> {
        self.x
            .iter()
            .enumerate()
            .map(|(i, xi)| costs.agent(i).gradient(xi))
            .collect()
    }

    /// `z^i = g^i(x^i) + v^i`.
    pub fn z(&self, costs: &CostEnsemble) -> Vec<DVector<f64>> {
        self.gradients(costs)
            .into_iter()
            .zip(&self.v)
            .map(|(g, v)| g + v)
            .collect()
    }

    /// Agent average `x̄`.
    pub fn mean_x(&self) -> DVector<f64> {
        mean(&self.x)
    }
}

fn sum(values: &[DVector<f64>]) -> DVector<f64> {
    let mut s = DVector::zeros(values[0].len());
    for v in values {
        s += v;
    }
    s
}

fn mean(values: &[DVector<f64>]) -> DVector<f64> {
    sum(values) / values.len() as f64
}

/// `(Π_N ⊗ I_d) y`: each agent's deviation from the network average.
pub fn disagreement(values: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = mean(values);
    values.iter().map(|v| v - &m).collect()
}

/// `(Bᵀ ⊗ I_d) y`: one difference `y^i - y^j` per edge `(i, j)`, `i < j`.
pub fn edge_differences(g: &Graph, values: &[DVector<f64>]) -> Vec<DVector<f64>> {
    g.edges().iter().map(|&(i, j)| &values[i] - &values[j]).collect()
}

fn stacked_norm(values: &[DVector<f64>]) -> f64 {
    values.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

/// Agreement and conservation measures of a network state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusDiagnostics {
    /// `‖Π x‖₂`
    pub cons_x: f64,
    /// `‖Π z‖₂`
    pub cons_z: f64,
    /// `‖Σ z^i‖₂`
    pub sum_z: f64,
    /// `‖Σ v^i‖₂`
    pub sum_v: f64,
    /// `‖Σ g^i(x^i)‖₂`, computed without going through `z`.
    pub grad_sum: f64,
    /// `‖Σ z^i - Σ g^i(x^i)‖₂`.
    pub sum_residual: f64,
    /// Roundoff scale for `sum_residual`: `Σ ‖g^i‖ + Σ ‖v^i‖`.
    pub sum_scale: f64,
}

pub fn diagnostics(state: &NetworkState, costs: &CostEnsemble) -> ConsensusDiagnostics {
    let grads = state.gradients(costs);
    let z: Vec<_> = grads.iter().zip(&state.v).map(|(g, v)| g + v).collect();
    let sum_z = sum(&z);
    let sum_g = sum(&grads);
    ConsensusDiagnostics {
        cons_x: stacked_norm(&disagreement(&state.x)),
        cons_z: stacked_norm(&disagreement(&z)),
        sum_z: sum_z.norm(),
        sum_v: sum(&state.v).norm(),
        grad_sum: sum_g.norm(),
        sum_residual: (sum_z - sum_g).norm(),
        sum_scale: grads.iter().map(|g| g.norm()).sum::<f64>() + state.v.iter().map(|v| v.norm()).sum::<f64>(),
    }
}

/// How each agent turns `z^i + Σ a_ij (x^i - x^j)` into a decision velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Local Newton-like step through `H^i(x^i)⁻¹`.
    Dhiso,
    /// Hessians replaced by the identity.
    Dgd2,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Dhiso => "DHISO",
            Algorithm::Dgd2 => "DGD2",
        })
    }
}

/// Time derivatives of `(v, x)` for every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub dv: Vec<DVector<f64>>,
    pub dx: Vec<DVector<f64>>,
}

/// One agent's update from its own `(x, z, H)` and its neighbours' `(x, z)`.
fn agent_rhs(
    algorithm: Algorithm,
    agent: usize,
    costs: &CostEnsemble,
    x: &[DVector<f64>],
    z: &[DVector<f64>],
    neighbors: &[usize],
    epsilon: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let d = x[agent].len();
    let mut lap_x = DVector::zeros(d);
    let mut sign_sum = DVector::zeros(d);
    for &j in neighbors {
        lap_x += &x[agent] - &x[j];
        sign_sum += sgn(&(&z[agent] - &z[j]), epsilon);
    }
    let dv = &lap_x - sign_sum;
    let drive = &z[agent] + lap_x;
    let dx = match algorithm {
        Algorithm::Dhiso => {
            let chol = cholesky(&costs.agent(agent).hessian(&x[agent])).ok_or(Error::NotPositiveDefinite { agent })?;
            -chol.solve(&drive)
        }
        Algorithm::Dgd2 => -drive,
    };
    Ok((dv, dx))
}

fn network_rhs(
    algorithm: Algorithm,
    state: &NetworkState,
    g: &Graph,
    costs: &CostEnsemble,
    epsilon: f64,
) -> Result<Rhs> {
    check_shapes(state, g, costs)?;
    let z = state.z(costs);
    let (dv, dx) = (0..state.n_agents())
        .map(|i| agent_rhs(algorithm, i, costs, &state.x, &z, g.neighbors(i), epsilon))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(Rhs { dv, dx })
}

/// DHISO right-hand side at `state`.
pub fn dhiso_rhs(state: &NetworkState, g: &Graph, costs: &CostEnsemble, epsilon: f64) -> Result<Rhs> {
    network_rhs(Algorithm::Dhiso, state, g, costs, epsilon)
}

/// DGD2 right-hand side: DHISO with `H^i ≡ I`.
pub fn dgd2_rhs(state: &NetworkState, g: &Graph, costs: &CostEnsemble, epsilon: f64) -> Result<Rhs> {
    network_rhs(Algorithm::Dgd2, state, g, costs, epsilon)
}

fn check_shapes(state: &NetworkState, g: &Graph, costs: &CostEnsemble) -> Result<()> {
    if state.n_agents() != g.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: g.n_nodes(),
            got: state.n_agents(),
        });
    }
    if costs.len() != g.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: g.n_nodes(),
            got: costs.len(),
        });
    }
    if state.dim() != costs.dim() {
        return Err(Error::DimensionMismatch {
            expected: costs.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

/// One synchronous forward-Euler step of `algorithm`; returns the
/// derivatives evaluated at the pre-step state.
pub fn euler_step(
    algorithm: Algorithm,
    g: &Graph,
    costs: &CostEnsemble,
    state: &mut NetworkState,
    step: f64,
    epsilon: f64,
) -> Result<Rhs> {
    let rhs = network_rhs(algorithm, state, g, costs, epsilon)?;
    for (xi, dxi) in state.x.iter_mut().zip(&rhs.dx) {
        xi.axpy(step, dxi, 1.0);
    }
    for (vi, dvi) in state.v.iter_mut().zip(&rhs.dv) {
        vi.axpy(step, dvi, 1.0);
    }
    state.t += step;
    Ok(rhs)
}

/// Predicted z-consensus time `2 √λ̄ ‖Π z(0)‖₂`.
pub fn finite_time_bound(matrices: &GraphMatrices, z0: &[DVector<f64>]) -> f64 {
    let spread = stacked_norm(&disagreement(z0));
    if spread == 0.0 {
        return 0.0;
    }
    2.0 * matrices.lambda_bar.sqrt() * spread
}

/// Width of the band the exact-sign Euler scheme chatters in around
/// z-agreement: `δ · max degree · √(N d)`.
pub fn chattering_band(g: &Graph, d: usize, step: f64) -> f64 {
    step * g.max_degree() as f64 * ((g.n_nodes() * d) as f64).sqrt()
}

/// Upper envelope for `‖Σ z(t)‖` under Euler steps of size `step`:
/// `‖Σ z(0)‖ (1-δ)^{t/δ} (1+10δ)`.
pub fn sum_z_envelope(sum_z0: f64, t: f64, step: f64) -> f64 {
    sum_z0 * (1.0 - step).powf(t / step) * (1.0 + 10.0 * step)
}

/// Floats agent `i` transmits per step: `x^i` and `z^i` to each neighbour.
pub fn message_floats_per_step(g: &Graph, d: usize) -> Vec<usize> {
    g.degrees().into_iter().map(|deg| 2 * d * deg).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistOptions {
    pub step: f64,
    pub horizon: f64,
    /// Boundary-layer width of the sign function; 0 is the exact sign.
    pub epsilon: f64,
}

impl DistOptions {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "distributed step must lie in (0, 1), got {}",
                self.step
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistSample {
    pub t: f64,
    /// `f(x̄) - f(x*)` at the agent average.
    pub f_gap: f64,
    /// `max_i ‖x^i - x*‖`.
    pub max_opt_err: f64,
    pub diag: ConsensusDiagnostics,
    /// `max_i ‖ẋ^i‖` at this state.
    pub max_field_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistTrace {
    pub algorithm: Algorithm,
    pub step: f64,
    pub samples: Vec<DistSample>,
    pub initial_state: NetworkState,
    pub final_state: NetworkState,
}

impl DistTrace {
    /// First simulated time at which the average-point gap is at most `gap`.
    pub fn time_to_gap(&self, gap: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.f_gap <= gap).map(|s| s.t)
    }

    pub fn final_sample(&self) -> &DistSample {
        self.samples.last().expect("trace holds at least the initial sample")
    }

    /// Earliest time after which `cons_z` stays at or below `band`.
    pub fn z_consensus_time(&self, band: f64) -> Option<f64> {
        let last_out = self.samples.iter().rposition(|s| s.diag.cons_z > band);
        match last_out {
            None => Some(self.samples[0].t),
            Some(k) if k + 1 < self.samples.len() => Some(self.samples[k + 1].t),
            Some(_) => None,
        }
    }
}

/// Euler simulation of `algorithm` from `x0` with `v(0) = 0`.
pub fn simulate(
    algorithm: Algorithm,
    g: &Graph,
    costs: &CostEnsemble,
    initial: NetworkState,
    opts: DistOptions,
    x_star: &DVector<f64>,
) -> Result<DistTrace> {
    opts.validate()?;
    check_shapes(&initial, g, costs)?;
    if x_star.len() != costs.dim() {
        return Err(Error::DimensionMismatch {
            expected: costs.dim(),
            got: x_star.len(),
        });
    }
    let f_star = costs.value(x_star);
    let max_steps = (opts.horizon / opts.step).ceil() as usize;

    let mut state = initial.clone();
    let mut rhs = network_rhs(algorithm, &state, g, costs, opts.epsilon)?;
    let first = sample(&state, costs, &rhs, x_star, f_star);
    let limit = crate::central::DIVERGENCE_FACTOR * first.f_gap.abs().max(1e-6 * (1.0 + f_star.abs()));
    let mut samples = Vec::with_capacity(max_steps + 1);
    samples.push(first);

    for k in 1..=max_steps {
        for (xi, dxi) in state.x.iter_mut().zip(&rhs.dx) {
            xi.axpy(opts.step, dxi, 1.0);
        }
        for (vi, dvi) in state.v.iter_mut().zip(&rhs.dv) {
            vi.axpy(opts.step, dvi, 1.0);
        }
        state.t = k as f64 * opts.step;
        let gap = costs.value(&state.mean_x()) - f_star;
        if !gap.is_finite() || gap > limit {
            return Err(Error::Diverged { t: state.t, gap, limit });
        }
        rhs = network_rhs(algorithm, &state, g, costs, opts.epsilon)?;
        samples.push(sample(&state, costs, &rhs, x_star, f_star));
    }
    Ok(DistTrace {
        algorithm,
        step: opts.step,
        samples,
        initial_state: initial,
        final_state: state,
    })
}

fn sample(state: &NetworkState, costs: &CostEnsemble, rhs: &Rhs, x_star: &DVector<f64>, f_star: f64) -> DistSample {
    DistSample {
        t: state.t,
        f_gap: costs.value(&state.mean_x()) - f_star,
        max_opt_err: state.x.iter().map(|xi| (xi - x_star).norm()).fold(0.0, f64::max),
        diag: diagnostics(state, costs),
        max_field_norm: rhs.dx.iter().map(|d| d.norm()).fold(0.0, f64::max),
    }
}

pub fn dhiso_run(
    g: &Graph,
    costs: &CostEnsemble,
    x0: Vec<DVector<f64>>,
    opts: DistOptions,
    x_star: &DVector<f64>,
) -> Result<DistTrace> {
    simulate(Algorithm::Dhiso, g, costs, NetworkState::new(x0)?, opts, x_star)
}

pub fn dgd2_run(
    g: &Graph,
    costs: &CostEnsemble,
    x0: Vec<DVector<f64>>,
    opts: DistOptions,
    x_star: &DVector<f64>,
) -> Result<DistTrace> {
    simulate(Algorithm::Dgd2, g, costs, NetworkState::new(x0)?, opts, x_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::QuadraticCost;
    use crate::graph::stack;
    use nalgebra::DMatrix;

    fn s(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    fn k2() -> Graph {
        Graph::new(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn sign_conventions() {
        assert_eq!(sgn(&DVector::zeros(3), 0.0), DVector::zeros(3));
        assert_eq!(
            sgn(&DVector::from_vec(vec![-3.2, 0.1]), 0.0),
            DVector::from_vec(vec![-1.0, 1.0])
        );
        assert_eq!(sgn(&s(0.25), 0.5)[0], 0.5);
        assert_eq!(sgn(&s(-2.0), 0.5)[0], -1.0);
    }

    #[test]
    fn k2_rhs_arithmetic() {
        let costs = QuadraticCost::scalar_ensemble(&[0.0, 2.0]);
        let state = NetworkState::new(vec![s(0.0), s(0.0)]).unwrap();
        let z = state.z(&costs);
        assert_eq!((z[0][0], z[1][0]), (0.0, -2.0));
        let rhs = dhiso_rhs(&state, &k2(), &costs, 0.0).unwrap();
        assert_eq!((rhs.dv[0][0], rhs.dv[1][0]), (-1.0, 1.0));
        assert_eq!((rhs.dx[0][0], rhs.dx[1][0]), (0.0, 2.0));
    }

    #[test]
    fn symmetric_state_reduces_to_local_newton() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = DVector::from_vec(vec![1.0, -1.0]);
        let cost = QuadraticCost::new(c, h.clone()).unwrap();
        let costs = CostEnsemble::from_costs(vec![cost; 5]).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.7]);
        let state = NetworkState::new(vec![x.clone(); 5]).unwrap();
        let rhs = dhiso_rhs(&state, &Graph::fig1(), &costs, 0.0).unwrap();
        let z = state.z(&costs);
        let expected = -h.clone().cholesky().unwrap().solve(&z[0]);
        for i in 0..5 {
            assert_eq!(rhs.dv[i], DVector::zeros(2));
            assert!((&rhs.dx[i] - &expected).amax() < 1e-15);
        }
    }

    #[test]
    fn dv_sums_to_zero() {
        let costs = QuadraticCost::scalar_ensemble(&[0.0, 1.0, 4.0, -2.0, 3.0]);
        let state = NetworkState::new(vec![s(0.1), s(-0.4), s(2.0), s(0.0), s(1.3)]).unwrap();
        let rhs = dhiso_rhs(&state, &Graph::fig1(), &costs, 0.0).unwrap();
        let total: f64 = rhs.dv.iter().map(|v| v[0]).sum();
        assert!(total.abs() < 1e-14);
    }

    #[test]
    fn disagreement_matches_stacked_projection() {
        let g = Graph::fig1();
        let vals: Vec<_> = (0..5)
            .map(|i| DVector::from_vec(vec![i as f64, (i * i) as f64 * 0.5]))
            .collect();
        let flat = DVector::from_iterator(10, vals.iter().flat_map(|v| v.iter().copied()));
        let proj = stack(&g.matrices().projection, 2) * flat;
        let ours: Vec<f64> = disagreement(&vals).iter().flat_map(|v| v.iter().copied()).collect();
        for (a, b) in proj.iter().zip(&ours) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_differences_match_incidence() {
        let g = Graph::fig1();
        let vals: Vec<_> = (0..5).map(|i| s(i as f64 * 1.5 - 2.0)).collect();
        let flat = DVector::from_iterator(5, vals.iter().map(|v| v[0]));
        let expected = g.incidence().transpose() * flat;
        let ours = edge_differences(&g, &vals);
        for (k, d) in ours.iter().enumerate() {
            assert_eq!(d[0], expected[k]);
        }
    }

    #[test]
    fn finite_time_bound_examples() {
        let m = k2().matrices();
        assert_eq!(finite_time_bound(&m, &[s(2.0), s(2.0)]), 0.0);
        let t = finite_time_bound(&m, &[s(1.0), s(-1.0)]);
        assert!((t - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_at_consensus() {
        let costs = QuadraticCost::scalar_ensemble(&[1.0, 1.0, 1.0]);
        let state = NetworkState::new(vec![s(0.5); 3]).unwrap();
        let d = diagnostics(&state, &costs);
        assert_eq!(d.cons_x, 0.0);
        assert_eq!(d.cons_z, 0.0);
        assert_eq!(d.sum_z, d.grad_sum);
        assert_eq!(d.sum_v, 0.0);
    }

    #[test]
    fn k2_quadratic_converges_to_mean() {
        let costs = QuadraticCost::scalar_ensemble(&[0.0, 2.0]);
        let opts = DistOptions {
            step: 1e-3,
            horizon: 20.0,
            epsilon: 0.0,
        };
        for algorithm in [Algorithm::Dhiso, Algorithm::Dgd2] {
            let init = NetworkState::new(vec![s(-1.0), s(3.0)]).unwrap();
            let trace = simulate(algorithm, &k2(), &costs, init, opts, &s(1.0)).unwrap();
            let last = &trace.final_state;
            for xi in &last.x {
                assert!((xi[0] - 1.0).abs() < 1e-6, "{algorithm}: {}", xi[0]);
            }
        }
    }

    #[test]
    fn equilibrium_start_stays_near_optimum() {
        // x^i = x*, v^i = -g^i(x*) makes every z^i zero: an equilibrium.
        let costs = QuadraticCost::scalar_ensemble(&[0.0, 1.0, 4.0, -2.0, 2.0]);
        let x_star = s(1.0);
        let x0 = vec![x_star.clone(); 5];
        let v0 = (0..5).map(|i| -costs.agent(i).gradient(&x_star)).collect();
        let init = NetworkState::with_v(x0, v0).unwrap();
        let opts = DistOptions {
            step: 1e-3,
            horizon: 10.0,
            epsilon: 0.0,
        };
        let trace = simulate(Algorithm::Dhiso, &Graph::fig1(), &costs, init, opts, &x_star).unwrap();
        assert_eq!(trace.samples[0].diag.grad_sum, 0.0);
        let worst = trace.samples.iter().map(|s| s.max_opt_err).fold(0.0, f64::max);
        assert!(worst <= opts.step, "{worst}");
    }

    #[test]
    fn optimum_start_with_zero_v_still_reaches_consensus() {
        // v(0) = 0 leaves local gradients in disagreement, so agents leave x*
        // during the z-consensus phase and come back afterwards.
        let costs = QuadraticCost::scalar_ensemble(&[0.0, 1.0, 4.0, -2.0, 2.0]);
        let x_star = s(1.0);
        let opts = DistOptions {
            step: 1e-3,
            horizon: 30.0,
            epsilon: 0.0,
        };
        let trace = dhiso_run(&Graph::fig1(), &costs, vec![x_star.clone(); 5], opts, &x_star).unwrap();
        assert_eq!(trace.samples[0].diag.grad_sum, 0.0);
        assert!(trace.final_sample().max_opt_err < 1e-3);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let costs = QuadraticCost::scalar_ensemble(&[0.0, 2.0, 1.0]);
        let state = NetworkState::new(vec![s(0.0), s(0.0)]).unwrap();
        assert!(dhiso_rhs(&state, &k2(), &costs, 0.0).is_err());
        assert!(NetworkState::with_v(vec![s(0.0)], vec![]).is_err());
    }

    #[test]
    fn bad_step_rejected() {
        let costs = QuadraticCost::scalar_ensemble(&[0.0, 2.0]);
        let opts = DistOptions {
            step: 0.0,
            horizon: 1.0,
            epsilon: 0.0,
        };
        assert!(dhiso_run(&k2(), &costs, vec![s(0.0), s(0.0)], opts, &s(1.0)).is_err());
    }

    #[test]
    fn message_size_is_linear_in_d() {
        assert_eq!(message_floats_per_step(&Graph::fig1(), 6), vec![48, 24, 36, 24, 36]);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn sums_conserved_from_zero_sum_v(seed in 0u64..10_000, n in 2usize..=10, d in 1usize..=3) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Graph::random_connected(n, 0.3, &mut rng);
            let costs = CostEnsemble::from_costs(
                (0..n)
                    .map(|_| {
                        let c = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
                        let h = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.random_range(0.2..5.0)));
                        QuadraticCost::new(c, h).unwrap()
                    })
                    .collect(),
            )
            .unwrap();
            let x: Vec<_> = (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0))).collect();
            let mut v: Vec<_> = (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0))).collect();
            let mean = v.iter().fold(DVector::zeros(d), |a, b| a + b) / n as f64;
            for vi in &mut v {
                *vi -= &mean;
            }
            let mut state = NetworkState::with_v(x, v).unwrap();
            for _ in 0..300 {
                euler_step(Algorithm::Dhiso, &g, &costs, &mut state, 1e-2, 0.0).unwrap();
                let diag = diagnostics(&state, &costs);
                let max_v = state.v.iter().map(|vi| vi.amax()).fold(0.0, f64::max);
                proptest::prop_assert!(diag.sum_v <= 1e-10 * (1.0 + n as f64 * max_v), "{}", diag.sum_v);
                proptest::prop_assert!(diag.sum_residual <= 1e-12 * diag.sum_scale.max(1.0));
            }
        }
    }
}
