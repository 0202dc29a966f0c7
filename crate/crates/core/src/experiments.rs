//! Seeded reproductions of the centralized quartic comparison and the
//! distributed logistic-regression comparison, plus the randomized
//! matrix-inequality suites.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::central::{
    euler_run, geometric_grid, grid_search_stepsize, newton_oracle, normalize_effort, EulerOptions, FlowField,
    FlowKind, FlowTrace,
};
use crate::cost::{generate_logreg_data_with, CostEnsemble, LogRegData, QuadraticCost, QuarticCost};
use crate::dhiso::{self, DistOptions, DistTrace};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{spd_inverse, sym_eigenvalues};

/// Gap thresholds reported for every run.
pub const GAP_THRESHOLDS: [f64; 3] = [1e-2, 1e-4, 1e-6];

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Named(String),
    /// One-based edge list.
    Edges {
        n_nodes: usize,
        edges: Vec<(usize, usize)>,
    },
}

impl GraphSpec {
    pub fn resolve(&self) -> Result<Graph> {
        match self {
            GraphSpec::Named(name) => Graph::named(name),
            GraphSpec::Edges { n_nodes, edges } => Graph::from_one_based(*n_nodes, edges),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostSpec {
    /// `a x² + b x⁴` per agent with `a, b ~ U[coef_min, coef_max]`.
    Quartic {
        agents: usize,
        coef_min: f64,
        coef_max: f64,
        radius: f64,
    },
    Logistic {
        features: usize,
        samples: usize,
        lambda: f64,
        separation: f64,
        /// Load data from CSV instead of generating it.
        data: Option<PathBuf>,
    },
    /// `½ ‖x - c_i‖²`, one center per agent.
    Quadratic { centers: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Fixed(f64),
    Grid { min: f64, max: f64, points: usize },
}

impl StepPolicy {
    pub fn default_grid() -> Self {
        StepPolicy::Grid {
            min: 1e-4,
            max: 1e1,
            points: 41,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Central,
    Distributed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub mode: Mode,
    pub graph: GraphSpec,
    pub cost: CostSpec,
    pub step: StepPolicy,
    pub horizon: f64,
    /// Runs stop once `f - f*` drops to this.
    pub stop_gap: f64,
    /// Gap the stepsize search optimizes for.
    pub target_gap: f64,
    /// Sign boundary layer for distributed runs.
    pub epsilon: f64,
    /// Gain of the extra high-gain GD run in central mode.
    pub gd_alpha: f64,
    /// Central starting point; distributed runs draw `x^i(0) ~ N(0, I)`.
    pub x0: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Ten scalar quartic agents, grid-searched stepsizes.
    pub fn quartic_default() -> Self {
        ExperimentConfig {
            name: "quartic".into(),
            seed: 1,
            mode: Mode::Central,
            graph: GraphSpec::Named("complete10".into()),
            cost: CostSpec::Quartic {
                agents: 10,
                coef_min: 0.01,
                coef_max: 0.1,
                radius: 2.0,
            },
            step: StepPolicy::default_grid(),
            horizon: crate::central::DEFAULT_HORIZON,
            stop_gap: crate::central::DEFAULT_STOP_GAP,
            target_gap: 1e-6,
            epsilon: 0.0,
            gd_alpha: 5.0,
            x0: Some(vec![2.0]),
            out_dir: None,
        }
    }

    /// Five agents on the example network, logistic loss with p = 5,
    /// ten samples each, λ = 2.
    pub fn logreg_default() -> Self {
        ExperimentConfig {
            name: "logreg".into(),
            seed: 7,
            mode: Mode::Distributed,
            graph: GraphSpec::Named("fig1".into()),
            cost: CostSpec::Logistic {
                features: 5,
                samples: 10,
                lambda: 2.0,
                separation: 1.0,
                data: None,
            },
            step: StepPolicy::Fixed(1e-3),
            horizon: 60.0,
            stop_gap: 0.0,
            target_gap: 1e-2,
            epsilon: 0.0,
            gd_alpha: 5.0,
            x0: None,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.gd_alpha > 0.0) {
            return Err(Error::Config(format!(
                "gd_alpha must be positive, got {}",
                self.gd_alpha
            )));
        }
        match self.step {
            StepPolicy::Fixed(s) if !(s > 0.0) => {
                return Err(Error::Config(format!("step must be positive, got {s}")));
            }
            StepPolicy::Grid { min, max, points } if !(min > 0.0 && max >= min && points >= 1) => {
                return Err(Error::Config("grid needs 0 < min <= max and at least one point".into()));
            }
            _ => {}
        }
        if self.mode == Mode::Distributed {
            self.graph.resolve()?;
        }
        Ok(())
    }
}

/// Builds the cost ensemble. `n_agents` is the graph size in distributed mode.
fn build_costs<R: Rng>(spec: &CostSpec, n_agents: Option<usize>, rng: &mut R) -> Result<CostEnsemble> {
    match spec {
        CostSpec::Quartic {
            agents,
            coef_min,
            coef_max,
            radius,
        } => QuarticCost::random_ensemble(n_agents.unwrap_or(*agents), *coef_min, *coef_max, *radius, rng),
        CostSpec::Logistic {
            features,
            samples,
            lambda,
            separation,
            data,
        } => {
            let data = match data {
                Some(path) => LogRegData::read_csv(path, *lambda)?,
                None => {
                    generate_logreg_data_with(rng, n_agents.unwrap_or(1), *features, *samples, *separation, *lambda)?
                }
            };
            if let Some(n) = n_agents {
                if data.n_agents() != n {
                    return Err(Error::Config(format!(
                        "data has {} agents but the graph has {n} nodes",
                        data.n_agents()
                    )));
                }
            }
            data.ensemble()
        }
        CostSpec::Quadratic { centers } => {
            if let Some(n) = n_agents {
                if centers.len() != n {
                    return Err(Error::Config(format!(
                        "{} quadratic centers for a {n}-node graph",
                        centers.len()
                    )));
                }
            }
            CostEnsemble::from_costs(
                centers
                    .iter()
                    .map(|c| QuadraticCost::isotropic(DVector::from_vec(c.clone())))
                    .collect(),
            )
        }
    }
}

/// A named comparison `lhs <op> rhs` evaluated on a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub lhs_label: String,
    pub lhs: f64,
    pub op: &'static str,
    pub rhs_label: String,
    pub rhs: f64,
    pub passed: bool,
}

impl Assertion {
    fn new(name: &str, lhs_label: &str, lhs: f64, op: &'static str, rhs_label: &str, rhs: f64) -> Self {
        let passed = match op {
            "<" => lhs < rhs,
            "<=" => lhs <= rhs,
            ">" => lhs > rhs,
            ">=" => lhs >= rhs,
            _ => unreachable!("unknown comparison {op}"),
        };
        Assertion {
            name: name.into(),
            lhs_label: lhs_label.into(),
            lhs,
            op,
            rhs_label: rhs_label.into(),
            rhs,
            passed,
        }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {} = {} {} {} = {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.lhs_label,
            self.lhs,
            self.op,
            self.rhs_label,
            self.rhs
        )
    }
}

/// Iteration count as a float, `inf` for runs that never got there.
fn count(it: Option<usize>) -> f64 {
    it.map_or(f64::INFINITY, |n| n as f64)
}

fn time(t: Option<f64>) -> f64 {
    t.unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone)]
pub struct CentralRun {
    pub label: String,
    pub field: FlowField,
    pub step: f64,
    /// `None` when the run diverged.
    pub trace: Option<FlowTrace>,
    /// Steps to each of [`GAP_THRESHOLDS`].
    pub iterations: BTreeMap<String, Option<usize>>,
}

impl CentralRun {
    fn new(label: String, field: FlowField, step: f64, trace: Option<FlowTrace>) -> Self {
        let iterations = GAP_THRESHOLDS
            .iter()
            .map(|&g| (format!("{g:e}"), trace.as_ref().and_then(|t| t.iterations_to(g))))
            .collect();
        CentralRun {
            label,
            field,
            step,
            trace,
            iterations,
        }
    }

    pub fn iterations_to(&self, gap: f64) -> Option<usize> {
        self.trace.as_ref().and_then(|t| t.iterations_to(gap))
    }
}

#[derive(Debug, Clone)]
pub struct DistRun {
    pub label: String,
    pub trace: DistTrace,
    /// Simulated time to each of [`GAP_THRESHOLDS`].
    pub times: BTreeMap<String, Option<f64>>,
}

impl DistRun {
    fn new(label: String, trace: DistTrace) -> Self {
        let times = GAP_THRESHOLDS
            .iter()
            .map(|&g| (format!("{g:e}"), trace.time_to_gap(g)))
            .collect();
        DistRun { label, trace, times }
    }
}

/// Protocol invariants measured along a distributed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistChecks {
    pub max_sum_v: f64,
    /// `max_t ‖Σz - Σg‖ / (Σ‖g^i‖ + Σ‖v^i‖)`.
    pub max_sum_residual_rel: f64,
    pub predicted_consensus_time: f64,
    pub observed_consensus_time: Option<f64>,
    pub chattering_band: f64,
    /// `max cons_z` over `t ≥ 1.5 T_pred`.
    pub cons_z_after_bound: f64,
    /// First time `‖Σz(t)‖` exceeds `‖Σz(0)‖ (1-δ)^{t/δ} (1+10δ)`.
    pub sum_z_envelope_exceeded_at: Option<f64>,
    /// `‖Σz‖` at the end of the run.
    pub final_sum_z: f64,
}

impl DistChecks {
    pub fn measure(g: &Graph, costs: &CostEnsemble, trace: &DistTrace) -> Self {
        let d = costs.dim();
        let z0 = trace.initial_state.z(costs);
        let t_pred = dhiso::finite_time_bound(&g.matrices(), &z0);
        let band = dhiso::chattering_band(g, d, trace.step);
        let sum_z0 = trace.samples[0].diag.sum_z;
        let envelope_exceeded = trace
            .samples
            .iter()
            .find(|s| s.diag.sum_z > dhiso::sum_z_envelope(sum_z0, s.t, trace.step))
            .map(|s| s.t);
        DistChecks {
            max_sum_v: trace.samples.iter().map(|s| s.diag.sum_v).fold(0.0, f64::max),
            max_sum_residual_rel: trace
                .samples
                .iter()
                .map(|s| s.diag.sum_residual / s.diag.sum_scale.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max),
            predicted_consensus_time: t_pred,
            observed_consensus_time: trace.z_consensus_time(band),
            chattering_band: band,
            cons_z_after_bound: trace
                .samples
                .iter()
                .filter(|s| s.t >= 1.5 * t_pred)
                .map(|s| s.diag.cons_z)
                .fold(0.0, f64::max),
            sum_z_envelope_exceeded_at: envelope_exceeded,
            final_sum_z: trace.final_sample().diag.sum_z,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub x_star: DVector<f64>,
    pub central: Vec<CentralRun>,
    pub distributed: Vec<DistRun>,
    /// Checks on the distributed runs, keyed by label.
    pub checks: Vec<(String, DistChecks)>,
    pub assertions: Vec<Assertion>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn central_run(&self, label: &str) -> Option<&CentralRun> {
        self.central.iter().find(|r| r.label == label)
    }

    pub fn distributed_run(&self, label: &str) -> Option<&DistRun> {
        self.distributed.iter().find(|r| r.label == label)
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment {} (seed {})", self.name, self.seed)?;
        writeln!(f, "x* = {:?}", self.x_star.as_slice())?;
        for r in &self.central {
            write!(
                f,
                "{:<12} gain {:<10.6} step {:<10.6e}",
                r.label,
                r.field.gain(),
                r.step
            )?;
            match &r.trace {
                None => writeln!(f, " diverged")?,
                Some(t) => {
                    let its: Vec<String> = r
                        .iterations
                        .iter()
                        .map(|(g, n)| format!("{g}:{}", n.map_or("-".into(), |n| n.to_string())))
                        .collect();
                    writeln!(f, " max effort {:.4e} iterations {}", t.max_field_norm(), its.join(" "))?;
                }
            }
        }
        for r in &self.distributed {
            let times: Vec<String> = r
                .times
                .iter()
                .map(|(g, t)| format!("{g}:{}", t.map_or("-".into(), |t| format!("{t:.3}"))))
                .collect();
            writeln!(
                f,
                "{:<12} final max|x-x*| {:.3e} time-to-gap {}",
                r.label,
                r.trace.final_sample().max_opt_err,
                times.join(" ")
            )?;
        }
        for (label, c) in &self.checks {
            writeln!(
                f,
                "{label:<12} max|Σv| {:.2e}  max Σz-Σg residual (rel) {:.2e}  T_pred {:.3}  z-consensus at {}  band {:.4}  max cons_z after 1.5 T_pred {:.3e}",
                c.max_sum_v,
                c.max_sum_residual_rel,
                c.predicted_consensus_time,
                c.observed_consensus_time.map_or("-".into(), |t| format!("{t:.3}")),
                c.chattering_band,
                c.cons_z_after_bound,
            )?;
            writeln!(
                f,
                "{label:<12} |Σz| envelope first exceeded at t = {}  final |Σz| {:.3e}",
                c.sum_z_envelope_exceeded_at
                    .map_or("never".into(), |t| format!("{t:.3}")),
                c.final_sum_z
            )?;
        }
        for a in &self.assertions {
            writeln!(f, "{a}")?;
        }
        Ok(())
    }
}

fn run_central_case(
    label: String,
    field: FlowField,
    policy: StepPolicy,
    costs: &CostEnsemble,
    x0: &DVector<f64>,
    f_star: f64,
    cfg: &ExperimentConfig,
) -> Result<CentralRun> {
    let step = match policy {
        StepPolicy::Fixed(s) => s,
        StepPolicy::Grid { min, max, points } => {
            let grid = geometric_grid(min, max, points);
            grid_search_stepsize(field, costs, x0, f_star, &grid, cfg.target_gap, cfg.horizon)?.step
        }
    };
    let opts = EulerOptions {
        step,
        horizon: cfg.horizon,
        stop_gap: cfg.stop_gap,
    };
    let trace = match euler_run(field, costs, x0, f_star, opts) {
        Ok(t) => Some(t),
        Err(Error::Diverged { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CentralRun::new(label, field, step, trace))
}

/// Centralized GD / NR / HISO comparison.
///
/// Each flow gets its own grid-optimal stepsize. Two effort-normalized runs
/// reuse HISO's stepsize with the gains from [`normalize_effort`], and a
/// high-gain GD run (gain `gd_alpha`) gets a fresh stepsize search.
pub fn run_central(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let costs = build_costs(&cfg.cost, None, &mut rng)?;
    let x0 = match &cfg.x0 {
        Some(v) if v.len() == costs.dim() => DVector::from_vec(v.clone()),
        Some(v) => {
            return Err(Error::Config(format!(
                "x0 has {} components, cost dimension is {}",
                v.len(),
                costs.dim()
            )))
        }
        None => DVector::from_element(costs.dim(), 1.0),
    };
    let x_star = newton_oracle(&costs, &x0, 1e-12)?;
    let f_star = costs.value(&x_star);

    let mut central = Vec::new();
    for kind in [FlowKind::Gd, FlowKind::Nr, FlowKind::Hiso] {
        central.push(run_central_case(
            kind.to_string(),
            FlowField::unit(kind),
            cfg.step,
            &costs,
            &x0,
            f_star,
            cfg,
        )?);
    }
    let hiso_step = central[2].step;
    let gains = normalize_effort(&costs, &x0)?;
    for kind in [FlowKind::Gd, FlowKind::Nr] {
        central.push(run_central_case(
            format!("{kind}-norm"),
            FlowField::new(kind, gains.for_kind(kind))?,
            StepPolicy::Fixed(hiso_step),
            &costs,
            &x0,
            f_star,
            cfg,
        )?);
    }
    let alpha_label = format!("GD-a{}", cfg.gd_alpha);
    central.push(run_central_case(
        alpha_label.clone(),
        FlowField::new(FlowKind::Gd, cfg.gd_alpha)?,
        cfg.step,
        &costs,
        &x0,
        f_star,
        cfg,
    )?);

    let target = cfg.target_gap;
    let its = |label: &str| {
        count(
            central
                .iter()
                .find(|r| r.label == label)
                .and_then(|r| r.iterations_to(target)),
        )
    };
    let (gd, nr, hiso, gd_alpha) = (its("GD"), its("NR"), its("HISO"), its(&alpha_label));
    let tag = format!("iterations to gap {target:e}");
    let assertions = vec![
        Assertion::new(&format!("HISO no slower than GD ({tag})"), "HISO", hiso, "<=", "GD", gd),
        Assertion::new(&format!("NR no slower than GD ({tag})"), "NR", nr, "<=", "GD", gd),
        Assertion::new(
            &format!("HISO and NR comparable ({tag})"),
            "|HISO - NR|",
            (hiso - nr).abs(),
            "<=",
            "max(HISO, NR)",
            hiso.max(nr),
        ),
        Assertion::new(
            &format!("high-gain GD still slower than HISO ({tag})"),
            &alpha_label,
            gd_alpha,
            ">",
            "HISO",
            hiso,
        ),
    ];
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        x_star,
        central,
        distributed: Vec::new(),
        checks: Vec::new(),
        assertions,
    })
}

/// Same as [`run_central`]; named after the cost family it reproduces.
pub fn run_quartic(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_central(cfg)
}

/// Distributed DHISO vs DGD2 comparison on identical data and initial
/// conditions. The data (when generated) and the initial decisions
/// `x^i(0) ~ N(0, I)` come from one generator seeded with `cfg.seed`.
pub fn run_distributed(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let g = cfg.graph.resolve()?;
    let n = g.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let costs = build_costs(&cfg.cost, Some(n), &mut rng)?;
    let d = costs.dim();
    let x0: Vec<DVector<f64>> = (0..n)
        .map(|_| DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let x_star = newton_oracle(&costs, &DVector::zeros(d), 1e-10)?;
    let step = match cfg.step {
        StepPolicy::Fixed(s) => s,
        StepPolicy::Grid { .. } => {
            return Err(Error::Config("distributed runs need a fixed step".into()));
        }
    };
    let opts = DistOptions {
        step,
        horizon: cfg.horizon,
        epsilon: cfg.epsilon,
    };
    let dhiso = dhiso::dhiso_run(&g, &costs, x0.clone(), opts, &x_star)?;
    let dgd2 = dhiso::dgd2_run(&g, &costs, x0, opts, &x_star)?;
    let checks = vec![
        ("DHISO".to_string(), DistChecks::measure(&g, &costs, &dhiso)),
        ("DGD2".to_string(), DistChecks::measure(&g, &costs, &dgd2)),
    ];

    let target = cfg.target_gap;
    let t_dhiso = time(dhiso.time_to_gap(target));
    let t_dgd2 = time(dgd2.time_to_gap(target));
    let assertions = vec![
        Assertion::new(
            &format!("DHISO reaches gap {target:e} before DGD2 (simulated time)"),
            "DHISO",
            t_dhiso,
            "<",
            "DGD2",
            t_dgd2,
        ),
        Assertion::new(
            "DHISO agents near the optimum at the horizon",
            "max_i |x_i - x*|",
            dhiso.final_sample().max_opt_err,
            "<=",
            "tolerance",
            1e-3,
        ),
    ];
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        x_star,
        central: Vec::new(),
        distributed: vec![DistRun::new("DHISO".into(), dhiso), DistRun::new("DGD2".into(), dgd2)],
        checks,
        assertions,
    })
}

/// Same as [`run_distributed`]; named after the cost family it reproduces.
pub fn run_logreg(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_distributed(cfg)
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.mode {
        Mode::Central => run_central(cfg),
        Mode::Distributed => run_distributed(cfg),
    }
}

/// Random SPD matrix `Q Λ Qᵀ` with `Q` orthogonal and `Λ ~ U[lo, hi]`.
pub fn random_spd<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut *rng));
    let q = g.qr().q();
    let lambda = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.random_range(lo..=hi)));
    let h: DMatrix<f64> = &q * lambda * q.transpose();
    (&h + h.transpose()) * 0.5
}

/// Summary of a randomized matrix-inequality suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteStats {
    pub instances: usize,
    /// Worst observed margin; the inequality holds when this is `≥ -tolerance`.
    pub worst: f64,
    pub mean: f64,
    pub tolerance: f64,
    pub violations: usize,
}

impl SuiteStats {
    fn from_margins(margins: &[f64], tolerance: f64) -> Self {
        SuiteStats {
            instances: margins.len(),
            worst: margins.iter().copied().fold(f64::INFINITY, f64::min),
            mean: margins.iter().sum::<f64>() / margins.len().max(1) as f64,
            tolerance,
            violations: margins.iter().filter(|&&m| m < -tolerance).count(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn random_ensemble_hessians<R: Rng>(rng: &mut R) -> (usize, Vec<DMatrix<f64>>) {
    let n = rng.random_range(2..=8);
    let d = rng.random_range(1..=6);
    (d, (0..n).map(|_| random_spd(d, 0.1, 10.0, rng)).collect())
}

fn inverse_pair(hs: &[DMatrix<f64>], d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = hs.len() as f64;
    let mut mean_inv = DMatrix::zeros(d, d);
    let mut sum = DMatrix::zeros(d, d);
    for h in hs {
        mean_inv += spd_inverse(h).expect("random_spd is positive definite");
        sum += h;
    }
    (mean_inv / n, spd_inverse(&sum).expect("sum of SPD is SPD"))
}

/// `min eig((1/N) Σ H_i⁻¹ - (Σ H_i)⁻¹)` over random SPD ensembles.
pub fn mean_inverse_suite(seed: u64, instances: usize, tolerance: f64) -> SuiteStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margins: Vec<f64> = (0..instances)
        .map(|_| {
            let (d, hs) = random_ensemble_hessians(&mut rng);
            let (mean_inv, inv_sum) = inverse_pair(&hs, d);
            sym_eigenvalues(&(mean_inv - inv_sum))[0]
        })
        .collect();
    SuiteStats::from_margins(&margins, tolerance)
}

/// `∇fᵀ((1/N) Σ H⁻¹)∇f - ∇fᵀ(Σ H)⁻¹∇f` at random points of random
/// quadratic ensembles `Σ ½ (x - c_i)ᵀ H_i (x - c_i)`.
pub fn rate_dominance_suite(seed: u64, instances: usize, tolerance: f64) -> SuiteStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margins: Vec<f64> = (0..instances)
        .map(|_| {
            let (d, hs) = random_ensemble_hessians(&mut rng);
            let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
            let costs: Vec<QuadraticCost> = hs
                .iter()
                .map(|h| {
                    let c = DVector::from_fn(d, |_, _| normal());
                    QuadraticCost::new(c, h.clone()).expect("random_spd is positive definite")
                })
                .collect();
            let x = DVector::from_fn(d, |_, _| 3.0 * normal());
            let costs = CostEnsemble::from_costs(costs).expect("shared dimension");
            let grad = costs.gradient_sum(&x);
            let (mean_inv, inv_sum) = inverse_pair(&costs.hessians(&x), d);
            grad.dot(&(mean_inv * &grad)) - grad.dot(&(inv_sum * &grad))
        })
        .collect();
    SuiteStats::from_margins(&margins, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_spd_is_spd_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 1..=6 {
            let h = random_spd(d, 0.1, 10.0, &mut rng);
            let eig = sym_eigenvalues(&h);
            assert!(eig[0] >= 0.1 - 1e-10 && eig[d - 1] <= 10.0 + 1e-10);
        }
    }

    #[test]
    fn mean_inverse_small_run() {
        let stats = mean_inverse_suite(1, 50, 1e-9);
        assert!(stats.passed(), "{stats:?}");
        assert!(stats.worst > -1e-9);
    }

    #[test]
    fn rate_dominance_small_run() {
        assert!(rate_dominance_suite(1, 50, 1e-9).passed());
    }

    #[test]
    fn single_agent_quadratic_converges_in_one_step() {
        let mut cfg = ExperimentConfig::quartic_default();
        cfg.cost = CostSpec::Quadratic {
            centers: vec![vec![0.5]],
        };
        cfg.x0 = Some(vec![3.0]);
        let report = run_central(&cfg).unwrap();
        for label in ["GD", "NR", "HISO"] {
            let r = report.central_run(label).unwrap();
            assert_eq!(r.step, 1.0, "{label}");
            assert_eq!(r.iterations_to(1e-8), Some(1), "{label}");
        }
    }

    #[test]
    fn identity_cost_distributed_runs_coincide() {
        let mut cfg = ExperimentConfig::logreg_default();
        cfg.cost = CostSpec::Quadratic {
            centers: (0..5).map(|i| vec![i as f64, 1.0 - i as f64]).collect(),
        };
        cfg.horizon = 5.0;
        let report = run_distributed(&cfg).unwrap();
        let a = &report.distributed_run("DHISO").unwrap().trace;
        let b = &report.distributed_run("DGD2").unwrap().trace;
        assert_eq!(a.final_state, b.final_state);
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.f_gap, sb.f_gap);
        }
    }

    #[test]
    fn distributed_rejects_grid_step_and_size_mismatch() {
        let mut cfg = ExperimentConfig::logreg_default();
        cfg.step = StepPolicy::default_grid();
        assert!(matches!(run_distributed(&cfg), Err(Error::Config(_))));

        let mut cfg = ExperimentConfig::logreg_default();
        cfg.cost = CostSpec::Quadratic {
            centers: vec![vec![0.0]],
        };
        assert!(matches!(run_distributed(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn assertion_display_names_both_sides() {
        let a = Assertion::new("x", "A", 1.0, "<", "B", 2.0);
        assert!(a.passed);
        let s = a.to_string();
        assert!(s.contains("A = 1") && s.contains("B = 2") && s.starts_with("[PASS]"));
    }

    #[test]
    fn reports_are_reproducible() {
        let mut cfg = ExperimentConfig::logreg_default();
        cfg.horizon = 2.0;
        let a = run_distributed(&cfg).unwrap();
        let b = run_distributed(&cfg).unwrap();
        assert_eq!(a.x_star, b.x_star);
        assert_eq!(a.distributed[0].trace, b.distributed[0].trace);
        assert_eq!(a.distributed[1].trace, b.distributed[1].trace);
        cfg.seed = 8;
        let c = run_distributed(&cfg).unwrap();
        assert_ne!(a.x_star, c.x_star);
    }

    #[test]
    fn report_traces_keep_protocol_invariants() {
        let mut cfg = ExperimentConfig::logreg_default();
        cfg.horizon = 5.0;
        let report = run_distributed(&cfg).unwrap();
        for (label, checks) in &report.checks {
            assert!(checks.max_sum_v <= 1e-8, "{label}: {checks:?}");
            assert!(checks.max_sum_residual_rel <= 1e-12, "{label}: {checks:?}");
        }
    }
}
