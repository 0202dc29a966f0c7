use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hiso_core::experiments::{self, ExperimentConfig, ExperimentReport, StepPolicy, SuiteStats};
use hiso_core::graph::{Graph, MatrixDisplay};
use hiso_core::{io, Error};

/// Centralized and distributed Hessian-inverse-sum optimization experiments.
#[derive(Debug, Parser)]
#[command(name = "hiso", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV traces, summary.txt and gap.svg.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fixed integration step (replaces the grid search in central mode).
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Simulated time horizon.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Sign boundary-layer width; 0 is the exact sign.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomized matrix-inequality suites.
    Lemma1 {
        /// Random SPD ensembles for the mean-inverse inequality.
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        /// Random (ensemble, point) pairs for the rate inequality.
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Centralized GD / NR / HISO comparison on scalar quartics.
    Quartic {
        /// Draw coefficients from [0, 0.1] instead of [0.01, 0.1].
        #[arg(long)]
        full_range: bool,
        /// Gain of the high-gain GD run.
        #[arg(long)]
        gd_alpha: Option<f64>,
    },
    /// Distributed DHISO vs DGD2 on logistic regression.
    Logreg {
        /// CSV data (agent,label,f1..fp) instead of generated data.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Inspect a built-in graph.
    Graph {
        /// fig1, pathN, cycleN or completeN.
        #[arg(long, default_value = "fig1")]
        name: String,
        /// Print the Laplacian, incidence and projection matrices.
        #[arg(long)]
        print: bool,
    },
}

enum Failure {
    Assertions,
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Io { .. }
            | Error::Csv { .. }
            | Error::InvalidGraph(_)
            | Error::Disconnected { .. }
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. } => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, g: &GlobalOpts) {
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(step) = g.step {
        cfg.step = StepPolicy::Fixed(step);
    }
    if let Some(h) = g.horizon {
        cfg.horizon = h;
    }
    if let Some(eps) = g.epsilon {
        cfg.epsilon = eps;
    }
}

fn run_experiment(cfg: &ExperimentConfig) -> Result<(), Failure> {
    cfg.validate()?;
    let report: ExperimentReport = experiments::run(cfg)?;
    print!("{report}");
    if let Some(dir) = &cfg.out_dir {
        io::write_report(&report, dir)?;
        println!("wrote {}", dir.display());
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Assertions)
    }
}

fn print_suite(title: &str, stats: &SuiteStats) {
    println!(
        "{title}: {} instances, worst {:.6e}, mean {:.6e}, violations {} (tolerance {:e})",
        stats.instances, stats.worst, stats.mean, stats.violations, stats.tolerance
    );
}

fn print_graph(name: &str, print: bool) -> Result<(), Failure> {
    let g = Graph::named(name)?;
    let m = g.matrices();
    println!("graph {name}: {} nodes, {} edges", g.n_nodes(), g.n_edges());
    println!("degrees {:?}", g.degrees());
    println!(
        "lambda2 {:.6}  lambda_n {:.6}  lambda_bar {:.6}",
        m.lambda2, m.lambda_n, m.lambda_bar
    );
    if print {
        println!("\nLaplacian\n{}", MatrixDisplay(&m.laplacian));
        println!("incidence\n{}", MatrixDisplay(&m.incidence));
        println!("projection\n{}", MatrixDisplay(&m.projection));
        println!("eigenvalues {:?}", m.eigenvalues);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Lemma1 {
            instances,
            points,
            tolerance,
        } => {
            let seed = cli.global.seed.unwrap_or(1);
            let mean_inverse = experiments::mean_inverse_suite(seed, instances, tolerance);
            print_suite("min eig((1/N) sum H^-1 - (sum H)^-1)", &mean_inverse);
            let rate = experiments::rate_dominance_suite(seed, points, tolerance);
            print_suite("rate margin g'((1/N) sum H^-1)g - g'(sum H)^-1 g", &rate);
            if mean_inverse.passed() && rate.passed() {
                Ok(())
            } else {
                Err(Failure::Assertions)
            }
        }
        Command::Quartic { full_range, gd_alpha } => {
            let mut cfg = ExperimentConfig::quartic_default();
            if full_range {
                if let experiments::CostSpec::Quartic { coef_min, .. } = &mut cfg.cost {
                    *coef_min = 0.0;
                }
            }
            if let Some(a) = gd_alpha {
                cfg.gd_alpha = a;
            }
            apply_overrides(&mut cfg, &cli.global);
            run_experiment(&cfg)
        }
        Command::Logreg { data } => {
            let mut cfg = ExperimentConfig::logreg_default();
            if let (Some(path), experiments::CostSpec::Logistic { data: slot, .. }) = (data, &mut cfg.cost) {
                *slot = Some(path);
            }
            apply_overrides(&mut cfg, &cli.global);
            run_experiment(&cfg)
        }
        Command::Run { config } => {
            let mut cfg = io::read_config(&config)?;
            apply_overrides(&mut cfg, &cli.global);
            run_experiment(&cfg)
        }
        Command::Graph { name, print } => print_graph(&name, print),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertions) => {
            eprintln!("hiso: one or more assertions failed");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("hiso: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("hiso: {e}");
            ExitCode::from(2)
        }
    }
}
