//! Command-line driver: user-supplied problems from matrix files, the three
//! built-in experiment families, and the linear-program decay check.
//!
//! Exit codes: 0 when the solve converged, 2 when it stopped without
//! convergence, 1 on usage or I/O errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcot::apdagd::{run_apdagd, ApdagdConfig};
use mcot::dual::{inf_norm, DualPotential, EntropicDual};
use mcot::io::{atomic_write, read_matrix, read_vector};
use mcot::lp::{decay_template, log_gap_fit, theorem1_decay_probe};
use mcot::mot_dual::{MotDual, MotPotential};
use mcot::problem::{
    build_balance, build_option_pricing, build_ranking, MotProblem, SmotProblem, RANKING_K_TOP,
    RANKING_W_TOP,
};
use mcot::report::{expected_positions, RunSummary};
use mcot::sinkhorn::{run_sinkhorn, SinkhornConfig, SolveStatus};
use mcot::smot_dual::{SmotDual, SmotPotential};
use mcot::sns::{reference_plan, run_sns, SnsConfig};
use mcot::trace::Tracer;
use mcot::warm::{warm_init_mot, warm_init_smot, EtaSchedule, DEFAULT_ETA0, DEFAULT_ITERS_PER_LEVEL};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "mcot",
    about = "Entropic optimal transport under martingale-type constraints",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem given as delimiter-separated matrix files.
    #[command(subcommand)]
    Solve(SolveKind),
    /// Build and solve a built-in experiment instance.
    #[command(subcommand)]
    Experiment(ExperimentKind),
    /// Verification utilities backed by the exact linear program.
    #[command(subcommand)]
    Verify(VerifyKind),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Sinkhorn,
    Sns,
    Apdagd,
}

impl SolverChoice {
    fn name(self) -> &'static str {
        match self {
            SolverChoice::Sinkhorn => "sinkhorn",
            SolverChoice::Sns => "sns",
            SolverChoice::Apdagd => "apdagd",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn is_on(self) -> bool {
        matches!(self, Switch::On)
    }
}

/// Solver flags; unset values take per-command defaults.
#[derive(Args)]
struct SolverOpts {
    /// Solver: alternating maximization, sparse Newton, or accelerated
    /// gradient.
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    /// Alternating-maximization iterations (warm-up stage for sns).
    #[arg(long)]
    n1: Option<usize>,
    /// Newton iterations for sns; total iterations for apdagd.
    #[arg(long)]
    n2: Option<usize>,
    /// Hessian plan-retention fraction in (0, 1]; defaults to five times
    /// the basic-solution support bound.
    #[arg(long)]
    rho: Option<f64>,
    /// Gradient infinity-norm tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Warm initialization through doubling regularization levels.
    #[arg(long, value_enum)]
    warm_start: Option<Switch>,
    /// Starting regularization strength for the warm schedule.
    #[arg(long, default_value_t = DEFAULT_ETA0)]
    eta0: f64,
    /// Record wall-clock timings in trace and summary files (breaks
    /// byte-reproducibility across runs).
    #[arg(long, value_enum, default_value = "off")]
    timings: Switch,
    /// Compute a full-Newton reference plan and record l1 distances to it.
    #[arg(long, value_enum, default_value = "off")]
    reference: Switch,
}

/// Resolved solver configuration after per-command defaults.
struct SolverPlan {
    solver: SolverChoice,
    n1: usize,
    n2: usize,
    rho: Option<f64>,
    tol: f64,
    warm_start: bool,
    eta0: f64,
    timings: bool,
    reference: bool,
}

impl SolverOpts {
    fn resolve(
        &self,
        solver: SolverChoice,
        n1: usize,
        n2: usize,
        tol: f64,
        warm_start: bool,
    ) -> Result<SolverPlan, String> {
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(format!("rho = {rho} outside (0, 1]"));
            }
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(format!("eta0 = {} must be positive", self.eta0));
        }
        Ok(SolverPlan {
            solver: self.solver.unwrap_or(solver),
            n1: self.n1.unwrap_or(n1),
            n2: self.n2.unwrap_or(n2),
            rho: self.rho,
            tol: self.tol.unwrap_or(tol),
            warm_start: self.warm_start.map(Switch::is_on).unwrap_or(warm_start),
            eta0: self.eta0,
            timings: self.timings.is_on(),
            reference: self.reference.is_on(),
        })
    }
}

#[derive(Args)]
struct FileProblem {
    /// Cost matrix file (n x n).
    #[arg(long)]
    cost: PathBuf,
    /// Source weights file (length n).
    #[arg(long)]
    row: PathBuf,
    /// Target weights file (length n).
    #[arg(long)]
    col: PathBuf,
    /// Target embedding matrix file (n x d).
    #[arg(long)]
    v: PathBuf,
    /// Constraint target matrix file (n x d).
    #[arg(long)]
    w: PathBuf,
    /// Regularization strength.
    #[arg(long, default_value_t = 1200.0)]
    eta: f64,
    /// Trace output file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Summary output file.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Recorded in the summary for provenance.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum SolveKind {
    /// Relaxed-equality constraint `|PV - W|_1 <= epsilon`.
    Mot {
        #[command(flatten)]
        files: FileProblem,
        /// Constraint violation budget.
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        opts: SolverOpts,
    },
    /// One-sided constraint `PV >= W`.
    Smot {
        #[command(flatten)]
        files: FileProblem,
        /// Accepted for flag symmetry with the relaxed-equality form;
        /// the one-sided constraint has no violation budget.
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        opts: SolverOpts,
    },
}

#[derive(Args)]
struct ExperimentCommon {
    /// Site count.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Regularization strength.
    #[arg(long, default_value_t = 1200.0)]
    eta: f64,
    /// Generator seed for the randomized instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for trace and summary files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExperimentKind {
    /// Uniform source vs noise-smoothed target, absolute-difference payoff.
    OptionPricing {
        #[command(flatten)]
        common: ExperimentCommon,
        /// Violation budget; defaults to 2/n.
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        opts: SolverOpts,
    },
    /// Random-cost assignment with a two-group balance constraint.
    Balance {
        #[command(flatten)]
        common: ExperimentCommon,
        /// Violation budget.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// First group size; defaults to n/8.
        #[arg(long)]
        size_a: Option<usize>,
        /// Second group size; defaults to n/8.
        #[arg(long)]
        size_b: Option<usize>,
        #[command(flatten)]
        opts: SolverOpts,
    },
    /// Stochastic ranking under a top-position diversity constraint.
    Ranking {
        #[command(flatten)]
        common: ExperimentCommon,
        /// Number of leading positions carrying the threshold.
        #[arg(long)]
        k_top: Option<usize>,
        /// Diversity threshold at the leading positions.
        #[arg(long, default_value_t = RANKING_W_TOP)]
        w_top: f64,
        #[command(flatten)]
        opts: SolverOpts,
    },
}

#[derive(Subcommand)]
enum VerifyKind {
    /// Gap between the entropic optimum and the exact linear program across
    /// doubling regularization strengths.
    Theorem1 {
        /// Template size (at most 8).
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Template seed.
        #[arg(long, default_value_t = 23)]
        seed: u64,
        /// Violation budget of the template.
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Optional output file for the (eta, gap) table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Entry point used by the binary and the tests.
pub fn run(args: &[String]) -> i32 {
    let mut argv = vec!["mcot".to_string()];
    argv.extend(args.iter().cloned());
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(status) => match status {
            SolveStatus::Converged => 0,
            SolveStatus::MaxIterations | SolveStatus::Stagnated => 2,
        },
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<SolveStatus, String> {
    match cli.command {
        Command::Solve(kind) => match kind {
            SolveKind::Mot {
                files,
                epsilon,
                opts,
            } => {
                let prob = load_mot(&files, epsilon)?;
                let plan = opts.resolve(SolverChoice::Sns, 20, 20, 1e-10, true)?;
                let outputs = Outputs {
                    trace: files.trace.clone(),
                    summary: files.summary.clone(),
                    positions: None,
                };
                run_mot(&prob, &plan, &outputs, "solve-mot", files.seed)
            }
            SolveKind::Smot {
                files,
                epsilon,
                opts,
            } => {
                if epsilon.is_some() {
                    eprintln!("note: --epsilon is ignored for the one-sided constraint");
                }
                let prob = load_smot(&files)?;
                let plan = opts.resolve(SolverChoice::Sns, 20, 20, 1e-10, true)?;
                let outputs = Outputs {
                    trace: files.trace.clone(),
                    summary: files.summary.clone(),
                    positions: None,
                };
                run_smot(&prob, &plan, &outputs, "solve-smot", files.seed)
            }
        },
        Command::Experiment(kind) => match kind {
            ExperimentKind::OptionPricing {
                common,
                epsilon,
                opts,
            } => {
                let prob = build_option_pricing(common.n, epsilon, common.eta)
                    .map_err(|e| e.to_string())?;
                let plan = opts.resolve(SolverChoice::Sns, 20, 20, 1e-10, true)?;
                let outputs = experiment_outputs(&common.out, false)?;
                run_mot(&prob, &plan, &outputs, "option-pricing", Some(common.seed))
            }
            ExperimentKind::Balance {
                common,
                epsilon,
                size_a,
                size_b,
                opts,
            } => {
                let size_a = size_a.unwrap_or((common.n / 8).max(1));
                let size_b = size_b.unwrap_or((common.n / 8).max(1));
                let prob = build_balance(common.n, size_a, size_b, epsilon, common.eta, common.seed)
                    .map_err(|e| e.to_string())?;
                let plan = opts.resolve(SolverChoice::Sns, 10, 20, 1e-10, true)?;
                let outputs = experiment_outputs(&common.out, false)?;
                run_mot(&prob, &plan, &outputs, "balance", Some(common.seed))
            }
            ExperimentKind::Ranking {
                common,
                k_top,
                w_top,
                opts,
            } => {
                let k_top = k_top.unwrap_or(RANKING_K_TOP.min(common.n));
                let prob = build_ranking(common.n, k_top, w_top, common.eta, common.seed)
                    .map_err(|e| e.to_string())?;
                // This family defaults to plain alternating maximization
                // with no warm initialization.
                let plan = opts.resolve(SolverChoice::Sinkhorn, 50, 20, 1e-11, false)?;
                let outputs = experiment_outputs(&common.out, true)?;
                run_smot(&prob, &plan, &outputs, "ranking", Some(common.seed))
            }
        },
        Command::Verify(kind) => match kind {
            VerifyKind::Theorem1 {
                n,
                seed,
                epsilon,
                out,
            } => verify_theorem1(n, seed, epsilon, out.as_deref()),
        },
    }
}

struct Outputs {
    trace: Option<PathBuf>,
    summary: Option<PathBuf>,
    positions: Option<PathBuf>,
}

fn experiment_outputs(dir: &Path, with_positions: bool) -> Result<Outputs, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(Outputs {
        trace: Some(dir.join("trace.csv")),
        summary: Some(dir.join("summary.txt")),
        positions: with_positions.then(|| dir.join("positions.txt")),
    })
}

fn load_mot(files: &FileProblem, epsilon: f64) -> Result<MotProblem, String> {
    let cost = read_matrix(&files.cost).map_err(|e| e.to_string())?;
    let row = read_vector(&files.row).map_err(|e| e.to_string())?;
    let col = read_vector(&files.col).map_err(|e| e.to_string())?;
    let v = read_matrix(&files.v).map_err(|e| e.to_string())?;
    let w = read_matrix(&files.w).map_err(|e| e.to_string())?;
    MotProblem::new(cost, row, col, v, w, epsilon, files.eta).map_err(|e| e.to_string())
}

fn load_smot(files: &FileProblem) -> Result<SmotProblem, String> {
    let cost = read_matrix(&files.cost).map_err(|e| e.to_string())?;
    let row = read_vector(&files.row).map_err(|e| e.to_string())?;
    let col = read_vector(&files.col).map_err(|e| e.to_string())?;
    let v = read_matrix(&files.v).map_err(|e| e.to_string())?;
    let w = read_matrix(&files.w).map_err(|e| e.to_string())?;
    SmotProblem::new(cost, row, col, v, w, files.eta).map_err(|e| e.to_string())
}

struct SolveOutput {
    z: Vec<f64>,
    status: SolveStatus,
    trace: mcot::ConvergenceTrace,
    warm_ms: f64,
    total_ms: f64,
}

fn solve_generic<D: EntropicDual>(
    pot: &D,
    zero: Vec<f64>,
    warm: Option<Vec<f64>>,
    warm_ms: f64,
    plan: &SolverPlan,
) -> Result<SolveOutput, String> {
    let started = Instant::now();
    let z0 = warm.unwrap_or(zero);

    let reference = if plan.reference {
        let sink = run_sinkhorn(
            pot,
            &z0,
            &SinkhornConfig::new(plan.n1.max(1), plan.tol),
            &mut Tracer::disabled(),
        )
        .map_err(|e| e.to_string())?;
        let (ref_plan, _) = reference_plan(pot, &sink.z, 1e-13, 60).map_err(|e| e.to_string())?;
        Some(ref_plan)
    } else {
        None
    };

    let mut tracer = Tracer::new(reference.as_ref());
    let result = match plan.solver {
        SolverChoice::Sinkhorn => {
            let cfg = SinkhornConfig::new(plan.n1.max(1), plan.tol);
            run_sinkhorn(pot, &z0, &cfg, &mut tracer).map_err(|e| e.to_string())?
        }
        SolverChoice::Sns => {
            let mut cfg = SnsConfig::new(plan.n1, plan.n2.max(1), plan.tol);
            if let Some(rho) = plan.rho {
                cfg = cfg.with_rho(rho);
            }
            run_sns(pot, &z0, &cfg, &mut tracer).map_err(|e| e.to_string())?
        }
        SolverChoice::Apdagd => {
            let mut cfg = ApdagdConfig::new(plan.n2.max(1));
            cfg.grad_tol = plan.tol;
            let plan_of = |z: &[f64]| pot.plan(z);
            let res = run_apdagd(pot, &z0, &cfg, &mut tracer, Some(&plan_of))
                .map_err(|e| e.to_string())?;
            mcot::SolveResult {
                z: res.z,
                status: res.status,
            }
        }
    };
    Ok(SolveOutput {
        z: result.z,
        status: result.status,
        trace: tracer.finish(),
        warm_ms,
        total_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn run_mot(
    prob: &MotProblem,
    plan_cfg: &SolverPlan,
    outputs: &Outputs,
    problem_name: &str,
    seed: Option<u64>,
) -> Result<SolveStatus, String> {
    let (warm, warm_ms) = if plan_cfg.warm_start {
        let clock = Instant::now();
        let schedule = EtaSchedule::new(plan_cfg.eta0, prob.eta, DEFAULT_ITERS_PER_LEVEL);
        let z = warm_init_mot(prob, &schedule).map_err(|e| e.to_string())?;
        (Some(z), clock.elapsed().as_secs_f64() * 1e3)
    } else {
        (None, 0.0)
    };
    let pot = MotPotential::new(prob);
    let out = solve_generic(
        &pot,
        MotDual::zeros(prob.n, prob.d).to_flat(),
        warm,
        warm_ms,
        plan_cfg,
    )?;

    let plan = pot.plan(&out.z).map_err(|e| e.to_string())?;
    let objective = pot.eval(&out.z).map_err(|e| e.to_string())?;
    let grad = pot.grad(&out.z).map_err(|e| e.to_string())?;
    let mut summary = RunSummary::for_mot(
        prob,
        &plan,
        plan_cfg.solver.name(),
        problem_name,
        out.status,
        objective,
        inf_norm(&grad),
        &out.trace,
        seed,
    );
    if plan_cfg.timings {
        summary.wall_ms = Some(out.total_ms);
        summary.warm_ms = Some(out.warm_ms);
    }
    write_outputs(outputs, &out.trace, &summary, None, plan_cfg)?;
    eprintln!(
        "{problem_name}: {} objective {:.12e} grad {:.3e}",
        out.status,
        objective,
        inf_norm(&grad)
    );
    Ok(out.status)
}

fn run_smot(
    prob: &SmotProblem,
    plan_cfg: &SolverPlan,
    outputs: &Outputs,
    problem_name: &str,
    seed: Option<u64>,
) -> Result<SolveStatus, String> {
    let (warm, warm_ms) = if plan_cfg.warm_start {
        let clock = Instant::now();
        let schedule = EtaSchedule::new(plan_cfg.eta0, prob.eta, DEFAULT_ITERS_PER_LEVEL);
        let z = warm_init_smot(prob, &schedule).map_err(|e| e.to_string())?;
        (Some(z), clock.elapsed().as_secs_f64() * 1e3)
    } else {
        (None, 0.0)
    };
    let pot = SmotPotential::new(prob);
    let out = solve_generic(
        &pot,
        SmotDual::zeros(prob.n, prob.d).to_flat(),
        warm,
        warm_ms,
        plan_cfg,
    )?;

    let plan = pot.plan(&out.z).map_err(|e| e.to_string())?;
    let objective = pot.eval(&out.z).map_err(|e| e.to_string())?;
    let grad = pot.grad(&out.z).map_err(|e| e.to_string())?;
    let mut summary = RunSummary::for_smot(
        prob,
        &plan,
        plan_cfg.solver.name(),
        problem_name,
        out.status,
        objective,
        inf_norm(&grad),
        &out.trace,
        seed,
    );
    if plan_cfg.timings {
        summary.wall_ms = Some(out.total_ms);
        summary.warm_ms = Some(out.warm_ms);
    }
    let positions = outputs
        .positions
        .as_ref()
        .map(|_| expected_positions(&plan))
        .transpose()
        .map_err(|e| e.to_string())?;
    write_outputs(outputs, &out.trace, &summary, positions, plan_cfg)?;
    eprintln!(
        "{problem_name}: {} objective {:.12e} grad {:.3e}",
        out.status,
        objective,
        inf_norm(&grad)
    );
    Ok(out.status)
}

fn write_outputs(
    outputs: &Outputs,
    trace: &mcot::ConvergenceTrace,
    summary: &RunSummary,
    positions: Option<Vec<f64>>,
    plan_cfg: &SolverPlan,
) -> Result<(), String> {
    if let Some(path) = &outputs.trace {
        atomic_write(path, &trace.to_file_string(plan_cfg.timings))
            .map_err(|e| e.to_string())?;
    }
    if let Some(path) = &outputs.summary {
        atomic_write(path, &summary.to_file_string()).map_err(|e| e.to_string())?;
    }
    if let (Some(path), Some(pos)) = (&outputs.positions, positions) {
        let body: String = pos.iter().map(|p| format!("{p:.12}\n")).collect();
        atomic_write(path, &body).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn verify_theorem1(
    n: usize,
    seed: u64,
    epsilon: f64,
    out: Option<&Path>,
) -> Result<SolveStatus, String> {
    let template = decay_template(n, seed, epsilon).map_err(|e| e.to_string())?;
    let etas: Vec<f64> = (4..=12).map(|k| (1u64 << k) as f64).collect();
    let points = theorem1_decay_probe(&template, &etas).map_err(|e| e.to_string())?;
    let (slope, r2) = log_gap_fit(&points);
    let mut table = String::new();
    for p in &points {
        table.push_str(&format!("{},{:.17e}\n", p.eta, p.gap));
    }
    match out {
        Some(path) => atomic_write(path, &table).map_err(|e| e.to_string())?,
        None => print!("{table}"),
    }
    eprintln!("log-gap fit: slope {slope:.6e}, r2 {r2:.4}");
    Ok(SolveStatus::Converged)
}
