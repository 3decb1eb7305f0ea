//! Command-line front end: oracle inspection, single fits, replicated
//! evaluation, sweep plans, and the verification suite. The `CDR_SEED`
//! environment variable, when set, overrides every seed given on the
//! command line or in a plan file.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cdr::error::{CdrError, Result};
use cdr::estimators::{estimate_cdr_set, EstimatorConfig};
use cdr::experiment::{
    parse_method, run_plan_with, run_verify_suite, unlabeled_stream_seed, ExperimentPlan,
    ExperimentRecord, RunOptions,
};
use cdr::oracle::optimal_cdr_set;
use cdr::scenario::{EstimatorConfigFile, Scenario};

#[derive(Parser)]
#[command(
    name = "cdr",
    version,
    about = "Optimal binary classification under a controlled discovery rate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact optimal decision set of a scenario per budget.
    Oracle {
        /// Built-in scenario name or path to a scenario JSON file.
        #[arg(long)]
        scenario: String,
        /// Discovery budgets to solve at.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5")]
        alphas: Vec<f64>,
    },
    /// Fit one estimator on fresh samples and print the fitted rule.
    Fit(FitArgs),
    /// Fit seeded replicates and score each against the exact optimum.
    Evaluate {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// CSV output path; results also print to stdout.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run every cell of a sweep plan JSON file.
    Sweep {
        /// Path to the plan file.
        #[arg(long)]
        plan: String,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Run the built-in verification suite; nonzero exit on any failure.
    Verify,
}

#[derive(Args)]
struct FitArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Estimator: histogram or klr.
    #[arg(long, default_value = "histogram")]
    method: String,
    /// Discovery budget.
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Labeled sample count (drawn from the training law).
    #[arg(long, default_value_t = 2000)]
    m: usize,
    /// Unlabeled sample count (drawn from the target law).
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Score margin for the scan rule.
    #[arg(long)]
    beta: Option<f64>,
    /// Constraint slack for the scan rule.
    #[arg(long)]
    gamma: Option<f64>,
    /// Estimator config JSON file (kernel, lambda, tol, max_iter).
    #[arg(long)]
    estimator_config: Option<String>,
}

fn main() -> ExitCode {
    // die quietly when the read end of a pipe closes, like other unix tools
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Oracle { scenario, alphas } => cmd_oracle(&scenario, &alphas),
        Command::Fit(args) => cmd_fit(&args),
        Command::Evaluate { fit, replicates, out } => cmd_evaluate(&fit, replicates, out),
        Command::Sweep { plan, workers } => cmd_sweep(&plan, workers),
        Command::Verify => Ok(cmd_verify()),
    }
}

/// CDR_SEED wins over any seed from the command line or a plan file.
fn master_seed(cli_seed: u64) -> Result<u64> {
    match std::env::var("CDR_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| {
            CdrError::Scenario(format!("CDR_SEED must be an unsigned integer, got '{text}'"))
        }),
        Err(_) => Ok(cli_seed),
    }
}

fn build_config(args: &FitArgs) -> Result<EstimatorConfig> {
    let mut cfg = EstimatorConfig::default();
    if let Some(path) = &args.estimator_config {
        cfg = EstimatorConfigFile::from_file(path)?.apply(&cfg)?;
    }
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_oracle(scenario: &str, alphas: &[f64]) -> Result<ExitCode> {
    let sc = Scenario::load(scenario)?;
    println!("scenario {}: {}", sc.name(), sc.description());
    if sc.is_shifted() {
        println!("training law differs from the target; both scores are solved below");
    }
    for &alpha in alphas {
        let sol = optimal_cdr_set(sc.target(), sc.target(), alpha)?;
        println!(
            "alpha {alpha}: threshold {:.6}, tie probability {:.4}, power {:.6}, discovery rate {:.6}",
            sol.classifier.threshold,
            sol.classifier.tie_probability,
            sol.objective,
            sol.constraint,
        );
        if sc.is_shifted() {
            let via_training = optimal_cdr_set(sc.source(), sc.target(), alpha)?;
            let agree = (via_training.objective - sol.objective).abs() <= 1e-9
                && (via_training.constraint - sol.constraint).abs() <= 1e-9;
            println!(
                "  training-law score: threshold {:.6}, same set: {}",
                via_training.classifier.threshold,
                if agree { "yes" } else { "NO" },
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode> {
    let sc = Scenario::load(&args.scenario)?;
    let method = parse_method(&args.method)?;
    let config = build_config(args)?;
    let seed = master_seed(args.seed)?;
    let labeled = sc.source().sample_labeled(args.m, seed)?;
    let unlabeled = sc.target().sample_unlabeled(args.n, unlabeled_stream_seed(seed))?;
    let estimate = estimate_cdr_set(
        sc.target().domain(),
        &labeled,
        &unlabeled,
        args.alpha,
        method,
        &config,
    )?;
    let d = &estimate.diagnostics;
    println!(
        "fitted {} on {} labeled / {} unlabeled samples (seed {seed})",
        args.method, d.labeled_count, d.unlabeled_count
    );
    println!("threshold {:.6}, budget regime {:?}", estimate.threshold, d.regime);
    if d.eps_n > 0.0 {
        println!("concentration width {:.6}", d.eps_n);
    }
    if let Some(fit) = &d.fit {
        println!(
            "solver: {} Newton steps, objective {:.6}, gradient norm {:.2e}, converged: {}",
            fit.iterations, fit.final_objective, fit.final_grad_norm, fit.converged
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: &FitArgs, replicates: usize, out: Option<String>) -> Result<ExitCode> {
    let estimator = match &args.estimator_config {
        Some(path) => Some(EstimatorConfigFile::from_file(path)?),
        None => None,
    };
    let plan = ExperimentPlan {
        scenario: args.scenario.clone(),
        methods: vec![args.method.clone()],
        ladder: vec![[args.m, args.n]],
        alphas: vec![args.alpha],
        replicates,
        seed: master_seed(args.seed)?,
        out,
        beta: args.beta,
        gamma: args.gamma,
        estimator,
    };
    let records = run_plan_with(&plan, RunOptions::default())?;
    print_records(&records);
    if let Some(path) = &plan.out {
        println!("wrote {} rows to {path}", records.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(plan_path: &str, workers: usize) -> Result<ExitCode> {
    let mut plan = ExperimentPlan::from_file(plan_path)?;
    plan.seed = master_seed(plan.seed)?;
    let records = run_plan_with(&plan, RunOptions { workers })?;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    println!(
        "{} rows ({} ok, {} failed) across {} cells",
        records.len(),
        records.len() - failed,
        failed,
        plan.methods.len() * plan.ladder.len() * plan.alphas.len(),
    );
    if failed > 0 {
        for r in records.iter().filter(|r| r.status != "ok").take(5) {
            println!(
                "  {} {} m={} n={} alpha={} seed={}: {}",
                r.scenario, r.method, r.m, r.n, r.alpha, r.seed, r.status
            );
        }
    }
    if let Some(path) = &plan.out {
        println!("wrote {path}");
    }
    Ok(ExitCode::SUCCESS)
}

fn print_records(records: &[ExperimentRecord]) {
    for r in records {
        match r.sym_diff_risk {
            Some(risk) => println!(
                "seed {}: sym diff risk {:.6}, power gap {:.6}, discovery rate {:.6}, \
                 size {:.6}, constraint violation {:.6} ({})",
                r.seed,
                risk,
                r.power_gap.unwrap_or(f64::NAN),
                r.discovery_rate.unwrap_or(f64::NAN),
                r.size.unwrap_or(f64::NAN),
                r.constraint_violation.unwrap_or(f64::NAN),
                r.mode.as_deref().unwrap_or(""),
            ),
            None => println!("seed {}: {}", r.seed, r.status),
        }
    }
    let mut risks: Vec<f64> = records.iter().filter_map(|r| r.sym_diff_risk).collect();
    if risks.len() > 1 {
        risks.sort_by(f64::total_cmp);
        println!("median sym diff risk {:.6} over {} replicates", risks[risks.len() / 2], risks.len());
    }
}

fn cmd_verify() -> ExitCode {
    let report = run_verify_suite();
    for check in &report.checks {
        println!(
            "{} {} ({} ms): {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.wall_ms,
            check.detail
        );
    }
    if let Some(warning) = &report.warning {
        println!("warning: {warning}");
    }
    if report.all_passed() {
        println!("all {} checks passed in {} ms", report.checks.len(), report.total_ms);
        ExitCode::SUCCESS
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        println!("{failed} of {} checks failed", report.checks.len());
        ExitCode::FAILURE
    }
}
