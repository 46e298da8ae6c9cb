mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tepca::allocation::Policy;

#[derive(Parser)]
#[command(
    name = "tepca",
    version,
    about = "Expansion planning and beneficiaries-pay cost allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a case and its scenario file without solving.
    Validate(CaseArgs),
    /// Select representative days and write the block table.
    Cluster {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the expansion MIP and write the plan.
    Plan {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        blocks: BlockArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-solve a plan with fixed lines and write prices, rents and KKT checks.
    Prices {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve counterfactuals for the given scope.
    Counterfactual {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        scope: ScopeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Participant benefits against counterfactuals; writes an allocation input file.
    Benefits {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        scope: ScopeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Allocate investment cost from a benefit file.
    Allocate {
        /// Benefit file written by `benefits` or `fixtures`.
        #[arg(long)]
        benefits: PathBuf,
        /// `portfolio`, `project:<line>`, or `all` (every project plus the portfolio).
        #[arg(long, default_value = "portfolio")]
        scope: String,
        #[arg(long, default_value = "load-only")]
        policy: Policy,
        #[arg(long)]
        compensate_losers: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Out-of-sample evaluation of a plan over the uncertainty grid.
    Sweep(SweepArgs),
    /// Write the eight-bus study benefit vectors as allocation inputs.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect the tables in an output directory into one report.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args, Clone)]
struct CaseArgs {
    /// Case file, case directory, or the name of a directory under --cases-dir.
    #[arg(long)]
    case: String,
    /// Scenario file; defaults to scenarios.toml beside the case file.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long, default_value = "cases")]
    cases_dir: PathBuf,
    /// Accept trees that branch below depth 2.
    #[arg(long)]
    allow_multistage: bool,
}

#[derive(Args, Clone)]
struct BlockArgs {
    /// Representative days.
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative MIP gap.
    #[arg(long, default_value_t = 0.005)]
    gap: f64,
    /// Seconds per solve.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args, Clone)]
struct ScopeArgs {
    /// `portfolio`, `projects`, `project:<line>`, or a list `l2,l3:q300`.
    #[arg(long, default_value = "portfolio")]
    scope: String,
    /// Counterfactual option: 1 fixes generation, 2 re-optimizes it, 3 frees other lines.
    #[arg(long, default_value_t = 2)]
    option: u8,
    /// With option 3, exclude the removed lines at every node.
    #[arg(long)]
    all_nodes: bool,
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[command(flatten)]
    case: CaseArgs,
    #[arg(long)]
    plan: PathBuf,
    /// Plan to compare against: the portfolio counterfactual, the status quo,
    /// or the plan itself.
    #[arg(long, default_value = "counterfactual")]
    against: String,
    #[command(flatten)]
    scope: ScopeArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Use only the first N grid dimensions.
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long, default_value = "load-only")]
    policy: Policy,
    /// Disallow recourse generation builds and retirements.
    #[arg(long)]
    frozen_fleet: bool,
    /// Later-stage line additions, `line:increment`; repeatable.
    #[arg(long = "add")]
    added: Vec<String>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Ex ante allocation JSON from `allocate`; computed from the plan when absent.
    #[arg(long)]
    ex_ante: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(case) => commands::validate(&case),
        Command::Cluster { case, blocks, out } => commands::cluster(&case, &blocks, &out),
        Command::Plan {
            case,
            blocks,
            solver,
            out,
        } => commands::plan(&case, &blocks, &solver, &out),
        Command::Prices { case, plan, out } => commands::prices(&case, &plan, &out),
        Command::Counterfactual {
            case,
            plan,
            scope,
            solver,
            out,
        } => commands::counterfactual(&case, &plan, &scope, &solver, &out),
        Command::Benefits {
            case,
            plan,
            scope,
            solver,
            out,
        } => commands::benefits(&case, &plan, &scope, &solver, &out),
        Command::Allocate {
            benefits,
            scope,
            policy,
            compensate_losers,
            out,
        } => commands::allocate(&benefits, &scope, policy, compensate_losers, &out),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Fixtures { out } => commands::fixtures(&out),
        Command::Report { dir } => commands::report(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code)
        }
    }
}
