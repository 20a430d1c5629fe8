//! Command-line front end. Exit codes: 0 success, 2 invalid input, 1 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use nested_swe::balance::{
    benchmark_momentum, block_cells, fit_cost_model, parse_samples, plan_blocks, samples_to_csv, system_plan,
    BalanceError, CostModel, PlanComparison, PlanStrategy, DEFAULT_ITERS,
};
use nested_swe::grid::config::Scenario;
use nested_swe::grid::kochi::{build_kochi_scaled, Scale};
use nested_swe::grid::validate_system;
use nested_swe::sim::{run_simulation, PlanSource, RunOptions, SimError};

#[derive(Parser)]
#[command(name = "nested-swe", version, about = "Nested-grid shallow-water simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write rasters, plan and timing table.
    Run(RunArgs),
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cost model fitting and decomposition planning.
    #[command(subcommand)]
    Balance(BalanceCommand),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of steps; defaults to the configured duration.
    #[arg(long, conflicts_with = "duration")]
    steps: Option<u64>,
    /// Simulated seconds, rounded to whole steps.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// `equal`, `opt` or `file:PATH`.
    #[arg(long, default_value = "equal")]
    decomp: String,
    /// Cost model for `--decomp opt`; the built-in reference model otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// Write the binary message trace to `trace.bin`.
    #[arg(long)]
    trace: bool,
    /// Run every rank from one thread.
    #[arg(long)]
    sequential: bool,
    /// Seconds a rank waits for a message before giving up.
    #[arg(long, default_value_t = 60.0)]
    stall_timeout: f64,
}

#[derive(Subcommand)]
enum BalanceCommand {
    /// Fit `cost = slope * cells + intercept` to timing samples.
    Fit {
        /// CSV of `cells,microseconds` rows.
        #[arg(long, conflicts_with = "bench", required_unless_present = "bench")]
        samples: Option<PathBuf>,
        /// Time the momentum kernel on this machine instead.
        #[arg(long)]
        bench: bool,
        /// Block side lengths for `--bench`.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,96,128,192,256")]
        sides: Vec<usize>,
        #[arg(long, default_value_t = 15)]
        repeats: usize,
        /// Model file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also save the benchmark samples as CSV.
        #[arg(long)]
        samples_out: Option<PathBuf>,
    },
    /// Compare the equal-cell plan with the optimized plan.
    Optimize {
        #[arg(long, conflicts_with = "kochi", required_unless_present = "kochi")]
        config: Option<PathBuf>,
        /// Built-in Kochi-like inventory at this scale, e.g. `1/1000`.
        #[arg(long)]
        kochi: Option<String>,
        #[arg(long)]
        ranks: usize,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ITERS)]
        iters_phase1: usize,
        #[arg(long, default_value_t = DEFAULT_ITERS)]
        iters_phase2: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ranks per level, summing to `--ranks`, e.g. `1,1,2,4,8`.
        #[arg(long, value_delimiter = ',', conflicts_with = "level")]
        per_level: Option<Vec<usize>>,
        /// Plan only the blocks of this level (1-based).
        #[arg(long)]
        level: Option<usize>,
        #[arg(long, default_value = "balance")]
        out: PathBuf,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_)
            | SimError::Validation(_)
            | SimError::PlanMismatch { .. }
            | SimError::Plan(_)
            | SimError::Topology(_)
            | SimError::Coupling(_) => Failure::Invalid(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<BalanceError> for Failure {
    fn from(e: BalanceError) -> Self {
        match e {
            BalanceError::Io(_) => Failure::Runtime(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn load_model(path: Option<&PathBuf>) -> Result<CostModel, Failure> {
    Ok(match path {
        Some(p) => CostModel::read(p)?,
        None => CostModel::reference(),
    })
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let scenario = Scenario::load(&args.config).map_err(SimError::from)?;
    let steps = match (args.steps, args.duration) {
        (Some(n), _) => n,
        (None, Some(d)) => (d / scenario.config.dt).round().max(0.0) as u64,
        (None, None) => scenario.config.steps(),
    };
    let plan = match args.decomp.as_str() {
        "equal" => PlanSource::EqualCells,
        "opt" => PlanSource::optimized(load_model(args.model.as_ref())?),
        other => match other.strip_prefix("file:") {
            Some(path) => PlanSource::File(PathBuf::from(path)),
            None => return Err(Failure::Invalid(format!("unknown --decomp {other:?}"))),
        },
    };
    let opts = RunOptions {
        steps,
        workers: args.workers,
        plan,
        seed: args.seed,
        out_dir: Some(args.out.clone()),
        snapshot_every: args.snapshot_every,
        trace: args.trace,
        sequential: args.sequential,
        stall_timeout: Duration::from_secs_f64(args.stall_timeout),
    };
    let report = run_simulation(&scenario, &opts)?;
    println!(
        "{} steps on {} workers, {} messages; outputs in {}",
        report.steps,
        report.timings.len(),
        report.messages_sent,
        args.out.display()
    );
    for (rank, t) in report.timings.iter().enumerate() {
        println!("rank {rank}: total {:.3} s, routines {:.3} s", t.total, t.routines());
    }
    Ok(())
}

fn validate(config: PathBuf) -> Result<(), Failure> {
    let scenario = Scenario::load(&config).map_err(SimError::from)?;
    let report = validate_system(&scenario.system, &scenario.config);
    if !report.is_ok() {
        return Err(Failure::Invalid(report.to_string()));
    }
    println!(
        "ok: {} levels, {} blocks, {} cells",
        scenario.system.n_levels(),
        scenario.system.n_blocks(),
        scenario.system.total_cells()
    );
    Ok(())
}

fn balance(cmd: BalanceCommand) -> Result<(), Failure> {
    match cmd {
        BalanceCommand::Fit {
            samples,
            bench: _,
            sides,
            repeats,
            out,
            samples_out,
        } => {
            let data = match samples {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Runtime(e.to_string()))?;
                    parse_samples(&text)?
                }
                None => benchmark_momentum(&sides, repeats, 0),
            };
            if let Some(p) = samples_out {
                std::fs::write(p, samples_to_csv(&data)).map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            let model = fit_cost_model(&data)?;
            match out {
                Some(p) => model.write(&p)?,
                None => print!("{}", model.to_text()),
            }
            Ok(())
        }
        BalanceCommand::Optimize {
            config,
            kochi,
            ranks,
            model,
            iters_phase1,
            iters_phase2,
            seed,
            per_level,
            level,
            out,
        } => {
            let (system, budget) = match (config, kochi) {
                (Some(path), _) => {
                    let sc = Scenario::load(&path).map_err(SimError::from)?;
                    (sc.system, per_level.or(sc.per_level_ranks))
                }
                (None, Some(scale)) => {
                    let Scale(s) = scale
                        .parse()
                        .map_err(|e: nested_swe::grid::GridError| Failure::Invalid(e.to_string()))?;
                    let sys = build_kochi_scaled(s).map_err(|e| Failure::Invalid(e.to_string()))?;
                    (sys, per_level)
                }
                (None, None) => unreachable!("clap requires --config or --kochi"),
            };
            let model = load_model(model.as_ref())?;
            let strategy = PlanStrategy::Optimized {
                model,
                iters_phase1,
                iters_phase2,
                seed,
            };
            let (cells, baseline, optimized) = match level {
                Some(k) => {
                    if k == 0 || k > system.n_levels() {
                        return Err(Failure::Invalid(format!(
                            "--level {k}: system has {} levels",
                            system.n_levels()
                        )));
                    }
                    let cells: Vec<usize> = system.level(k - 1).blocks.iter().map(|b| b.cell_count()).collect();
                    let baseline = plan_blocks(&cells, ranks, &PlanStrategy::EqualCells)?;
                    let optimized = plan_blocks(&cells, ranks, &strategy)?;
                    (cells, baseline, optimized)
                }
                None => (
                    block_cells(&system),
                    system_plan(&system, ranks, budget.as_deref(), &PlanStrategy::EqualCells)?,
                    system_plan(&system, ranks, budget.as_deref(), &strategy)?,
                ),
            };
            let cmp = PlanComparison {
                model,
                cells,
                baseline,
                optimized,
            };
            cmp.write(&out)?;
            print!("{}", cmp.comparison_csv());
            println!("improvement {:.1}%", 100.0 * cmp.improvement());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => validate(config),
        Command::Balance(cmd) => balance(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
