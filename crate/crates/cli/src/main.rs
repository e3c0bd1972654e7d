use clap::{Args, Parser, Subcommand};
use crrr::bootstrap::{SchemeKind, WeightScheme};
use crrr::dr::GridSpec;
use crrr::pipeline::PipelineConfig;
use crrr::simulate::{run_monte_carlo, DgpSpec, McConfig};
use crrr::{Link, Method};
use crrr_cli::config::{BootstrapOptions, RunConfig, DEFAULT_BOOTSTRAP_REPS, DEFAULT_TAIL_M, DEFAULT_TRANSITION_BINS};
use crrr_cli::error::{exit_code, CliError, Result};
use crrr_cli::ingest::ColumnRoles;
use crrr_cli::run::{self, RanksConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};

const EXIT_CODES: &str = "Exit codes:
  0  success
  1  other failure (I/O, serialization)
  2  invalid configuration or command line
  3  invalid or degenerate data
  4  a model fit did not converge
  5  the bootstrap failed";

#[derive(Parser)]
#[command(name = "crrr", version, about = "Conditional rank-rank regression", after_help = EXIT_CODES)]
struct Cli {
    /// Worker threads (default: all available cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pooled estimates, with bootstrap inference when a seed is given.
    Estimate(EstimateArgs),
    /// Estimates within each level of the group column.
    Subgroup(EstimateArgs),
    /// Transition matrices of marginal and conditional ranks.
    Transition(EstimateArgs),
    /// Writes the input with marginal and conditional ranks appended.
    Ranks(RanksArgs),
    /// Draws a synthetic data set.
    Simulate(SimulateArgs),
    /// Monte Carlo study of the full pipeline on the bivariate normal design.
    Mc(McArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Outcome column of the later generation.
    #[arg(long, short)]
    y: Option<String>,
    /// Outcome column of the earlier generation.
    #[arg(long, short)]
    w: Option<String>,
    /// Numeric covariate columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Categorical column defining subgroups.
    #[arg(long)]
    group: Option<String>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// logit or probit.
    #[arg(long, default_value = "logit")]
    link: Link,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    #[arg(long, default_value_t = 0.01)]
    grid_lo: f64,
    #[arg(long, default_value_t = 0.99)]
    grid_hi: f64,
    /// Use every distinct observed value as a threshold.
    #[arg(long)]
    full_grid: bool,
    /// Restricted (scale-only) tail models beyond the grid.
    #[arg(long)]
    tails: bool,
    #[arg(long, default_value_t = DEFAULT_TAIL_M)]
    tail_m: usize,
    /// Covariates for the model of y (default: all).
    #[arg(long, value_delimiter = ',')]
    y_covariates: Option<Vec<String>>,
    /// Covariates for the model of w (default: all).
    #[arg(long, value_delimiter = ',')]
    w_covariates: Option<Vec<String>>,
}

impl ModelArgs {
    fn grid(&self) -> GridSpec {
        if self.full_grid {
            GridSpec::AllObserved
        } else {
            GridSpec::Quantiles {
                n_points: self.grid_points,
                lo_order: self.grid_lo,
                hi_order: self.grid_hi,
            }
        }
    }
}

#[derive(Args, Clone)]
struct BootArgs {
    /// Seed for the bootstrap weights; the bootstrap runs only when it is set.
    #[arg(long)]
    seed: Option<u64>,
    /// Replicates (default 500); 0 turns the bootstrap off.
    #[arg(long)]
    bootstrap_reps: Option<usize>,
    /// empirical, weighted-exponential, wild, m-of-n or subsampling.
    #[arg(long, default_value = "empirical")]
    bootstrap_scheme: SchemeKind,
    /// Subsample size for m-of-n and subsampling.
    #[arg(long)]
    bootstrap_m: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl BootArgs {
    fn options(&self) -> Result<Option<BootstrapOptions>> {
        match (self.seed, self.bootstrap_reps) {
            (_, Some(0)) => Ok(None),
            (None, Some(_)) => Err(CliError::Config("the bootstrap needs an explicit --seed".into())),
            (None, None) => Ok(None),
            (Some(seed), reps) => Ok(Some(BootstrapOptions {
                scheme: WeightScheme::new(self.bootstrap_scheme, self.bootstrap_m),
                replicates: reps.unwrap_or(DEFAULT_BOOTSTRAP_REPS),
                alpha: self.alpha,
                seed: Some(seed),
            })),
        }
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// JSON report path (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Directory for CSV versions of the tables.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    boot: BootArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Estimators, comma separated (default: the four CRRR variants, RRR and RRRX-A).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Also compute transition matrices.
    #[arg(long)]
    transitions: bool,
    #[arg(long, default_value_t = DEFAULT_TRANSITION_BINS)]
    bins: usize,
    /// Read rank columns written by `crrr ranks` and only run the estimators.
    #[arg(long, conflicts_with = "input")]
    ranks_from: Option<PathBuf>,
}

#[derive(Args)]
struct RanksArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// CSV path (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Design {
    /// Two-group design with a binary covariate.
    Conceptual,
    /// Bivariate normal design with correlation c.
    Bivariate,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    design: Design,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Group mean shift of the conceptual design.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Correlation of the bivariate design.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Append the true conditional and marginal ranks.
    #[arg(long)]
    oracle_ranks: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    /// Cell as c:n, repeatable.
    #[arg(long = "cell", value_parser = parse_cell, required = true)]
    cells: Vec<(f64, usize)>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Bootstrap replicates per Monte Carlo replicate; 0 skips coverage.
    #[arg(long, default_value_t = 100)]
    boot_reps: usize,
    #[arg(long, default_value = "crrr_corr")]
    method: Method,
    #[arg(long, default_value = "probit")]
    link: Link,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    #[arg(long, default_value_t = 0.01)]
    grid_lo: f64,
    #[arg(long, default_value_t = 0.99)]
    grid_hi: f64,
    #[arg(long, default_value = "empirical")]
    bootstrap_scheme: SchemeKind,
    #[arg(long)]
    bootstrap_m: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    seed: u64,
    /// JSON report path (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// CSV table path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_cell(s: &str) -> std::result::Result<(f64, usize), String> {
    let (c, n) = s.split_once(':').ok_or_else(|| format!("expected c:n, got {s:?}"))?;
    let c = c.trim().parse().map_err(|_| format!("bad correlation in {s:?}"))?;
    let n = n.trim().parse().map_err(|_| format!("bad sample size in {s:?}"))?;
    Ok((c, n))
}

fn required(value: &Option<String>, flag: &str) -> Result<String> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))
}

fn run_config(data: &DataArgs, model: &ModelArgs) -> Result<RunConfig> {
    let input = data
        .input
        .clone()
        .ok_or_else(|| CliError::Config("--input is required".into()))?;
    let roles = ColumnRoles {
        y: required(&data.y, "y")?,
        w: required(&data.w, "w")?,
        covariates: data.covariates.clone(),
        group: data.group.clone(),
    };
    let mut config = RunConfig::new(input, roles);
    config.link = model.link;
    config.grid = model.grid();
    config.tails = model.tails;
    config.tail_m = model.tail_m;
    config.y_covariates = model.y_covariates.clone();
    config.w_covariates = model.w_covariates.clone();
    Ok(config)
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    emit_text(&text, path)
}

fn emit_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => run::write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn log_warnings(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Flavor {
    Estimate,
    Subgroup,
    Transition,
}

fn estimate(args: &EstimateArgs, flavor: Flavor) -> Result<()> {
    let methods = match (&args.methods, flavor) {
        (Some(m), _) => m.clone(),
        (None, Flavor::Transition) => Vec::new(),
        (None, _) => Method::DEFAULT.to_vec(),
    };
    let subgroups = flavor == Flavor::Subgroup || (flavor == Flavor::Estimate && args.data.group.is_some());
    if flavor == Flavor::Subgroup && args.data.group.is_none() {
        return Err(CliError::Config("subgroup needs --group".into()));
    }
    let bins = (flavor == Flavor::Transition || args.transitions).then_some(args.bins);

    if let Some(ranks_from) = &args.ranks_from {
        if args.boot.options()?.is_some() {
            return Err(CliError::Config(
                "the bootstrap refits the ranks and cannot run from --ranks-from".into(),
            ));
        }
        let config = RanksConfig {
            ranks_from: ranks_from.clone(),
            covariates: args.data.covariates.clone(),
            group: args.data.group.clone(),
            methods,
            subgroups,
            transition_bins: bins,
        };
        let report = run::run_from_ranks(&config)?;
        log_warnings(&report.warnings);
        if let Some(dir) = &args.out.csv_dir {
            run::write_tables(&report, dir)?;
        }
        return emit_json(&report, args.out.output.as_deref());
    }

    let mut config = run_config(&args.data, &args.model)?;
    config.methods = methods;
    config.subgroups = subgroups;
    config.transition_bins = bins;
    config.bootstrap = args.boot.options()?;
    if config.methods.is_empty() && bins.is_none() {
        return Err(CliError::Config("no methods requested".into()));
    }
    let report = run::run_estimate(&config)?;
    log_warnings(&report.warnings);
    if let Some(dir) = &args.out.csv_dir {
        run::write_tables(&report, dir)?;
    }
    emit_json(&report, args.out.output.as_deref())
}

fn ranks(args: &RanksArgs) -> Result<()> {
    let config = run_config(&args.data, &args.model)?;
    let (text, warnings) = run::export_ranks(&config)?;
    log_warnings(&warnings);
    emit_text(&text, args.output.as_deref())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = match args.design {
        Design::Conceptual => DgpSpec::conceptual(args.delta, args.n, args.seed),
        Design::Bivariate => DgpSpec::bivariate(args.c, args.n, args.seed),
    };
    let text = crrr_cli::simulate::simulate_csv(&spec, args.oracle_ranks)?;
    emit_text(&text, args.output.as_deref())
}

fn mc(args: &McArgs) -> Result<()> {
    let config = McConfig {
        pipeline: PipelineConfig {
            grid: GridSpec::Quantiles {
                n_points: args.grid_points,
                lo_order: args.grid_lo,
                hi_order: args.grid_hi,
            },
            link: args.link,
            ..PipelineConfig::default()
        },
        method: args.method,
        boot_reps: args.boot_reps,
        scheme: WeightScheme::new(args.bootstrap_scheme, args.bootstrap_m),
        alpha: args.alpha,
        seed: args.seed,
    };
    let report = run_monte_carlo(&args.cells, args.reps, &config)?;
    if let Some(path) = &args.csv {
        run::write_file(path, &report.to_csv())?;
    }
    emit_json(&report, args.output.as_deref())
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Estimate(a) => estimate(a, Flavor::Estimate),
        Command::Subgroup(a) => estimate(a, Flavor::Subgroup),
        Command::Transition(a) => estimate(a, Flavor::Transition),
        Command::Ranks(a) => ranks(a),
        Command::Simulate(a) => simulate(a),
        Command::Mc(a) => mc(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CRRR_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(()) => exit_code::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
