//! Command-line front end: `simulate`, `bounds`, `sweep` and `oracle`.
//!
//! Reports go to standard output (or `--out`); logs go to standard error.
//! Exit codes: 0 success, 2 usage or domain error, 3 instance-size guard.

pub mod grid;
pub mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gt_core::bounds::{bound_report, BoundMode};
use gt_core::harness::{
    pooled_standard_error, run_experiment, sweep, DecoderKind, DeltaMode, ExperimentConfig,
};
use gt_core::{AlphaMode, ProblemParams};

use crate::grid::Grid;
use crate::report::{write_object, write_rows, BoundsRow, Format, SimulateRecord, SweepCsvRow};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_GUARD: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "gt", version, about = "Group testing under dilution noise: simulation, decoding and bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the exact-recovery error probability at one parameter point.
    Simulate(SimulateArgs),
    /// Evaluate achievability and converse bounds.
    Bounds(BoundsArgs),
    /// Run simulations and bounds over a grid in q or N.
    Sweep(SweepArgs),
    /// Compare NCOMP with exhaustive ML decoding on matched instances.
    Oracle(SimulateArgs),
}

/// `adaptive` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaArg(pub AlphaMode);

impl FromStr for AlphaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adaptive" => Ok(Self(AlphaMode::NoiseAdaptive)),
            _ => s
                .parse::<f64>()
                .map(|a| Self(AlphaMode::Fixed(a)))
                .map_err(|_| format!("expected `adaptive` or a number, got `{s}`")),
        }
    }
}

/// `explicit`, `asymptotic` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaArg(pub DeltaMode);

impl FromStr for DeltaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "explicit" => Ok(Self(DeltaMode::Explicit)),
            "asymptotic" => Ok(Self(DeltaMode::Asymptotic)),
            _ => s
                .parse::<f64>()
                .map(|v| Self(DeltaMode::Manual(v)))
                .map_err(|_| format!("expected `explicit`, `asymptotic` or a number, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderArg {
    Ncomp,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Asymptotic,
}

impl From<ModeArg> for BoundMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => BoundMode::ExactFiniteN,
            ModeArg::Asymptotic => BoundMode::Asymptotic,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub q: f64,
    /// Number of tests.
    #[arg(long = "N")]
    pub tests: usize,
    #[arg(long, default_value = "adaptive")]
    pub alpha: AlphaArg,
    #[arg(long, default_value = "explicit", allow_hyphen_values = true)]
    pub delta: DeltaArg,
    #[arg(long, value_enum, default_value = "ncomp")]
    pub decoder: DecoderArg,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, env = "GT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Reuse a single design matrix for every trial.
    #[arg(long)]
    pub fixed_design: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl SimulateArgs {
    fn config(&self, decoder: DecoderArg) -> gt_core::Result<ExperimentConfig> {
        let params = ProblemParams::new(self.n, self.d, self.q, self.alpha.0, self.tests)?;
        let decoder = match decoder {
            DecoderArg::Ncomp => DecoderKind::Ncomp { delta: self.delta.0 },
            DecoderArg::Ml => DecoderKind::Ml,
        };
        let mut config = ExperimentConfig::new(params, decoder, self.trials, self.seed);
        config.parallelism = self.jobs;
        config.fixed_design = self.fixed_design;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Item counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Defective counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    /// Dilution levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub q: Vec<f64>,
    #[arg(long, default_value = "adaptive")]
    pub alpha: AlphaArg,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long = "q-grid", conflicts_with = "n_grid", required_unless_present = "n_grid")]
    pub q_grid: Option<Grid>,
    #[arg(long = "N-grid")]
    pub n_grid: Option<Grid>,
    /// Space grid points geometrically instead of linearly.
    #[arg(long)]
    pub log_grid: bool,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Fixed dilution level when sweeping N.
    #[arg(long, required_unless_present = "q_grid")]
    pub q: Option<f64>,
    /// Fixed test count when sweeping q.
    #[arg(long = "N", required_unless_present = "n_grid")]
    pub tests: Option<usize>,
    #[arg(long, default_value = "adaptive")]
    pub alpha: AlphaArg,
    #[arg(long, default_value = "explicit", allow_hyphen_values = true)]
    pub delta: DeltaArg,
    #[arg(long, value_enum, default_value = "ncomp")]
    pub decoder: DecoderArg,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, env = "GT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub fixed_design: bool,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug)]
pub enum CliError {
    Domain(String),
    Guard(String),
    Io(String),
}

impl From<gt_core::Error> for CliError {
    fn from(e: gt_core::Error) -> Self {
        if e.is_guard() {
            CliError::Guard(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

impl From<Box<dyn std::error::Error + Send + Sync>> for CliError {
    fn from(e: Box<dyn std::error::Error + Send + Sync>) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Guard(_) => EXIT_GUARD,
            CliError::Domain(_) | CliError::Io(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Domain(m) => write!(f, "error: {m}"),
            CliError::Guard(m) => write!(f, "guard: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

fn sink(output: &OutputArgs) -> Result<Box<dyn Write>, CliError> {
    Ok(match &output.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = args.config(args.decoder)?;
    let stats = run_experiment(&config)?;
    log::info!("{} failures in {} trials", stats.failures, stats.trials);
    let record = SimulateRecord::new(&config, config.resolved_delta()?, &stats)?;
    let mut out = sink(&args.output)?;
    match args.output.format {
        Format::Csv => write_rows(&[record.flat()], Format::Csv, &mut out)?,
        Format::Json => write_object(&record, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &n in &args.n {
        for &d in &args.d {
            for &q in &args.q {
                let report = bound_report(n, d, q, args.alpha.0, args.mode.into())?;
                rows.push(BoundsRow::from(&report));
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Domain("no parameter points given".into()));
    }
    let mut out = sink(&args.output)?;
    write_rows(&rows, args.output.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let points = |grid: &Grid| grid.points(args.log_grid).map_err(CliError::Domain);
    let mut configs = Vec::new();
    let mut push = |q: f64, tests: usize| -> Result<(), CliError> {
        let sim = SimulateArgs {
            n: args.n,
            d: args.d,
            q,
            tests,
            alpha: args.alpha,
            delta: args.delta,
            decoder: args.decoder,
            trials: args.trials,
            seed: args.seed,
            jobs: args.jobs,
            fixed_design: args.fixed_design,
            output: args.output.clone(),
        };
        configs.push(sim.config(args.decoder)?);
        Ok(())
    };
    match (&args.q_grid, &args.n_grid) {
        (Some(grid), None) => {
            let tests = args.tests.ok_or_else(|| CliError::Domain("--N is required with --q-grid".into()))?;
            for q in points(grid)? {
                push(q, tests)?;
            }
        }
        (None, Some(grid)) => {
            let q = args.q.ok_or_else(|| CliError::Domain("--q is required with --N-grid".into()))?;
            for tests in points(grid)? {
                if tests < 0.0 {
                    return Err(CliError::Domain(format!("negative test count {tests} in grid")));
                }
                push(q, tests.round() as usize)?;
            }
        }
        _ => return Err(CliError::Domain("give exactly one of --q-grid or --N-grid".into())),
    }
    let rows: Vec<SweepCsvRow> = sweep(&configs, args.mode.into())?.iter().map(SweepCsvRow::from).collect();
    let mut out = sink(&args.output)?;
    write_rows(&rows, args.output.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_oracle(args: &SimulateArgs) -> Result<(), CliError> {
    let ml_config = args.config(DecoderArg::Ml)?;
    // validate the guard before spending time on NCOMP
    ml_config.validate()?;
    let ncomp_config = args.config(DecoderArg::Ncomp)?;
    let ncomp = run_experiment(&ncomp_config)?;
    let ml = run_experiment(&ml_config)?;
    let pooled = pooled_standard_error(&ncomp, &ml);
    let margin = ml.p_e_hat - ncomp.p_e_hat;
    log::info!(
        "ML {} vs NCOMP {} failures; pooled SE {pooled:.4}; ML - NCOMP = {margin:.4} ({})",
        ml.failures,
        ncomp.failures,
        if margin <= 2.0 * pooled { "within 2 SE" } else { "ML worse by more than 2 SE" }
    );
    let rows = [
        SimulateRecord::new(&ncomp_config, ncomp_config.resolved_delta()?, &ncomp)?.flat(),
        SimulateRecord::new(&ml_config, None, &ml)?.flat(),
    ];
    let mut out = sink(&args.output)?;
    write_rows(&rows, args.output.format, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

/// Parses arguments, runs, and maps failures onto exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version go to stdout with status 0
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
