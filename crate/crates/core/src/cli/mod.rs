//! Command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 unconverged
//! exact solve, 4 unwritable output.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use crate::montecarlo::{simulate, SimSpec};
use crate::optimize::{budget_from_db, solve_epa, solve_exact, solve_gpp, AllocationMethod, SolverReport};
use crate::outage::{outage_profile, ArqCoefficient, OutageMethod, PowerSchedule, Scheme, SystemConfig};

mod sweep;

pub use sweep::{run_sweep, BudgetGrid, ResultRow, SweepSpec, SweepSummary, CSV_FIXED_COLUMNS};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "IMIMO_THREADS";

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNCONVERGED: i32 = 3;
pub const EXIT_UNWRITABLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "imimo", version, about = "Outage analysis and power allocation for IMIMO ARQ / HARQ links")]
pub struct Cli {
    /// Print records as JSON instead of key=value lines.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-round outage and average energy of a given power schedule.
    Outage(OutageArgs),
    /// Solve for a power schedule under an energy budget.
    Optimize(OptimizeArgs),
    /// Run a budget sweep described by a TOML file and write CSV.
    Sweep(SweepArgs),
    /// Monte Carlo estimate of the outage profile.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Scheme,
    /// Receive antennas N.
    #[arg(long = "n")]
    pub num_rx: u32,
    /// Target rate R in bits/s/Hz.
    #[arg(long)]
    pub rate: f64,
    /// ARQ asymptotic coefficient convention.
    #[arg(long, default_value = "series", value_parser = parse_arq_coefficient)]
    pub arq_coefficient: ArqCoefficient,
}

#[derive(Debug, Args)]
pub struct OutageArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    /// Rounds L; defaults to the number of powers.
    #[arg(long = "l")]
    pub rounds: Option<usize>,
    /// Comma-separated linear powers P1,...,PL.
    #[arg(long, value_parser = parse_powers)]
    pub powers: PowerList,
    #[arg(long, default_value = "exact", value_parser = parse_outage_method)]
    pub method: OutageMethod,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    #[arg(long = "l")]
    pub rounds: usize,
    #[arg(long, value_parser = parse_allocation_method)]
    pub method: AllocationMethod,
    /// Linear energy budget.
    #[arg(long, conflicts_with = "energy_db", required_unless_present = "energy_db")]
    pub energy: Option<f64>,
    /// Energy budget in dB.
    #[arg(long)]
    pub energy_db: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep description (TOML).
    pub config: PathBuf,
    /// Overrides the output path of the config file.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    #[arg(long = "l")]
    pub rounds: Option<usize>,
    #[arg(long, value_parser = parse_powers)]
    pub powers: PowerList,
    #[arg(long, allow_negative_numbers = true)]
    pub trials: i64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; the result does not depend on this.
    #[arg(long, env = THREADS_ENV)]
    pub workers: Option<usize>,
}

/// Parsed `--powers` list.
#[derive(Debug, Clone)]
pub struct PowerList(pub Vec<f64>);

fn parse_powers(s: &str) -> Result<PowerList, String> {
    let powers = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", t.trim())))
        .collect::<Result<Vec<_>, _>>()?;
    PowerSchedule::new(powers.clone()).map_err(|e| e.to_string())?;
    Ok(PowerList(powers))
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_arq_coefficient(s: &str) -> Result<ArqCoefficient, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_outage_method(s: &str) -> Result<OutageMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_allocation_method(s: &str) -> Result<AllocationMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::UnsupportedDimension { .. } | Error::UnsupportedScheme(_) => EXIT_USAGE,
            Error::NumericalDomain { .. } | Error::Internal(_) => EXIT_FAILURE,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Round-trip-safe formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Output of one subcommand: ordered fields, rendered as `key=value` lines or JSON.
struct Record {
    fields: Vec<(String, serde_json::Value, String)>,
}

impl Record {
    fn new() -> Self {
        Record { fields: Vec::new() }
    }

    fn text(&mut self, key: &str, value: &str) {
        self.fields.push((key.into(), json!(value), value.into()));
    }

    fn num(&mut self, key: &str, value: f64) {
        self.fields.push((key.into(), json!(value), fmt_f64(value)));
    }

    fn int(&mut self, key: &str, value: u64) {
        self.fields.push((key.into(), json!(value), value.to_string()));
    }

    fn flag(&mut self, key: &str, value: bool) {
        self.fields.push((key.into(), json!(value), value.to_string()));
    }

    fn series(&mut self, prefix: &str, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.num(&format!("{prefix}{}", i + 1), *v);
        }
    }

    fn write(&self, out: &mut dyn Write, as_json: bool) -> std::io::Result<()> {
        if as_json {
            let map: serde_json::Map<String, serde_json::Value> =
                self.fields.iter().map(|(k, v, _)| (k.clone(), v.clone())).collect();
            writeln!(out, "{}", serde_json::Value::Object(map))
        } else {
            for (k, _, text) in &self.fields {
                writeln!(out, "{k}={text}")?;
            }
            Ok(())
        }
    }
}

fn link_config(link: &LinkArgs, rounds: usize, budget: f64) -> Result<SystemConfig, CliError> {
    let config = SystemConfig::new(link.scheme, link.num_rx, rounds, link.rate, budget)?;
    Ok(config.with_arq_coefficient(link.arq_coefficient))
}

fn schedule_for(rounds: Option<usize>, powers: &PowerList) -> Result<(usize, PowerSchedule), CliError> {
    let count = powers.0.len();
    let rounds = rounds.unwrap_or(count);
    if rounds != count {
        return Err(CliError::usage(format!("--l is {rounds} but --powers lists {count} values")));
    }
    Ok((rounds, PowerSchedule::new(powers.0.clone())?))
}

fn cmd_outage(args: &OutageArgs) -> Result<(Record, i32), CliError> {
    let (rounds, schedule) = schedule_for(args.rounds, &args.powers)?;
    let config = link_config(&args.link, rounds, 1.0)?;
    let profile = outage_profile(&config, &schedule, args.method)?;
    let mut r = Record::new();
    r.text("scheme", config.scheme.tag());
    r.text("method", &args.method.to_string());
    r.series("p_out_", &profile.per_round_outage);
    r.num("avg_energy", profile.avg_energy);
    Ok((r, 0))
}

fn report_record(r: &mut Record, report: &SolverReport) {
    r.text("method", report.method.tag());
    r.series("P", report.schedule.powers());
    r.num("objective", report.objective);
    r.text("objective_evaluator", &report.evaluator.to_string());
    r.num("avg_energy", report.avg_energy);
    r.num("kkt_residual", report.kkt_residual);
    r.int("evaluations", report.evaluations);
    r.flag("converged", report.converged);
    r.int("starts_tried", u64::from(report.starts_tried));
}

/// Runs one allocation method.
pub fn solve(config: &SystemConfig, method: AllocationMethod) -> crate::Result<SolverReport> {
    match method {
        AllocationMethod::Exact => solve_exact(config),
        AllocationMethod::Gpp => solve_gpp(config),
        AllocationMethod::Epa => solve_epa(config, OutageMethod::Exact),
    }
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<(Record, i32), CliError> {
    let budget = match (args.energy, args.energy_db) {
        (Some(e), _) => e,
        (None, Some(db)) => budget_from_db(db),
        (None, None) => return Err(CliError::usage("one of --energy or --energy-db is required")),
    };
    let config = link_config(&args.link, args.rounds, budget)?;
    let report = solve(&config, args.method)?;
    let mut r = Record::new();
    r.text("scheme", config.scheme.tag());
    r.num("energy_budget", budget);
    report_record(&mut r, &report);
    let code = if report.converged { 0 } else { EXIT_UNCONVERGED };
    Ok((r, code))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(Record, i32), CliError> {
    if args.trials <= 0 {
        return Err(CliError::usage(format!("--trials must be positive, got {}", args.trials)));
    }
    let (rounds, schedule) = schedule_for(args.rounds, &args.powers)?;
    let config = link_config(&args.link, rounds, 1.0)?;
    let workers = args.workers.unwrap_or_else(default_threads);
    let result = simulate(&SimSpec { config, schedule, trials: args.trials as u64, seed: args.seed, workers })?;
    let mut r = Record::new();
    r.text("scheme", args.link.scheme.tag());
    r.int("trials", result.trials_used);
    r.int("seed", args.seed);
    r.series("p_out_", &result.per_round_outage_estimate);
    r.series("std_error_", &result.per_round_std_error);
    r.num("avg_energy", result.avg_energy_estimate);
    Ok((r, 0))
}

fn cmd_sweep(args: &SweepArgs, err: &mut dyn Write) -> Result<(Record, i32), CliError> {
    let mut spec = SweepSpec::from_file(&args.config)?;
    if let Some(path) = &args.output {
        spec.output = path.clone();
    }
    let threads = args.threads.unwrap_or_else(default_threads);
    let summary = run_sweep(&spec, threads)?;
    if summary.unconverged > 0 {
        let _ = writeln!(err, "warning: {} exact solve(s) did not converge", summary.unconverged);
    }
    let mut r = Record::new();
    r.text("output", &spec.output.display().to_string());
    r.int("rows", summary.rows as u64);
    r.int("unconverged", summary.unconverged as u64);
    Ok((r, 0))
}

pub(crate) fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Parses `args` (including the program name) and runs the command, writing
/// records to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Outage(a) => cmd_outage(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a, err),
    };
    match result {
        Ok((record, code)) => {
            if let Err(e) = record.write(out, cli.json) {
                let _ = writeln!(err, "error: cannot write output: {e}");
                return EXIT_UNWRITABLE;
            }
            if code == EXIT_UNCONVERGED {
                let _ = writeln!(err, "warning: the solver did not reach the KKT tolerance");
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
