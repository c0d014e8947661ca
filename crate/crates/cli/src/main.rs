//! `regenbound`: bounds on the first time an M/G/1 or M/M/1 queue reaches a
//! level, and Monte Carlo checks of those bounds.
//!
//! Exit codes: 0 on success (including an uninformative verification),
//! 2 when verification fails, 1 on configuration or numerical errors.

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use regenbound_core::{Clock, MomentSource, ServiceDistribution};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use config::{defaults, parse_count, parse_distribution, BoundChoice, Command};
use error::CliError;

#[derive(Parser)]
#[command(name = "regenbound", version, about, max_term_width = 100)]
struct Cli {
    /// Worker threads for simulations (all cores when unset). Results do
    /// not depend on it.
    #[arg(long, global = true, env = "REGENBOUND_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Bounds for the M/M/1 queue from closed forms
    Mm1(Mm1Args),
    /// Bounds for an M/G/1 queue from the taboo linear systems
    Mg1(Mg1Args),
    /// Bounds for geometric sums of i.i.d. terms, optionally simulated
    Geomsum(GeomsumArgs),
    /// Simulate regeneration cycles and report split statistics
    Simulate(SimulateArgs),
    /// Compare bounds with the simulated first-passage law; exit 2 on failure
    Verify(VerifyArgs),
    /// Run whatever command a config file names
    Run(RunArgs),
    /// Print the JSON schema for config files
    Schema,
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

#[derive(Args, Serialize)]
struct Common {
    /// JSON config file (or a saved report); flags given here override it
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct Level {
    /// Level u whose first passage is bounded
    #[arg(long, short = 'u')]
    level: Option<usize>,
    /// Comma-separated scaled times x in (0, 1) [default: 0.2,0.4,0.6,0.8]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
}

#[derive(Args, Serialize)]
struct Mm1Model {
    /// Arrival rate
    #[arg(long)]
    lambda: Option<f64>,
    /// Service rate
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args, Serialize)]
struct QueueModel {
    /// Arrival rate
    #[arg(long)]
    lambda: Option<f64>,
    /// Exponential service rate (shorthand for --service exp:MU)
    #[arg(long, conflicts_with = "service")]
    mu: Option<f64>,
    /// Service law: exp:RATE, det:VALUE, erlang:K,RATE, uniform:LO,HI,
    /// hyperexp:W/RATE,... or a JSON object
    #[arg(long, value_parser = parse_distribution)]
    service: Option<ServiceDistribution>,
}

#[derive(Args, Serialize)]
struct Moments {
    /// How split-cycle moments are obtained: exact, envelope, monte-carlo
    #[arg(long, default_value = "exact", value_parser = parse_serde::<MomentSource>)]
    mode: MomentSource,
    /// Order of the extra cycle moment E T^gamma (> 2)
    #[arg(long, default_value_t = defaults::GAMMA)]
    gamma: f64,
    /// Known E T^gamma; simulated when omitted
    #[arg(long)]
    m_gamma: Option<f64>,
    /// Cycles simulated for Monte Carlo inputs
    #[arg(long, default_value_t = defaults::CYCLES, value_parser = parse_count)]
    cycles: u64,
    #[arg(long, default_value_t = defaults::SEED)]
    seed: u64,
    /// Confidence multiplier for simulated inputs and verification
    #[arg(long, default_value_t = defaults::Z)]
    z: f64,
    /// Clock for the mean time to reach the level: continuous, embedded
    #[arg(long, default_value = "continuous", value_parser = parse_serde::<Clock>)]
    clock: Clock,
    /// Also report the large-u bound with the light-tail estimate of the
    /// reaching time
    #[arg(long)]
    light_tail_substitute: bool,
    /// Events allowed in one busy period before a simulation gives up
    #[arg(long, default_value_t = defaults::EVENT_CAP, value_parser = parse_count)]
    event_cap: u64,
}

#[derive(Args, Serialize)]
struct Mm1Args {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: Mm1Model,
    #[command(flatten)]
    #[serde(flatten)]
    level: Level,
    #[command(flatten)]
    #[serde(flatten)]
    moments: Moments,
}

#[derive(Args, Serialize)]
struct Mg1Args {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: QueueModel,
    #[command(flatten)]
    #[serde(flatten)]
    level: Level,
    #[command(flatten)]
    #[serde(flatten)]
    moments: Moments,
}

#[derive(Args, Serialize)]
struct GeomsumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Comma-separated success probabilities [default: 0.005,0.01,0.05,0.1]
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Law of the summands (same syntax as --service) [default: exp:1]
    #[arg(long, value_parser = parse_distribution)]
    summand: Option<ServiceDistribution>,
    /// Law of the first summand when it differs
    #[arg(long, value_parser = parse_distribution)]
    delay: Option<ServiceDistribution>,
    /// Comma-separated scaled times [default: 0.1,0.2,...,0.9]
    #[arg(long, value_delimiter = ',')]
    x: Option<Vec<f64>>,
    /// Simulated sums per q; 0 skips the simulation
    #[arg(long, default_value_t = defaults::PATHS, value_parser = parse_count)]
    paths: u64,
    #[arg(long, default_value_t = defaults::SEED)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: QueueModel,
    /// Level u splitting the cycles
    #[arg(long, short = 'u')]
    level: Option<usize>,
    #[arg(long, default_value_t = defaults::CYCLES, value_parser = parse_count)]
    cycles: u64,
    #[arg(long, default_value_t = defaults::SEED)]
    seed: u64,
    /// Order of the extra cycle moment E T^gamma
    #[arg(long, default_value_t = defaults::GAMMA)]
    gamma: f64,
    /// Events allowed in one busy period before giving up
    #[arg(long, default_value_t = defaults::EVENT_CAP, value_parser = parse_count)]
    event_cap: u64,
    /// Also write one CSV row per cycle
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: QueueModel,
    #[command(flatten)]
    #[serde(flatten)]
    level: Level,
    #[command(flatten)]
    #[serde(flatten)]
    moments: Moments,
    /// First-passage histories simulated
    #[arg(long, default_value_t = defaults::HISTORIES, value_parser = parse_count)]
    histories: u64,
    /// Which bound to check
    #[arg(long, value_enum, default_value_t = BoundChoice::Theorem)]
    bound: BoundChoice,
    /// Multiply the upper bound by this before checking (a negative
    /// control when < 1)
    #[arg(long, default_value_t = defaults::UPPER_SCALE)]
    upper_scale: f64,
}

#[derive(Args, Serialize)]
struct RunArgs {
    /// JSON config file naming the command
    #[arg(long)]
    #[serde(skip)]
    config: PathBuf,
    /// Write the JSON report here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

const MODEL_KEYS: [&str; 3] = ["lambda", "mu", "service"];

/// The flags actually given on the command line or through the
/// environment, shaped like a config file.
fn given_flags<T: Serialize>(args: &T, m: &ArgMatches) -> Map<String, Value> {
    let Value::Object(all) = serde_json::to_value(args).expect("flags serialize") else {
        unreachable!("argument structs serialize to objects")
    };
    let mut out = Map::new();
    let mut model = Map::new();
    for (k, v) in all {
        if !matches!(
            m.value_source(&k),
            Some(ValueSource::CommandLine | ValueSource::EnvVariable)
        ) {
            continue;
        }
        if MODEL_KEYS.contains(&k.as_str()) {
            model.insert(k, v);
        } else {
            out.insert(k, v);
        }
    }
    if !model.is_empty() {
        out.insert("model".into(), Value::Object(model));
    }
    out
}

fn load(
    config: Option<&PathBuf>,
    command: Option<Command>,
    flags: Map<String, Value>,
) -> Result<config::RunConfig, CliError> {
    let mut base = match config {
        Some(p) => config::read_config_file(p)?,
        None => Map::new(),
    };
    if let Some(c) = command {
        base.insert(
            "command".into(),
            serde_json::to_value(c).expect("command serializes"),
        );
    }
    config::assemble(base, flags)
}

fn dispatch(cli: &Cli, m: &ArgMatches) -> Result<run::Status, CliError> {
    let (_, sub) = m.subcommand().expect("a subcommand is required");
    let (cfg_path, command, flags) = match &cli.command {
        Sub::Mm1(a) => (a.common.config.as_ref(), Command::Mm1, given_flags(a, sub)),
        Sub::Mg1(a) => (a.common.config.as_ref(), Command::Mg1, given_flags(a, sub)),
        Sub::Geomsum(a) => (
            a.common.config.as_ref(),
            Command::Geomsum,
            given_flags(a, sub),
        ),
        Sub::Simulate(a) => (
            a.common.config.as_ref(),
            Command::Simulate,
            given_flags(a, sub),
        ),
        Sub::Verify(a) => (
            a.common.config.as_ref(),
            Command::Verify,
            given_flags(a, sub),
        ),
        Sub::Run(a) => {
            let cfg = load(Some(&a.config), None, given_flags(a, sub))?;
            return run::run(&cfg);
        }
        Sub::Schema => {
            println!("{}", config::SCHEMA.trim_end());
            return Ok(run::Status::Computed);
        }
    };
    let cfg = load(cfg_path, Some(command), flags)?;
    run::run(&cfg)
}

fn main() -> ExitCode {
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("regenbound: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli, &matches) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("regenbound: {e}");
            ExitCode::from(1)
        }
    }
}
