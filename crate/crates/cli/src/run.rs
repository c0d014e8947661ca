//! Executes a validated [`RunConfig`] and writes the JSON report.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use regenbound_core::geomsum::{delta_exact_exponential, geom_sum_bounds, simulate_geom_sum};
use regenbound_core::sim::{self, hitting_cdf, verify_report, VerifyOutcome};
use regenbound_core::{
    mg1, mm1, BoundReport, MG1Model, MM1Model, ServiceDistribution, SimEstimate, SimOptions,
    StatementOptions, StatementReport, SummandStats, Verdict,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{defaults, parse_list, BoundChoice, Command, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Computed,
    Pass,
    Fail,
    Uninformative,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Fail => 2,
            _ => 0,
        }
    }
}

impl From<Verdict> for Status {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Status::Pass,
            Verdict::Fail => Status::Fail,
            Verdict::Uninformative => Status::Uninformative,
        }
    }
}

/// Report-level summary of the per-point bound flags.
#[derive(Debug, Default, Serialize)]
struct Flags {
    informative: bool,
    inverted: bool,
    asymptotic: bool,
}

impl Flags {
    fn of<'a>(reports: impl IntoIterator<Item = &'a BoundReport>) -> Self {
        let mut f = Flags {
            informative: true,
            ..Flags::default()
        };
        for r in reports {
            f.informative &= r.informative;
            f.inverted |= r.inverted;
            f.asymptotic |= r.asymptotic;
        }
        f
    }

    fn of_statement(r: &StatementReport) -> Self {
        Flags::of(r.blocks.iter().flat_map(|b| [&b.theorem, &b.corollary]))
    }
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    seed: u64,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    flags: Option<Flags>,
    config: &'a RunConfig,
    result: Value,
}

pub fn run(cfg: &RunConfig) -> Result<Status, CliError> {
    let (status, flags, result) = match cfg.command {
        Command::Mm1 => {
            let r = mm1_report(cfg)?;
            (
                Status::Computed,
                Some(Flags::of_statement(&r)),
                to_value(&r),
            )
        }
        Command::Mg1 => {
            let r = mg1_report(cfg)?;
            (
                Status::Computed,
                Some(Flags::of_statement(&r)),
                to_value(&r),
            )
        }
        Command::Geomsum => geomsum_table(cfg)?,
        Command::Simulate => (Status::Computed, None, simulate(cfg)?),
        Command::Verify => verify(cfg)?,
    };
    let report = Report {
        tool: "regenbound",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command,
        seed: cfg.seed,
        status,
        flags,
        config: cfg,
        result,
    };
    write_json(cfg.output.as_deref(), &report)?;
    Ok(status)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn write_json<T: Serialize>(path: Option<&Path>, v: &T) -> Result<(), CliError> {
    let io_err =
        |e: io::Error| CliError::Io(path.unwrap_or(Path::new("<stdout>")).to_path_buf(), e);
    let mut out: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err)?)),
        None => Box::new(io::stdout().lock()),
    };
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| io_err(e.into()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(io_err)
}

fn statement_options(cfg: &RunConfig) -> StatementOptions {
    StatementOptions {
        mode: cfg.mode,
        gamma: cfg.gamma,
        m_gamma: cfg.m_gamma,
        cycles: cfg.cycles,
        seed: cfg.seed,
        z: cfg.z,
        clock: cfg.clock,
        light_tail_substitute: cfg.light_tail_substitute,
        event_cap: cfg.event_cap,
    }
}

fn sim_options(cfg: &RunConfig) -> SimOptions {
    SimOptions {
        seed: cfg.seed,
        event_cap: cfg.event_cap,
        gamma: cfg.gamma,
    }
}

fn mm1_model(cfg: &RunConfig) -> Result<MM1Model, CliError> {
    let m = cfg.model()?;
    let mu = m.mu.ok_or_else(|| {
        CliError::config(
            "model.mu",
            "the M/M/1 analyzer needs an exponential service rate",
        )
    })?;
    Ok(MM1Model::new(m.lambda, mu)?)
}

fn mg1_model(cfg: &RunConfig) -> Result<MG1Model, CliError> {
    let m = cfg.model()?;
    Ok(MG1Model::new(m.lambda, m.service()?)?)
}

fn mm1_report(cfg: &RunConfig) -> Result<StatementReport, CliError> {
    Ok(mm1::statement42_report(
        &mm1_model(cfg)?,
        cfg.level()?,
        &cfg.x_grid(),
        &statement_options(cfg),
    )?)
}

fn mg1_report(cfg: &RunConfig) -> Result<StatementReport, CliError> {
    Ok(mg1::statement41_report(
        &mg1_model(cfg)?,
        cfg.level()?,
        &cfg.x_grid(),
        &statement_options(cfg),
    )?)
}

#[derive(Serialize)]
struct GeomSumRow {
    #[serde(flatten)]
    bounds: regenbound_core::GeomSumBounds,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulated: Option<SimEstimate>,
}

fn geomsum_table(cfg: &RunConfig) -> Result<(Status, Option<Flags>, Value), CliError> {
    let summand = match &cfg.summand {
        Some(s) => s.clone(),
        None => ServiceDistribution::exponential(1.0)?,
    };
    let stats = SummandStats::from_laws(&summand, cfg.delay.as_ref())?;
    let qs = cfg
        .q
        .clone()
        .unwrap_or_else(|| parse_list(defaults::Q).expect("default q parses"));
    let xs = cfg.x_grid();
    let exact_law =
        matches!(summand, ServiceDistribution::Exponential { .. }) && cfg.delay.is_none();
    let mut rows = Vec::new();
    let mut flags = Flags {
        informative: true,
        ..Flags::default()
    };
    for &q in &qs {
        let sample = if cfg.paths > 0 {
            Some(simulate_geom_sum(
                &summand,
                cfg.delay.as_ref(),
                q,
                cfg.paths,
                &xs,
                cfg.seed,
            )?)
        } else {
            None
        };
        for (i, &x) in xs.iter().enumerate() {
            let bounds = geom_sum_bounds(x, q, &stats)?;
            flags.informative &= bounds.informative;
            flags.inverted |= bounds.upper < bounds.lower;
            rows.push(GeomSumRow {
                bounds,
                exact: if exact_law {
                    Some(delta_exact_exponential(x, q)?)
                } else {
                    None
                },
                simulated: sample.as_ref().map(|s| s.points[i].delta),
            });
        }
    }
    let result = json!({
        "a1": stats.a1(),
        "a2": stats.a2(),
        "a1_delay": stats.a1_delay(),
        "points": rows,
    });
    Ok((Status::Computed, Some(flags), result))
}

fn simulate(cfg: &RunConfig) -> Result<Value, CliError> {
    let model = mg1_model(cfg)?;
    let u = cfg.level()? as u64;
    let opts = sim_options(cfg);
    let summary = match &cfg.csv {
        Some(path) => {
            let records = sim::simulate_cycle_records(&model, u, cfg.cycles, &opts)?;
            let mut w = csv::Writer::from_path(path)?;
            for r in &records {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| CliError::Io(path.clone(), e))?;
            sim::summarize_cycles(&records, u, opts.gamma)?
        }
        None => sim::simulate_cycles(&model, u, cfg.cycles, &opts)?,
    };
    Ok(to_value(&summary))
}

fn verify(cfg: &RunConfig) -> Result<(Status, Option<Flags>, Value), CliError> {
    // exponential service given as a rate uses the closed forms
    let (report, model) = if cfg.model()?.mu.is_some() {
        let m = mm1_model(cfg)?;
        (mm1_report(cfg)?, m.to_mg1())
    } else {
        (mg1_report(cfg)?, mg1_model(cfg)?)
    };
    let mut reports = match cfg.bound {
        BoundChoice::Theorem => report.theorem_reports(),
        BoundChoice::Corollary => report.corollary_reports(),
    };
    for r in &mut reports {
        r.upper = r.upper.map(|v| v * cfg.upper_scale);
    }
    let xs = cfg.x_grid();
    let scale = report.m1_minus.value / report.q_star;
    let hitting = hitting_cdf(
        &model,
        report.u as u64,
        cfg.histories,
        &xs,
        scale,
        &sim_options(cfg),
    )?;
    let empirical: Vec<(f64, SimEstimate)> =
        hitting.points.iter().map(|p| (p.x, p.delta)).collect();
    let outcome: VerifyOutcome = verify_report(&reports, &empirical, cfg.z)?;
    let flags = Flags::of(&reports);
    let result = json!({
        "verdict": outcome.verdict,
        "bound": cfg.bound,
        "upper_scale": cfg.upper_scale,
        "checked": outcome,
        "hitting": hitting,
        "report": report,
    });
    Ok((outcome.verdict.into(), Some(flags), result))
}
