//! Run configuration: JSON file, schema check, flag overrides.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regenbound_core::{Clock, MomentSource, ServiceDistribution};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SCHEMA: &str = include_str!("../schema/run-config.schema.json");

pub mod defaults {
    pub const X: &str = "0.2,0.4,0.6,0.8";
    pub const GEOMSUM_X: &str = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    pub const Q: &str = "0.005,0.01,0.05,0.1";
    pub const CYCLES: u64 = 1_000_000;
    pub const HISTORIES: u64 = 1_000_000;
    pub const PATHS: u64 = 0;
    pub const SEED: u64 = 0;
    pub const GAMMA: f64 = 3.0;
    pub const Z: f64 = 3.0;
    pub const EVENT_CAP: u64 = 1_000_000_000;
    pub const UPPER_SCALE: f64 = 1.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Mm1,
    Mg1,
    Geomsum,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundChoice {
    #[default]
    Theorem,
    Corollary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<ServiceDistribution>,
}

impl ModelConfig {
    /// The service law, with `mu` read as exponential service.
    pub fn service(&self) -> Result<ServiceDistribution, CliError> {
        match (&self.service, self.mu) {
            (Some(s), None) => Ok(s.clone()),
            (None, Some(mu)) => Ok(ServiceDistribution::exponential(mu)?),
            _ => Err(CliError::config(
                "model",
                "give exactly one of mu and service",
            )),
        }
    }
}

/// Everything a run depends on. Serialized back into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Scaled times; `None` means the per-command default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(deserialize_with = "count")]
    pub cycles: u64,
    #[serde(deserialize_with = "count")]
    pub histories: u64,
    #[serde(deserialize_with = "count")]
    pub paths: u64,
    pub seed: u64,
    pub mode: MomentSource,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_gamma: Option<f64>,
    pub z: f64,
    pub clock: Clock,
    pub light_tail_substitute: bool,
    #[serde(deserialize_with = "count")]
    pub event_cap: u64,
    pub bound: BoundChoice,
    pub upper_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summand: Option<ServiceDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<ServiceDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Mm1,
            model: None,
            level: None,
            x: None,
            cycles: defaults::CYCLES,
            histories: defaults::HISTORIES,
            paths: defaults::PATHS,
            seed: defaults::SEED,
            mode: MomentSource::Exact,
            gamma: defaults::GAMMA,
            m_gamma: None,
            z: defaults::Z,
            clock: Clock::Continuous,
            light_tail_substitute: false,
            event_cap: defaults::EVENT_CAP,
            bound: BoundChoice::Theorem,
            upper_scale: defaults::UPPER_SCALE,
            q: None,
            summand: None,
            delay: None,
            output: None,
            csv: None,
        }
    }
}

impl RunConfig {
    pub fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::config("model", "required for this command"))
    }

    pub fn level(&self) -> Result<usize, CliError> {
        self.level
            .ok_or_else(|| CliError::config("level", "required for this command"))
    }

    pub fn x_grid(&self) -> Vec<f64> {
        let fallback = if self.command == Command::Geomsum {
            defaults::GEOMSUM_X
        } else {
            defaults::X
        };
        self.x
            .clone()
            .unwrap_or_else(|| parse_list(fallback).expect("default grid parses"))
    }
}

/// Accepts integers and integral floats such as `1e7`.
fn count<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let v = f64::deserialize(d)?;
    to_count(v).map_err(serde::de::Error::custom)
}

fn to_count(v: f64) -> Result<u64, String> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(63) {
        Ok(v as u64)
    } else {
        Err(format!("expected a non-negative whole number, got {v}"))
    }
}

/// Clap parser for counts written as `10000000` or `1e7`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    s.parse::<u64>().or_else(|_| {
        s.parse::<f64>()
            .map_err(|e| e.to_string())
            .and_then(to_count)
    })
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

/// Parses `exp:2`, `det:0.5`, `erlang:2,4`, `uniform:0,1.2`,
/// `hyperexp:0.4/1,0.6/3` (weight/rate pairs) or an inline JSON object.
pub fn parse_distribution(s: &str) -> Result<ServiceDistribution, String> {
    let s = s.trim();
    if s.starts_with('{') {
        let d: ServiceDistribution = serde_json::from_str(s).map_err(|e| e.to_string())?;
        return d.validate().map(|_| d).map_err(|e| e.to_string());
    }
    let (family, args) = s.split_once(':').ok_or("expected FAMILY:PARAMS")?;
    let nums = || parse_list(args);
    let d = match family {
        "exp" | "exponential" => match nums()?[..] {
            [rate] => ServiceDistribution::exponential(rate),
            _ => return Err("exp takes one rate".into()),
        },
        "det" | "deterministic" => match nums()?[..] {
            [v] => ServiceDistribution::deterministic(v),
            _ => return Err("det takes one value".into()),
        },
        "erlang" => match nums()?[..] {
            [k, rate] if k >= 1.0 && k.fract() == 0.0 && k <= f64::from(u32::MAX) => {
                ServiceDistribution::erlang(k as u32, rate)
            }
            _ => return Err("erlang takes an integer shape and a rate".into()),
        },
        "uniform" => match nums()?[..] {
            [lo, hi] => ServiceDistribution::uniform(lo, hi),
            _ => return Err("uniform takes lo,hi".into()),
        },
        "hyperexp" | "hyperexponential" => {
            let mut weights = Vec::new();
            let mut rates = Vec::new();
            for pair in args.split(',') {
                let (w, r) = pair
                    .split_once('/')
                    .ok_or("hyperexp phases are weight/rate")?;
                weights.push(w.trim().parse::<f64>().map_err(|e| e.to_string())?);
                rates.push(r.trim().parse::<f64>().map_err(|e| e.to_string())?);
            }
            ServiceDistribution::hyperexponential(weights, rates)
        }
        other => return Err(format!("unknown family {other:?}")),
    };
    d.map_err(|e| e.to_string())
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("schema is valid JSON");
        jsonschema::validator_for(&schema).expect("schema compiles")
    })
}

/// Checks `value` against the shipped schema, reporting every violation
/// with its JSON pointer.
pub fn check_schema(value: &Value) -> Result<(), CliError> {
    let errors: Vec<String> = validator()
        .iter_errors(value)
        .map(|e| {
            let at = e.instance_path.to_string();
            format!("{}: {e}", if at.is_empty() { "/" } else { &at })
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Schema(errors))
    }
}

pub fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Json(path.to_path_buf(), e))?;
    // a saved report carries its inputs under "config"
    let value = match value {
        Value::Object(mut m)
            if m.get("tool") == Some(&Value::from("regenbound")) && m.contains_key("config") =>
        {
            m.remove("config").unwrap()
        }
        v => v,
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::config("/", "configuration must be a JSON object")),
    }
}

/// Overlays `flags` on `base` (model keys merge one level deep), checks
/// the schema and deserializes with field paths in errors.
pub fn assemble(
    mut base: Map<String, Value>,
    flags: Map<String, Value>,
) -> Result<RunConfig, CliError> {
    for (k, v) in flags {
        match (k.as_str(), base.get_mut(&k), v) {
            ("model", Some(Value::Object(old)), Value::Object(new)) => {
                // a flag for mu replaces a configured service and vice versa
                if new.contains_key("mu") {
                    old.remove("service");
                }
                if new.contains_key("service") {
                    old.remove("mu");
                }
                old.extend(new);
            }
            (_, _, v) => {
                base.insert(k, v);
            }
        }
    }
    let value = Value::Object(base);
    check_schema(&value)?;
    let cfg: RunConfig = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(&path, e.into_inner().to_string())
    })?;
    if let Some(m) = &cfg.model {
        m.service().map_err(|e| match e {
            CliError::Core(c) => CliError::config("model.service", c.to_string()),
            e => e,
        })?;
    }
    for (field, d) in [("summand", &cfg.summand), ("delay", &cfg.delay)] {
        if let Some(d) = d {
            d.validate()
                .map_err(|e| CliError::config(field, e.to_string()))?;
        }
    }
    Ok(cfg)
}
