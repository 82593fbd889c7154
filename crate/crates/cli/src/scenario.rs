//! Scenario files and resolution of the statistics source.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bellwright::models::catalog;
use bellwright::quantum::DirectionConfig;
use bellwright::{HiddenVariableModel, SettingPair};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Batch input file. Every field mirrors a command-line flag; flags given
/// on the command line take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub angles: Option<Vec<f64>>,
    /// `"quantum"`, `"builtin:<name>"`, a file path, or an inline model.
    pub model: Option<serde_json::Value>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub substreams: Option<u32>,
    pub pairs: Option<Vec<String>>,
    pub denominator: Option<u64>,
    pub theta: Option<[f64; 3]>,
    pub confidence: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

pub const SCENARIO_VERSION: u32 = 1;

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let s: Scenario =
            serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?;
        if s.version != SCENARIO_VERSION {
            bail!("unsupported scenario version {} (expected {SCENARIO_VERSION})", s.version);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub enum ModelRef {
    Quantum,
    Model(Box<HiddenVariableModel>),
}

impl ModelRef {
    /// `quantum`, `builtin:<name>`, inline JSON (starting with `{`), or a path.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let text = text.trim();
        if text == "quantum" {
            return Ok(ModelRef::Quantum);
        }
        let model = if let Some(name) = text.strip_prefix("builtin:") {
            catalog::by_name(name).ok_or_else(|| {
                anyhow!("unknown builtin model `{name}` (known: {})", catalog::NAMES.join(", "))
            })?
        } else if text.starts_with('{') {
            serde_json::from_str(text).context("parsing inline model")?
        } else {
            let path = match base {
                Some(dir) if Path::new(text).is_relative() => dir.join(text),
                _ => PathBuf::from(text),
            };
            let body = std::fs::read_to_string(&path).with_context(|| format!("reading model {}", path.display()))?;
            serde_json::from_str(&body).with_context(|| format!("parsing model {}", path.display()))?
        };
        Ok(ModelRef::Model(Box::new(model)))
    }

    pub fn from_value(value: &serde_json::Value, base: Option<&Path>) -> Result<Self> {
        match value {
            serde_json::Value::String(s) => Self::parse(s, base),
            other => Ok(ModelRef::Model(Box::new(
                serde_json::from_value(other.clone()).context("parsing scenario model")?,
            ))),
        }
    }
}

pub fn parse_angles(values: &[f64]) -> Result<DirectionConfig> {
    let angles: [f64; 3] = values
        .try_into()
        .map_err(|_| anyhow!("--angles takes exactly three directions, got {}", values.len()))?;
    Ok(DirectionConfig::from_degrees(angles)?)
}

pub fn parse_pairs<S: AsRef<str>>(items: &[S]) -> Result<Vec<SettingPair>> {
    items
        .iter()
        .map(|s| {
            s.as_ref()
                .trim()
                .parse::<SettingPair>()
                .map_err(|e| anyhow!("bad setting pair `{}`: {e}", s.as_ref()))
        })
        .collect()
}

/// Where the statistics of one invocation come from.
pub enum Source {
    Quantum(DirectionConfig),
    Model(Box<HiddenVariableModel>),
}

/// Enforces a single statistics source: quantum predictions at the given
/// angles, or a model (which then takes no angles).
pub fn resolve_source(angles: Option<&[f64]>, model: Option<ModelRef>) -> Result<Source> {
    match (angles, model) {
        (Some(a), None | Some(ModelRef::Quantum)) => Ok(Source::Quantum(parse_angles(a)?)),
        (None, Some(ModelRef::Quantum)) => bail!("quantum statistics need --angles"),
        (None, Some(ModelRef::Model(m))) => Ok(Source::Model(m)),
        (Some(_), Some(ModelRef::Model(_))) => {
            bail!("exactly one statistics source per invocation: give --angles (quantum) or --model, not both")
        }
        (None, None) => bail!("no statistics source: give --angles or --model"),
    }
}
