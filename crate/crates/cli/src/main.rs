mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scenario::Format;

/// Exact Bell-inequality checks, feasibility certificates and Monte Carlo
/// runs for separate-common-cause models of the EPR-Bohm experiment.
#[derive(Parser)]
#[command(name = "bellwright", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Quantum outcome table and marginals for three directions.
    Predict,
    /// Wigner-Bell check p13 ≤ p12 + p23 on quantum or model statistics.
    Bell,
    /// Slack of the inequality over equally spaced directions (0, θ, 2θ).
    Scan,
    /// Decide whether a model satisfying the assumptions reproduces the
    /// statistics; writes a witness model or a certificate.
    Feasibility,
    /// Monte Carlo run of a model with empirical verdicts.
    Simulate,
    /// Step-by-step derivation report for a model.
    Derive,
}

#[derive(Args, Default, Clone)]
pub struct Flags {
    /// Scenario file (JSON, `version: 1`); flags override its fields.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Three direction angles in degrees.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    angles: Option<Vec<f64>>,
    /// `quantum`, `builtin:<name>`, a model file, or inline JSON.
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel substreams; results do not depend on it.
    #[arg(long, global = true)]
    substreams: Option<u32>,
    /// Setting pairs, e.g. `12,23,13`.
    #[arg(long, global = true, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    /// Rounding denominator for irrational quantum entries.
    #[arg(long, global = true)]
    denominator: Option<u64>,
    /// Scan grid `start,stop,step` in degrees.
    #[arg(long, global = true, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Confidence level of empirical intervals.
    #[arg(long, global = true)]
    confidence: Option<f64>,
    /// Exact binomial (Clopper-Pearson) intervals instead of the normal
    /// approximation.
    #[arg(long, global = true)]
    exact_binomial: bool,
    /// Hide cause assignments from the simulated table.
    #[arg(long, global = true)]
    blind: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

/// Stable exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Affirmative,
    Negative,
    Indeterminate,
}

impl From<Verdict> for ExitCode {
    fn from(v: Verdict) -> Self {
        ExitCode::from(match v {
            Verdict::Affirmative => 0,
            Verdict::Negative => 2,
            Verdict::Indeterminate => 3,
        })
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(text) = std::env::var("BELLWRIGHT_THREADS") {
        let n: usize = text
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow::anyhow!("BELLWRIGHT_THREADS must be a positive integer, got `{text}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share exit code 1 with other input errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads()
        .and_then(|()| commands::Options::resolve(cli.flags))
        .and_then(|opts| commands::run(cli.command, opts));
    match result {
        Ok(v) => v.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
