use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use bellwright::derivation::{bell_check, run_derivation, StepStatus};
use bellwright::experiment::{Outcome, OutcomePair, SettingPair, Wing};
use bellwright::feasibility::{encode, solve, FeasibilityResult};
use bellwright::models::{outcomes_expr, settings_expr, CauseAssignment, TargetStatistics};
use bellwright::quantum::{self, DirectionConfig, DEFAULT_DENOMINATOR};
use bellwright::rational::{self, fixed, to_f64, Exact, Rational};
use bellwright::simulate::{self, EmpiricalVerdict, EstimateOptions, IntervalMethod, RunConfig};
use bellwright::HiddenVariableModel;
use serde::Serialize;

use crate::scenario::{parse_pairs, resolve_source, Format, ModelRef, Scenario, Source};
use crate::{Command, Flags, Verdict};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_THETA: [f64; 3] = [1.0, 179.0, 1.0];

/// Flags merged with the scenario file.
pub struct Options {
    angles: Option<Vec<f64>>,
    model: Option<ModelRef>,
    trials: u64,
    seed: u64,
    substreams: u32,
    pairs: Option<Vec<SettingPair>>,
    denominator: u64,
    theta: [f64; 3],
    estimate: EstimateOptions,
    blind: bool,
    out: Option<PathBuf>,
    format: Format,
}

impl Options {
    pub fn resolve(flags: Flags) -> Result<Self> {
        let scenario = match &flags.scenario {
            Some(path) => Scenario::load(path)?,
            None => Scenario::default(),
        };
        let base = flags.scenario.as_deref().and_then(|p| p.parent());
        let model = match (&flags.model, &scenario.model) {
            (Some(text), _) => Some(ModelRef::parse(text, None)?),
            (None, Some(value)) => Some(ModelRef::from_value(value, base)?),
            (None, None) => None,
        };
        let pairs = match (&flags.pairs, &scenario.pairs) {
            (Some(p), _) | (None, Some(p)) => Some(parse_pairs(p)?),
            (None, None) => None,
        };
        let theta = match (&flags.theta, scenario.theta) {
            (Some(t), _) => t
                .as_slice()
                .try_into()
                .map_err(|_| anyhow!("--theta takes start,stop,step"))?,
            (None, Some(t)) => t,
            (None, None) => DEFAULT_THETA,
        };
        let confidence = flags.confidence.or(scenario.confidence).unwrap_or(simulate::DEFAULT_CONFIDENCE);
        if !(confidence > 0.0 && confidence < 1.0) {
            bail!("confidence must lie in (0, 1), got {confidence}");
        }
        let denominator = flags.denominator.or(scenario.denominator).unwrap_or(DEFAULT_DENOMINATOR);
        if denominator == 0 || denominator > i64::MAX as u64 {
            bail!("denominator must be a positive 63-bit integer");
        }
        Ok(Self {
            angles: flags.angles.or(scenario.angles),
            model,
            trials: flags.trials.or(scenario.trials).unwrap_or(DEFAULT_TRIALS),
            seed: flags.seed.or(scenario.seed).unwrap_or(simulate::SHIPPED_SEED),
            substreams: flags.substreams.or(scenario.substreams).unwrap_or(simulate::DEFAULT_SUBSTREAMS),
            pairs,
            denominator,
            theta,
            estimate: EstimateOptions {
                confidence,
                method: if flags.exact_binomial { IntervalMethod::ClopperPearson } else { IntervalMethod::Normal },
            },
            blind: flags.blind,
            out: flags.out.or(scenario.out),
            format: flags.format.or(scenario.format).unwrap_or_default(),
        })
    }

    fn source(&mut self) -> Result<Source> {
        resolve_source(self.angles.as_deref(), self.model.take())
    }

    fn model(&mut self, command: &str) -> Result<HiddenVariableModel> {
        match self.source()? {
            Source::Model(m) => Ok(*m),
            Source::Quantum(_) if command == "simulate" => bail!(
                "quantum statistics cannot be simulated: only hidden variable models are simulable, and no \
                 model satisfying the common cause assumptions reproduces Bell-violating quantum statistics \
                 (use `feasibility` to obtain the certificate)"
            ),
            Source::Quantum(_) => bail!("{command} needs a model (--model), not quantum statistics"),
        }
    }

    fn angles(&self) -> Result<DirectionConfig> {
        if matches!(self.model, Some(ModelRef::Model(_))) {
            bail!("predict works on quantum statistics only; drop --model");
        }
        let angles = self.angles.as_deref().ok_or_else(|| anyhow!("predict needs --angles"))?;
        crate::scenario::parse_angles(angles)
    }

    /// Writes the primary output to `--out`, or stdout.
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    /// Summary lines go to stdout when the primary output went to a file,
    /// otherwise to stderr so that stdout stays machine-readable.
    fn summary(&self, line: &str) {
        if self.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

pub fn run(command: Command, mut opts: Options) -> Result<Verdict> {
    match command {
        Command::Predict => predict(&opts),
        Command::Bell => bell(&mut opts),
        Command::Scan => scan(&opts),
        Command::Feasibility => feasibility(&mut opts),
        Command::Simulate => simulate(&mut opts),
        Command::Derive => derive(&mut opts),
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn exact_text(r: Option<&Rational>) -> String {
    r.map(rational::to_text).unwrap_or_default()
}

#[derive(Serialize)]
struct PredictRow {
    pair: String,
    outcome: String,
    probability: String,
    exact: String,
}

fn predict(opts: &Options) -> Result<Verdict> {
    let cfg = opts.angles()?;
    let mut rows = Vec::new();
    for pair in SettingPair::all() {
        for o in OutcomePair::ALL {
            rows.push(PredictRow {
                pair: pair.label(),
                outcome: o.label(),
                probability: fixed(quantum::joint_prob(&cfg, pair, o)),
                exact: exact_text(quantum::exact_joint_prob(&cfg, pair, o).as_ref()),
            });
        }
        for wing in [Wing::Left, Wing::Right] {
            for o in Outcome::BOTH {
                let exact = quantum::exact_marginal_prob(&cfg, wing, pair, o);
                rows.push(PredictRow {
                    pair: pair.label(),
                    outcome: format!("{}{}", wing.letter(), o.symbol()),
                    probability: fixed(quantum::marginal_prob(&cfg, wing, pair, o)),
                    exact: rational::to_text(&exact),
                });
            }
        }
    }
    let text = match opts.format {
        Format::Json => json(&rows)?,
        Format::Csv => csv_text(
            &["pair", "outcome", "probability", "exact"],
            rows.into_iter().map(|r| [r.pair, r.outcome, r.probability, r.exact]),
        )?,
    };
    opts.emit(&text)?;
    Ok(Verdict::Affirmative)
}

/// `p_ij(++)` of a model, exactly, for one setting pair.
fn model_plus_plus(m: &HiddenVariableModel, pair: SettingPair) -> Result<Rational> {
    let space = m.to_space();
    space
        .cond_prob_opt(&outcomes_expr(pair, OutcomePair::PLUS_PLUS), &settings_expr(pair))?
        .ok_or_else(|| anyhow!("setting pair {pair} has probability zero under the model"))
}

/// Full conditional rows of a model for the requested pairs (all pairs
/// with positive probability when none are requested).
fn model_targets(m: &HiddenVariableModel, pairs: Option<&[SettingPair]>) -> Result<TargetStatistics> {
    let space = m.to_space();
    let mut t = TargetStatistics::new();
    let wanted: Vec<SettingPair> = match pairs {
        Some(p) => p.to_vec(),
        None => SettingPair::all().collect(),
    };
    for pair in wanted {
        let given = settings_expr(pair);
        if space.prob(&given)? == Rational::from_integer(0.into()) {
            if pairs.is_some() {
                bail!("setting pair {pair} has probability zero under the model");
            }
            continue;
        }
        let row = OutcomePair::ALL.map(|o| space.cond_prob(&outcomes_expr(pair, o), &given));
        let [a, b, c, d] = row;
        t.insert(pair, [a?, b?, c?, d?])?;
    }
    Ok(t)
}

#[derive(Serialize)]
struct BellOut {
    p13: f64,
    p12: f64,
    p23: f64,
    slack: f64,
    satisfied: bool,
    exact: Option<BellExact>,
}

#[derive(Serialize)]
struct BellExact {
    p13: String,
    p12: String,
    p23: String,
    slack: String,
}

fn bell(opts: &mut Options) -> Result<Verdict> {
    let (floats, exact) = match opts.source()? {
        Source::Quantum(cfg) => (quantum::wigner_triple(&cfg), quantum::exact_wigner_triple(&cfg)),
        Source::Model(m) => {
            let p = |l, r| model_plus_plus(&m, SettingPair::new(l, r));
            let e = (p(1, 3)?, p(1, 2)?, p(2, 3)?);
            ((to_f64(&e.0), to_f64(&e.1), to_f64(&e.2)), Some(e))
        }
    };
    let float_check = bell_check(floats.0, floats.1, floats.2)?;
    let exact_check = match &exact {
        Some((a, b, c)) => Some(bell_check(a.clone(), b.clone(), c.clone())?),
        None => None,
    };
    let satisfied = exact_check.as_ref().map_or(float_check.satisfied, |c| c.satisfied);
    let out = BellOut {
        p13: floats.0,
        p12: floats.1,
        p23: floats.2,
        slack: float_check.slack,
        satisfied,
        exact: exact.as_ref().zip(exact_check.as_ref()).map(|((a, b, c), chk)| BellExact {
            p13: rational::to_text(a),
            p12: rational::to_text(b),
            p23: rational::to_text(c),
            slack: rational::to_text(&chk.slack),
        }),
    };
    let text = match opts.format {
        Format::Json => json(&out)?,
        Format::Csv => {
            let show = |x: f64, e: Option<&String>| match e {
                Some(e) => format!("{} ({e})", fixed(x)),
                None => fixed(x),
            };
            let ex = out.exact.as_ref();
            format!(
                "p13={}\np12={}\np23={}\n{} slack={}\n",
                show(out.p13, ex.map(|e| &e.p13)),
                show(out.p12, ex.map(|e| &e.p12)),
                show(out.p23, ex.map(|e| &e.p23)),
                if satisfied { "SATISFIED" } else { "VIOLATED" },
                show(out.slack, ex.map(|e| &e.slack)),
            )
        }
    };
    opts.emit(&text)?;
    Ok(if satisfied { Verdict::Affirmative } else { Verdict::Negative })
}

fn scan(opts: &Options) -> Result<Verdict> {
    let [start, stop, step] = opts.theta;
    let scan = quantum::wigner_scan(start, stop, step)?;
    let min = scan.min_row();
    let text = match opts.format {
        Format::Json => json(&scan)?,
        Format::Csv => csv_text(
            &["theta", "p13", "p12", "p23", "slack"],
            scan.rows
                .iter()
                .map(|r| [r.theta, r.p13, r.p12, r.p23, r.slack].map(fixed)),
        )?,
    };
    opts.emit(&text)?;
    opts.summary(&format!("argmin theta={} slack={}", fixed(min.theta), fixed(min.slack)));
    Ok(Verdict::Affirmative)
}

#[derive(Serialize)]
struct FeasibilityOut<'a> {
    problem: &'a bellwright::feasibility::FeasibilityProblem,
    result: &'a FeasibilityResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<HiddenVariableModel>,
}

fn feasibility(opts: &mut Options) -> Result<Verdict> {
    let targets = match opts.source()? {
        Source::Quantum(cfg) => quantum::quantum_targets(&cfg, opts.denominator),
        Source::Model(m) => model_targets(&m, opts.pairs.as_deref())?,
    };
    let problem = encode(&targets, opts.pairs.as_deref().unwrap_or(&[]))?;
    let result = solve(&problem);
    let model = result.witness().and_then(|w| w.model());
    let mut lines = vec![result.to_string()];
    match &result {
        FeasibilityResult::Feasible { witness } => {
            let weights: Vec<String> = witness
                .distribution
                .iter()
                .enumerate()
                .map(|(c, q)| {
                    let label = if witness.directions == 3 {
                        CauseAssignment::from_bits(c as u8).label()
                    } else {
                        format!("{c}")
                    };
                    format!("{label}={}", rational::to_text(q))
                })
                .collect();
            lines.push(format!("witness {}", weights.join(" ")));
        }
        FeasibilityResult::Infeasible { certificate } | FeasibilityResult::Indeterminate { certificate, .. } => {
            if let Some(text) = &certificate.inequality {
                lines.push(format!("inequality {text}"));
            }
            lines.push(format!("bound {}", Exact(&certificate.bound)));
        }
    }
    let report = FeasibilityOut {
        problem: &problem,
        result: &result,
        model: model.clone(),
    };
    match (&opts.out, opts.format) {
        (Some(path), _) => {
            // The witness model itself, loadable with --model; otherwise the
            // problem and its certificate.
            let body = match &model {
                Some(m) => json(m)?,
                None => json(&report)?,
            };
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            for l in &lines {
                println!("{l}");
            }
        }
        (None, Format::Json) => print!("{}", json(&report)?),
        (None, Format::Csv) => {
            for l in &lines {
                println!("{l}");
            }
        }
    }
    Ok(match result {
        FeasibilityResult::Feasible { .. } => Verdict::Affirmative,
        FeasibilityResult::Infeasible { .. } => Verdict::Negative,
        FeasibilityResult::Indeterminate { .. } => Verdict::Indeterminate,
    })
}

#[derive(Serialize)]
struct SimulateOut<'a> {
    config: RunConfig,
    table: &'a simulate::FrequencyTable,
    estimates: Vec<simulate::Estimate>,
    bell: Option<simulate::EmpiricalBell>,
    no_cons: Option<simulate::EmpiricalNoCons>,
}

fn simulate(opts: &mut Options) -> Result<Verdict> {
    let model = opts.model("simulate")?;
    let cfg = RunConfig {
        trials: opts.trials,
        seed: opts.seed,
        substreams: opts.substreams,
        blind: opts.blind,
    };
    let table = simulate::run(&model, &cfg)?;
    let estimates = simulate::estimates(&table, &opts.estimate);
    let bell = simulate::empirical_bell(&table, &opts.estimate);
    let no_cons = if cfg.blind { None } else { Some(simulate::empirical_no_cons(&table, &opts.estimate)?) };

    let mut summary = Vec::new();
    let verdict = match &bell {
        Ok(b) => {
            let name = match b.verdict {
                EmpiricalVerdict::Satisfied => "SATISFIED",
                EmpiricalVerdict::Violated => "VIOLATED",
                EmpiricalVerdict::Inconclusive => "INCONCLUSIVE",
            };
            summary.push(format!(
                "bell {name} slack={} ci=[{},{}]",
                fixed(b.slack),
                fixed(b.ci_low),
                fixed(b.ci_high)
            ));
            match b.verdict {
                EmpiricalVerdict::Satisfied => Verdict::Affirmative,
                EmpiricalVerdict::Violated => Verdict::Negative,
                EmpiricalVerdict::Inconclusive => Verdict::Indeterminate,
            }
        }
        Err(e) => {
            summary.push(format!("bell INCONCLUSIVE ({e})"));
            Verdict::Indeterminate
        }
    };
    match &no_cons {
        None => summary.push("no-cons not checked (blind run)".into()),
        Some(r) => {
            let count = |s| r.cells.iter().filter(|c| c.status == s).count();
            summary.push(format!(
                "no-cons flagged={} clear={} inconclusive={}",
                count(simulate::CellStatus::Flagged),
                count(simulate::CellStatus::Clear),
                count(simulate::CellStatus::Inconclusive)
            ));
            for c in r.flagged() {
                summary.push(format!(
                    "no-cons FLAGGED {} pair={} delta={} half_width={}",
                    c.formula,
                    c.pair.0.label(),
                    fixed(c.delta),
                    fixed(c.half_width)
                ));
            }
        }
    }

    let text = match opts.format {
        Format::Json => json(&SimulateOut {
            config: cfg,
            table: &table,
            estimates,
            bell: bell.ok(),
            no_cons,
        })?,
        Format::Csv => {
            let mut buf = Vec::new();
            simulate::write_csv(&estimates, &mut buf)?;
            String::from_utf8(buf)?
        }
    };
    opts.emit(&text)?;
    for line in &summary {
        opts.summary(line);
    }
    Ok(verdict)
}

fn derive(opts: &mut Options) -> Result<Verdict> {
    let model = opts.model("derive")?;
    let report = run_derivation(&model);
    let text = match opts.format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut s = String::new();
            for (key, step) in &report.steps {
                let status = match step.status {
                    StepStatus::Proven => "proven",
                    StepStatus::Failed => "FAILED",
                    StepStatus::Blocked => "blocked",
                    StepStatus::Premise => "premise",
                };
                s += &format!("{key:<5} {status:<8} {}\n", step.title);
                if let Some(detail) = &step.detail {
                    if step.status != StepStatus::Premise {
                        s += &format!("      {detail}\n");
                    }
                }
            }
            if let Some(b) = &report.bell {
                s += &format!(
                    "values p13={} p12={} p23={} slack={}\n",
                    Exact(&b.p13),
                    Exact(&b.p12),
                    Exact(&b.p23),
                    Exact(&b.slack)
                );
            }
            s += &match report.first_failure() {
                None => "ALL PROVEN\n".to_string(),
                Some(k) => format!("FAILED at {k}\n"),
            };
            s
        }
    };
    opts.emit(&text)?;
    Ok(if report.all_proven() { Verdict::Affirmative } else { Verdict::Negative })
}
