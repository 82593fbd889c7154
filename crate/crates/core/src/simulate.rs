//! Seeded Monte Carlo runs of a hidden variable model.
//!
//! Trial `t` consumes the two 64-bit words at position `t` of a ChaCha8
//! keystream keyed by the seed: the first picks the cause assignment, the
//! second the setting pair. A run is therefore a pure function of
//! `(model, trials, seed)`; substreams only split the trial range.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::experiment::{OutcomePair, SettingPair};
use crate::models::{cause_conjunctions, CauseAssignment, HiddenVariableModel, WingResponse};
use crate::rational::{self, Rational};

/// Seed used by the shipped examples and reference runs.
pub const SHIPPED_SEED: u64 = 7;
pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_SUBSTREAMS: u32 = 64;
/// Subensembles smaller than this make a conspiracy cell or an empirical
/// Bell verdict inconclusive.
pub const MIN_SUBENSEMBLE: u64 = 30;

/// Column of the irregular cell: a wing registered no outcome or both.
pub const IRREGULAR: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulateError {
    #[error("invalid run: {0}")]
    InvalidModel(String),
    #[error("setting pair {0} never occurred")]
    EmptySubensemble(SettingPair),
    #[error("cause assignments were not recorded (blind run)")]
    Blind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trials: u64,
    pub seed: u64,
    pub substreams: u32,
    /// Hide cause assignments from the table.
    #[serde(default)]
    pub blind: bool,
}

impl RunConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            substreams: DEFAULT_SUBSTREAMS,
            blind: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    pub trials: u64,
    /// Per setting pair (row-major `11 … 33`): `++, +-, -+, --`, irregular.
    pub counts: [[u64; 5]; 9],
    /// Per cause assignment × setting pair; absent for blind runs.
    pub cause_counts: Option<[[u64; 9]; 8]>,
}

impl FrequencyTable {
    pub fn pair_total(&self, pair: SettingPair) -> u64 {
        self.counts[pair.index()].iter().sum()
    }

    pub fn count(&self, pair: SettingPair, o: OutcomePair) -> u64 {
        self.counts[pair.index()][o.index()]
    }

    pub fn irregular(&self, pair: SettingPair) -> u64 {
        self.counts[pair.index()][IRREGULAR]
    }

    /// Number of nonzero `(pair, outcome)` cells.
    pub fn occupied_cells(&self) -> usize {
        self.counts.iter().flatten().filter(|&&c| c > 0).count()
    }

    fn add(mut self, other: &FrequencyTable) -> FrequencyTable {
        self.trials += other.trials;
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (&mut self.cause_counts, &other.cause_counts) {
            for (x, y) in a.iter_mut().flatten().zip(b.iter().flatten()) {
                *x += y;
            }
        }
        self
    }

    fn empty(blind: bool) -> Self {
        Self {
            trials: 0,
            counts: [[0; 5]; 9],
            cause_counts: (!blind).then_some([[0; 9]; 8]),
        }
    }
}

/// Cumulative thresholds `⌊cum · 2⁶⁴⌋`; a draw `u` selects the first index
/// with `u < threshold`. Zero-weight entries are never selected.
fn thresholds(weights: &[Rational]) -> Vec<u128> {
    let mut cum = Rational::from_integer(0.into());
    weights
        .iter()
        .map(|w| {
            cum += w;
            let scaled: BigInt = (cum.numer() << 64u32) / cum.denom();
            scaled.to_u128().expect("cumulative weight is at most one")
        })
        .collect()
}

fn pick(thresholds: &[u128], u: u64) -> usize {
    let u = u128::from(u);
    thresholds.iter().position(|&t| u < t).unwrap_or(thresholds.len() - 1)
}

struct Sampler {
    causes: Vec<u128>,
    policy: Vec<Vec<u128>>,
    /// Outcome column per assignment × pair.
    response: [[usize; 9]; 8],
}

impl Sampler {
    fn new(m: &HiddenVariableModel) -> Self {
        let mut response = [[IRREGULAR; 9]; 8];
        for c in CauseAssignment::all() {
            for pair in SettingPair::all() {
                response[c.index()][pair.index()] = match m.response().respond(c, pair) {
                    (WingResponse::Outcome(l), WingResponse::Outcome(r)) => OutcomePair::new(l, r).index(),
                    _ => IRREGULAR,
                };
            }
        }
        Self {
            causes: thresholds(m.cause_dist()),
            policy: CauseAssignment::all().map(|c| thresholds(m.policy().row(c))).collect(),
            response,
        }
    }

    fn run_range(&self, seed: u64, start: u64, len: u64, blind: bool) -> FrequencyTable {
        let mut table = FrequencyTable::empty(blind);
        table.trials = len;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(u128::from(start) * 4);
        for _ in 0..len {
            let c = pick(&self.causes, rng.next_u64());
            let s = pick(&self.policy[c], rng.next_u64());
            table.counts[s][self.response[c][s]] += 1;
            if let Some(cc) = &mut table.cause_counts {
                cc[c][s] += 1;
            }
        }
        table
    }
}

/// Simulates `cfg.trials` runs. Substreams are generated in parallel and
/// merged by count addition.
pub fn run(m: &HiddenVariableModel, cfg: &RunConfig) -> Result<FrequencyTable, SimulateError> {
    if cfg.trials == 0 {
        return Err(SimulateError::InvalidModel("trials must be positive".into()));
    }
    if cfg.substreams == 0 {
        return Err(SimulateError::InvalidModel("substreams must be positive".into()));
    }
    let sampler = Sampler::new(m);
    let parts = u64::from(cfg.substreams).min(cfg.trials);
    let chunk = cfg.trials / parts;
    let extra = cfg.trials % parts;
    let table = (0..parts)
        .into_par_iter()
        .map(|i| {
            let start = i * chunk + i.min(extra);
            let len = chunk + u64::from(i < extra);
            sampler.run_range(cfg.seed, start, len, cfg.blind)
        })
        .reduce(|| FrequencyTable::empty(cfg.blind), |a, b| a.add(&b));
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    /// Normal approximation `p̂ ± z √(p̂(1−p̂)/n)`.
    #[default]
    Normal,
    /// Exact binomial interval.
    ClopperPearson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub confidence: f64,
    pub method: IntervalMethod,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            confidence: DEFAULT_CONFIDENCE,
            method: IntervalMethod::Normal,
        }
    }
}

fn two_sided_z(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Point estimate and interval for `count` successes in `n` trials.
pub fn estimate_cell(count: u64, n: u64, opts: &EstimateOptions) -> Option<(f64, f64, f64)> {
    if n == 0 {
        return None;
    }
    let p = count as f64 / n as f64;
    let (lo, hi) = match opts.method {
        IntervalMethod::Normal => {
            let h = two_sided_z(opts.confidence) * (p * (1.0 - p) / n as f64).sqrt();
            ((p - h).max(0.0), (p + h).min(1.0))
        }
        IntervalMethod::ClopperPearson => {
            let alpha = 1.0 - opts.confidence;
            let (k, n) = (count as f64, n as f64);
            let lo = if count == 0 {
                0.0
            } else {
                Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
            };
            let hi = if k == n {
                1.0
            } else {
                Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0)
            };
            (lo, hi)
        }
    };
    Some((p, lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub pair: SettingPairLabel,
    /// Outcome label, or `irregular`.
    pub outcome: &'static str,
    pub count: u64,
    pub subensemble: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Setting pair serialized by its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SettingPairLabel(pub SettingPair);

impl Serialize for SettingPairLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.label())
    }
}

const OUTCOME_LABELS: [&str; 5] = ["++", "+-", "-+", "--", "irregular"];

/// Conditional estimate `p̂_ij(a, b)` of one cell.
pub fn estimate(
    t: &FrequencyTable,
    pair: SettingPair,
    o: OutcomePair,
    opts: &EstimateOptions,
) -> Result<Estimate, SimulateError> {
    cell(t, pair, o.index(), opts).ok_or(SimulateError::EmptySubensemble(pair))
}

fn cell(t: &FrequencyTable, pair: SettingPair, column: usize, opts: &EstimateOptions) -> Option<Estimate> {
    let n = t.pair_total(pair);
    let count = t.counts[pair.index()][column];
    let (estimate, ci_low, ci_high) = estimate_cell(count, n, opts)?;
    Some(Estimate {
        pair: SettingPairLabel(pair),
        outcome: OUTCOME_LABELS[column],
        count,
        subensemble: n,
        estimate,
        ci_low,
        ci_high,
    })
}

/// Estimates for every pair that occurred: the four outcome cells, plus
/// the irregular cell when it is nonzero.
pub fn estimates(t: &FrequencyTable, opts: &EstimateOptions) -> Vec<Estimate> {
    let mut out = Vec::new();
    for pair in SettingPair::all() {
        for column in 0..5 {
            if column == IRREGULAR && t.irregular(pair) == 0 {
                continue;
            }
            out.extend(cell(t, pair, column, opts));
        }
    }
    out
}

pub const CSV_HEADER: [&str; 6] = ["pair", "outcome", "count", "estimate", "ci_low", "ci_high"];

/// Writes the estimates as CSV with fixed six-decimal numbers.
pub fn write_csv<W: Write>(rows: &[Estimate], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.pair.0.label(),
            r.outcome.to_string(),
            r.count.to_string(),
            rational::fixed(r.estimate),
            rational::fixed(r.ci_low),
            rational::fixed(r.ci_high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmpiricalVerdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalBell {
    pub p13: Estimate,
    pub p12: Estimate,
    pub p23: Estimate,
    pub slack: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub verdict: EmpiricalVerdict,
}

/// Empirical `p12 + p23 − p13` with a conservative interval built from the
/// component interval ends. The verdict is inconclusive when the interval
/// contains zero or any subensemble is smaller than [`MIN_SUBENSEMBLE`].
pub fn empirical_bell(t: &FrequencyTable, opts: &EstimateOptions) -> Result<EmpiricalBell, SimulateError> {
    let pp = OutcomePair::PLUS_PLUS;
    let p13 = estimate(t, SettingPair::new(1, 3), pp, opts)?;
    let p12 = estimate(t, SettingPair::new(1, 2), pp, opts)?;
    let p23 = estimate(t, SettingPair::new(2, 3), pp, opts)?;
    let slack = p12.estimate + p23.estimate - p13.estimate;
    let ci_low = p12.ci_low + p23.ci_low - p13.ci_high;
    let ci_high = p12.ci_high + p23.ci_high - p13.ci_low;
    let small = [&p13, &p12, &p23].iter().any(|e| e.subensemble < MIN_SUBENSEMBLE);
    let verdict = if small {
        EmpiricalVerdict::Inconclusive
    } else if ci_low > 0.0 {
        EmpiricalVerdict::Satisfied
    } else if ci_high < 0.0 {
        EmpiricalVerdict::Violated
    } else {
        EmpiricalVerdict::Inconclusive
    };
    Ok(EmpiricalBell {
        p13,
        p12,
        p23,
        slack,
        ci_low,
        ci_high,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Clear,
    Flagged,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoConsCell {
    pub formula: String,
    pub literals: usize,
    pub pair: SettingPairLabel,
    /// `p̂(φ | pair)`.
    pub conditional: f64,
    /// `p̂(φ)` over all trials.
    pub marginal: f64,
    pub delta: f64,
    pub half_width: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalNoCons {
    pub confidence: f64,
    /// Per-cell critical value after the Bonferroni correction over all
    /// cells.
    pub critical_z: f64,
    pub cells: Vec<NoConsCell>,
}

impl EmpiricalNoCons {
    pub fn flagged(&self) -> impl Iterator<Item = &NoConsCell> {
        self.cells.iter().filter(|c| c.status == CellStatus::Flagged)
    }

    pub fn single_literals_clear(&self) -> bool {
        self.flagged().all(|c| c.literals > 1)
    }
}

/// Tests each of the 26 cause conjunctions against each setting pair:
/// `|p̂(φ|s) − p̂(φ)|` is flagged when it exceeds
/// `z √(p̂(φ)(1−p̂(φ))(1/n_s − 1/N))`, the pooled two-proportion bound, with
/// `z` Bonferroni-corrected so the family-wise false positive rate on an
/// independent policy is at most `1 − confidence`. Cells where the pair or
/// its complement has fewer than [`MIN_SUBENSEMBLE`] trials are inconclusive.
pub fn empirical_no_cons(t: &FrequencyTable, opts: &EstimateOptions) -> Result<EmpiricalNoCons, SimulateError> {
    let cc = t.cause_counts.as_ref().ok_or(SimulateError::Blind)?;
    let formulas = cause_conjunctions();
    let cells_total = (formulas.len() * 9) as f64;
    let z = two_sided_z(1.0 - (1.0 - opts.confidence) / cells_total);
    let big_n = t.trials as f64;
    let mut cells = Vec::new();
    for f in &formulas {
        let members: Vec<usize> = CauseAssignment::all().filter(|&c| f.holds(c)).map(|c| c.index()).collect();
        let k_total: u64 = members.iter().map(|&c| cc[c].iter().sum::<u64>()).sum();
        let marginal = k_total as f64 / big_n;
        for pair in SettingPair::all() {
            let n_s = t.pair_total(pair);
            let k_s: u64 = members.iter().map(|&c| cc[c][pair.index()]).sum();
            let conditional = if n_s == 0 { 0.0 } else { k_s as f64 / n_s as f64 };
            let delta = conditional - marginal;
            let inconclusive = n_s < MIN_SUBENSEMBLE || t.trials - n_s < MIN_SUBENSEMBLE;
            let half_width = if n_s == 0 {
                f64::INFINITY
            } else {
                z * (marginal * (1.0 - marginal) * (1.0 / n_s as f64 - 1.0 / big_n)).max(0.0).sqrt()
            };
            let status = if inconclusive {
                CellStatus::Inconclusive
            } else if delta.abs() > half_width {
                CellStatus::Flagged
            } else {
                CellStatus::Clear
            };
            cells.push(NoConsCell {
                formula: f.label.clone(),
                literals: f.literals.unwrap_or(3),
                pair: SettingPairLabel(pair),
                conditional,
                marginal,
                delta,
                half_width,
                status,
            });
        }
    }
    Ok(EmpiricalNoCons {
        confidence: opts.confidence,
        critical_z: z,
        cells,
    })
}
