//! Closed-form singlet-state predictions for three measurement directions.
//!
//! `p(L_i^a ∧ R_j^b | L_i ∧ R_j)` is `½ sin²(φ_ij/2)` for equal outcomes and
//! `½ cos²(φ_ij/2)` for opposite ones; single-wing marginals are always ½.
//! Floating evaluation serves scans; exact evaluation is available whenever
//! `cos φ_ij` is rational (φ ∈ {0°, 60°, 90°, 120°, 180°}).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::derivation::bell_check;
use crate::experiment::{Outcome, OutcomePair, SettingPair, Wing, DIRECTIONS};
use crate::models::TargetStatistics;
use crate::rational::{self, ratio, Rational};

/// Default denominator for rounding irrational predictions.
pub const DEFAULT_DENOMINATOR: u64 = 1_000_000;

/// Tolerance (degrees) for recognizing an angle with a rational cosine.
const EXACT_ANGLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantumError {
    #[error("angle {0} is not a finite number")]
    InvalidAngle(f64),
    #[error("scan grid {0}")]
    InvalidGrid(String),
}

/// Three measurement directions, stored in degrees normalized to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionConfig {
    degrees: [f64; 3],
}

impl DirectionConfig {
    pub fn from_degrees(degrees: [f64; 3]) -> Result<Self, QuantumError> {
        let mut out = [0.0; 3];
        for (o, d) in out.iter_mut().zip(degrees) {
            if !d.is_finite() {
                return Err(QuantumError::InvalidAngle(d));
            }
            *o = d.rem_euclid(360.0);
        }
        Ok(Self { degrees: out })
    }

    pub fn from_radians(radians: [f64; 3]) -> Result<Self, QuantumError> {
        Self::from_degrees(radians.map(f64::to_degrees))
    }

    /// Direction `i` (1-based) in degrees.
    pub fn degrees(&self, i: u8) -> f64 {
        self.degrees[i as usize - 1]
    }

    pub fn radians(&self, i: u8) -> f64 {
        self.degrees(i).to_radians()
    }

    /// `φ_ij` in degrees, in `[0, 180]`.
    pub fn angle_between_degrees(&self, i: u8, j: u8) -> f64 {
        let d = (self.degrees(i) - self.degrees(j)).abs().rem_euclid(360.0);
        if d > 180.0 {
            360.0 - d
        } else {
            d
        }
    }

    /// `φ_ij` in radians, in `[0, π]`.
    pub fn angle_between(&self, i: u8, j: u8) -> f64 {
        self.angle_between_degrees(i, j).to_radians()
    }
}

/// `½ sin²(φ/2)` or `½ cos²(φ/2)` for the given pair and outcomes.
pub fn joint_prob(cfg: &DirectionConfig, pair: SettingPair, outcomes: OutcomePair) -> f64 {
    let half = cfg.angle_between(pair.left, pair.right) / 2.0;
    if outcomes.is_equal() {
        0.5 * half.sin().powi(2)
    } else {
        0.5 * half.cos().powi(2)
    }
}

/// Single-wing marginal; the singlet predicts ½ regardless of arguments.
pub fn marginal_prob(_cfg: &DirectionConfig, _wing: Wing, _pair: SettingPair, _a: Outcome) -> f64 {
    0.5
}

pub fn exact_marginal_prob(_cfg: &DirectionConfig, _wing: Wing, _pair: SettingPair, _a: Outcome) -> Rational {
    ratio(1, 2)
}

/// `cos φ` for the five angles in `[0°, 180°]` where it is rational.
fn rational_cosine(phi_degrees: f64) -> Option<Rational> {
    let nearest = phi_degrees.round();
    if (phi_degrees - nearest).abs() > EXACT_ANGLE_TOLERANCE {
        return None;
    }
    Some(match nearest as i64 {
        0 => ratio(1, 1),
        60 => ratio(1, 2),
        90 => ratio(0, 1),
        120 => ratio(-1, 2),
        180 => ratio(-1, 1),
        _ => return None,
    })
}

/// Exact joint probability when `cos φ_ij` is rational:
/// `½ sin²(φ/2) = (1 − cos φ)/4` and `½ cos²(φ/2) = (1 + cos φ)/4`.
pub fn exact_joint_prob(
    cfg: &DirectionConfig,
    pair: SettingPair,
    outcomes: OutcomePair,
) -> Option<Rational> {
    let cos = rational_cosine(cfg.angle_between_degrees(pair.left, pair.right))?;
    let one = ratio(1, 1);
    Some(if outcomes.is_equal() { (one - cos) / ratio(4, 1) } else { (one + cos) / ratio(4, 1) })
}

/// `E(i,j) = p(++) + p(−−) − p(+−) − p(−+)`, which equals `−cos φ_ij`.
pub fn correlation_coefficient(cfg: &DirectionConfig, pair: SettingPair) -> f64 {
    OutcomePair::ALL
        .iter()
        .map(|&o| {
            let p = joint_prob(cfg, pair, o);
            if o.is_equal() {
                p
            } else {
                -p
            }
        })
        .sum()
}

/// Floating joint table for all nine setting pairs, columns `++, +-, -+, --`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeTable {
    pub entries: BTreeMap<SettingPair, [f64; 4]>,
}

pub fn outcome_table(cfg: &DirectionConfig) -> OutcomeTable {
    OutcomeTable {
        entries: SettingPair::all_for(DIRECTIONS)
            .map(|pair| (pair, OutcomePair::ALL.map(|o| joint_prob(cfg, pair, o))))
            .collect(),
    }
}

/// Target table for the feasibility solver. Pairs at rational-cosine angles
/// are exact; the rest are rounded to `denominator` and the table carries the
/// rounding radius `1/denominator`.
pub fn quantum_targets(cfg: &DirectionConfig, denominator: u64) -> TargetStatistics {
    assert!(denominator > 0, "denominator must be positive");
    let mut targets = TargetStatistics::new();
    let mut rounded = false;
    for pair in SettingPair::all() {
        let equal = match exact_joint_prob(cfg, pair, OutcomePair::PLUS_PLUS) {
            Some(p) => p,
            None => {
                rounded = true;
                rational::round_to_denominator(joint_prob(cfg, pair, OutcomePair::PLUS_PLUS), denominator)
            }
        };
        let opposite = ratio(1, 2) - &equal;
        targets
            .insert(pair, [equal.clone(), opposite.clone(), opposite, equal])
            .expect("rows sum to one by construction");
    }
    if rounded {
        targets.set_radius(Some(ratio(1, denominator as i64)));
    }
    targets
}

/// Exact Wigner-triple `(p13, p12, p23)` when all three angles are exact.
pub fn exact_wigner_triple(cfg: &DirectionConfig) -> Option<(Rational, Rational, Rational)> {
    let pp = |l, r| exact_joint_prob(cfg, SettingPair::new(l, r), OutcomePair::PLUS_PLUS);
    Some((pp(1, 3)?, pp(1, 2)?, pp(2, 3)?))
}

pub fn wigner_triple(cfg: &DirectionConfig) -> (f64, f64, f64) {
    let pp = |l, r| joint_prob(cfg, SettingPair::new(l, r), OutcomePair::PLUS_PLUS);
    (pp(1, 3), pp(1, 2), pp(2, 3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub theta: f64,
    pub p13: f64,
    pub p12: f64,
    pub p23: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WignerScan {
    pub rows: Vec<ScanRow>,
    /// Index of the row with the smallest slack.
    pub argmin: usize,
}

impl WignerScan {
    pub fn min_row(&self) -> &ScanRow {
        &self.rows[self.argmin]
    }
}

/// Wigner-Bell slack over equally spaced configurations `(0, θ, 2θ)`,
/// θ running from `start` to `stop` (degrees, both in `(0, 180)`) in steps
/// of `step`. Grid points are `start + k·step`, never accumulated.
pub fn wigner_scan(start: f64, stop: f64, step: f64) -> Result<WignerScan, QuantumError> {
    let open = |x: f64| x.is_finite() && x > 0.0 && x < 180.0;
    if !open(start) || !open(stop) {
        return Err(QuantumError::InvalidGrid(format!(
            "bounds must lie in (0°, 180°), got {start}..{stop}"
        )));
    }
    if !(step.is_finite() && step > 0.0) || stop < start {
        return Err(QuantumError::InvalidGrid(format!(
            "needs a positive step and start ≤ stop, got {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let mut rows = Vec::with_capacity(count);
    for k in 0..count {
        let theta = start + k as f64 * step;
        let cfg = DirectionConfig::from_degrees([0.0, theta, 2.0 * theta])?;
        let (p13, p12, p23) = wigner_triple(&cfg);
        let slack = bell_check(p13, p12, p23).expect("probabilities lie in [0, 1]").slack;
        rows.push(ScanRow {
            theta,
            p13,
            p12,
            p23,
            slack,
        });
    }
    let argmin = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.slack.total_cmp(&b.1.slack))
        .map(|(k, _)| k)
        .expect("grid is non-empty");
    Ok(WignerScan { rows, argmin })
}
