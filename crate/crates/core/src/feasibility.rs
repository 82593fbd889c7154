//! Exact linear feasibility of target statistics under the minimal-theory
//! response and setting-independent causes.
//!
//! With `k` directions there is one unknown `q(c)` per assignment of the
//! cause atoms `C11 … Ckk`. Outcomes are deterministic functions of the
//! assignment (left `+` iff `C_ii`, right `+` iff `¬C_jj`), so every target
//! entry is a 0/1 sum of unknowns. A verdict always carries a certificate:
//! a witness distribution, or multipliers `y` with `Aᵀy ≤ 0` and `bᵀy > 0`.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::experiment::{Outcome, OutcomePair, SettingPair};
use crate::models::{predicted_conditionals, HiddenVariableModel, TargetStatistics};
use crate::rational::{self, Rational};

/// Largest supported number of directions (`2^12` unknowns).
pub const MAX_DIRECTIONS: u8 = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeasibilityError {
    #[error("malformed targets: {0}")]
    MalformedTargets(String),
    #[error("certificate does not verify: {0}")]
    CertificateMismatch(String),
}

/// One equality `Σ_{c ∈ S} q(c) = target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Constraint {
    /// Target entries this row stands for, e.g. `p12(+-)`, or
    /// `normalization`. Identical rows are merged.
    pub labels: Vec<String>,
    /// 0/1 coefficient per assignment; bit `i−1` of the index is `C_ii`.
    pub coefficients: Vec<u8>,
    #[serde(with = "crate::rational::serde_text")]
    pub target: Rational,
}

impl Constraint {
    pub fn is_normalization(&self) -> bool {
        self.labels.iter().any(|l| l == NORMALIZATION)
    }

    fn evaluate(&self, q: &[Rational]) -> Rational {
        self.coefficients
            .iter()
            .zip(q)
            .filter(|(&a, _)| a == 1)
            .map(|(_, x)| x.clone())
            .sum()
    }
}

const NORMALIZATION: &str = "normalization";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityProblem {
    pub directions: u8,
    pub pairs: Vec<SettingPair>,
    pub constraints: Vec<Constraint>,
    /// Rounding radius of the target entries, if any.
    #[serde(with = "crate::rational::serde_text_opt")]
    pub radius: Option<Rational>,
    #[serde(skip)]
    targets: TargetStatistics,
}

impl FeasibilityProblem {
    pub fn targets(&self) -> &TargetStatistics {
        &self.targets
    }

    pub fn variables(&self) -> usize {
        1 << self.directions
    }

    fn row_of(&self, label: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c.labels.iter().any(|l| l == label))
    }
}

fn entry_label(pair: SettingPair, o: OutcomePair) -> String {
    format!("p{}({})", pair.label(), o.label())
}

/// Minimal-theory outcome of assignment `c` (bit `i−1` is `C_ii`) at `pair`.
fn mth_outcome(c: usize, pair: SettingPair) -> OutcomePair {
    let cause = |i: u8| c >> (i - 1) & 1 == 1;
    OutcomePair::new(
        if cause(pair.left) { Outcome::Plus } else { Outcome::Minus },
        if cause(pair.right) { Outcome::Minus } else { Outcome::Plus },
    )
}

/// Builds the equality system for the selected pairs (all target pairs when
/// `pairs` is empty). Per pair the `--` entry is implied by the other three
/// and normalization, so three rows are emitted; rows with no coefficients
/// and a zero target are dropped and duplicates merged.
pub fn encode(targets: &TargetStatistics, pairs: &[SettingPair]) -> Result<FeasibilityProblem, FeasibilityError> {
    let pairs: Vec<SettingPair> = if pairs.is_empty() {
        targets.pairs().collect()
    } else {
        pairs.to_vec()
    };
    if pairs.is_empty() {
        return Err(FeasibilityError::MalformedTargets("no setting pairs selected".into()));
    }
    let max = pairs.iter().map(|p| p.left.max(p.right)).max().unwrap_or(0);
    if pairs.iter().any(|p| p.left == 0 || p.right == 0) || max > MAX_DIRECTIONS {
        return Err(FeasibilityError::MalformedTargets(format!(
            "directions must lie in 1..={MAX_DIRECTIONS}"
        )));
    }
    let directions = max.max(3);
    if directions > 3 {
        log::warn!(
            "{directions} directions: solving over {} cause assignments; exact arithmetic cost grows quickly",
            1usize << directions
        );
    }
    let n = 1usize << directions;
    let mut constraints: Vec<Constraint> = Vec::new();
    let mut push = |label: String, coefficients: Vec<u8>, target: Rational| {
        if coefficients.iter().all(|&a| a == 0) && target.is_zero() {
            return;
        }
        if let Some(c) = constraints
            .iter_mut()
            .find(|c| c.coefficients == coefficients && c.target == target)
        {
            c.labels.push(label);
        } else {
            constraints.push(Constraint {
                labels: vec![label],
                coefficients,
                target,
            });
        }
    };
    for &pair in &pairs {
        let row = targets
            .row(pair)
            .ok_or_else(|| FeasibilityError::MalformedTargets(format!("no targets for pair {pair}")))?;
        let total: Rational = row.iter().cloned().sum();
        if !total.is_one() || row.iter().any(|x| x.is_negative()) {
            return Err(FeasibilityError::MalformedTargets(format!("pair {pair} is not normalized")));
        }
        for o in &OutcomePair::ALL[..3] {
            let coefficients = (0..n).map(|c| u8::from(mth_outcome(c, pair) == *o)).collect();
            push(entry_label(pair, *o), coefficients, row[o.index()].clone());
        }
    }
    push(NORMALIZATION.into(), vec![1; n], Rational::one());
    let restricted = targets.restrict(&pairs);
    Ok(FeasibilityProblem {
        directions,
        pairs,
        constraints,
        radius: targets.radius().cloned(),
        targets: restricted,
    })
}

/// Distribution over cause assignments reproducing the targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub directions: u8,
    #[serde(with = "crate::rational::serde_text_vec")]
    pub distribution: Vec<Rational>,
}

impl Witness {
    /// The witness as a three-direction model with the uniform independent
    /// policy and minimal-theory response.
    pub fn model(&self) -> Option<HiddenVariableModel> {
        (self.directions == 3)
            .then(|| HiddenVariableModel::mth(self.distribution.clone()).ok())
            .flatten()
    }
}

/// Separating functional over the constraint rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Certificate {
    /// One multiplier per constraint row.
    #[serde(with = "crate::rational::serde_text_vec")]
    pub multipliers: Vec<Rational>,
    /// `eq32` for a Wigner-Bell form, `agreement` for the three-way
    /// agreement bound, absent for a generic functional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Human-readable inequality, when named.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inequality: Option<String>,
    /// `bᵀy`.
    #[serde(with = "crate::rational::serde_text")]
    pub violation: Rational,
    /// `ε · Σ |y|` over target rows; zero for exact targets.
    #[serde(with = "crate::rational::serde_text")]
    pub bound: Rational,
}

impl Certificate {
    fn margin(&self) -> Rational {
        &self.violation - &self.bound
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FeasibilityResult {
    Feasible { witness: Witness },
    Infeasible { certificate: Certificate },
    /// The rounded targets are infeasible, but no certificate found clears
    /// the rounding radius.
    Indeterminate {
        #[serde(with = "crate::rational::serde_text")]
        radius: Rational,
        certificate: Certificate,
    },
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityResult::Feasible { .. })
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            FeasibilityResult::Feasible { .. } => None,
            FeasibilityResult::Infeasible { certificate } | FeasibilityResult::Indeterminate { certificate, .. } => {
                Some(certificate)
            }
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            FeasibilityResult::Feasible { witness } => Some(witness),
            _ => None,
        }
    }
}

impl fmt::Display for FeasibilityResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeasibilityResult::Feasible { .. } => write!(f, "FEASIBLE"),
            FeasibilityResult::Infeasible { certificate } => {
                write!(f, "INFEASIBLE")?;
                if let Some(name) = &certificate.name {
                    write!(f, " certificate={name}")?;
                }
                write!(f, " violation={}", rational::Exact(&certificate.violation))
            }
            FeasibilityResult::Indeterminate { radius, .. } => {
                write!(f, "INDETERMINATE radius={}", rational::Exact(radius))
            }
        }
    }
}

/// Decides the problem exactly and re-verifies the attached certificate
/// before returning it.
pub fn solve(p: &FeasibilityProblem) -> FeasibilityResult {
    let result = match phase_one(p) {
        Phase1::Feasible(q) => FeasibilityResult::Feasible {
            witness: Witness {
                directions: p.directions,
                distribution: q,
            },
        },
        Phase1::Infeasible(y) => {
            let generic = certificate(p, y, None, None);
            let best = named_certificates(p)
                .into_iter()
                .find(|c| c.margin().is_positive())
                .unwrap_or(generic);
            match (&p.radius, best.margin().is_positive()) {
                (Some(radius), false) => FeasibilityResult::Indeterminate {
                    radius: radius.clone(),
                    certificate: best,
                },
                _ => FeasibilityResult::Infeasible { certificate: best },
            }
        }
    };
    if let Err(e) = verify_certificate(&result, p) {
        panic!("solver produced an unverifiable certificate: {e}");
    }
    result
}

fn certificate(p: &FeasibilityProblem, y: Vec<Rational>, name: Option<&str>, inequality: Option<String>) -> Certificate {
    let violation = p
        .constraints
        .iter()
        .zip(&y)
        .map(|(c, y)| &c.target * y)
        .sum();
    Certificate {
        bound: weighted_radius(p, &y),
        multipliers: y,
        name: name.map(str::to_string),
        inequality,
        violation,
    }
}

fn weighted_radius(p: &FeasibilityProblem, y: &[Rational]) -> Rational {
    let Some(radius) = &p.radius else {
        return Rational::zero();
    };
    let weight: Rational = p
        .constraints
        .iter()
        .zip(y)
        .filter(|(c, _)| !c.is_normalization())
        .map(|(_, y)| y.abs())
        .sum();
    radius * weight
}

/// Wigner-Bell forms `p_ik(++) ≤ p_ij(++) + p_jk(++)` for every ordered
/// triple of distinct directions, then the agreement bound
/// `Σ_pairs [p(+-) + p(-+)] ≥ 1` for every unordered triple.
fn named_certificates(p: &FeasibilityProblem) -> Vec<Certificate> {
    let m = p.constraints.len();
    let mut out = Vec::new();
    let k = p.directions;
    let find_pair = |a: u8, b: u8| p.pairs.iter().copied().find(|&s| s == SettingPair::new(a, b));
    for i in 1..=k {
        for j in 1..=k {
            for l in 1..=k {
                if i == j || j == l || i == l {
                    continue;
                }
                let (Some(ik), Some(ij), Some(jl)) = (find_pair(i, l), find_pair(i, j), find_pair(j, l)) else {
                    continue;
                };
                let pp = OutcomePair::PLUS_PLUS;
                let rows = [(ik, 1), (ij, -1), (jl, -1)];
                let mut y = vec![Rational::zero(); m];
                let mut ok = true;
                for (pair, sign) in rows {
                    match p.row_of(&entry_label(pair, pp)) {
                        Some(r) => y[r] += Rational::from_integer(sign.into()),
                        None => ok = false,
                    }
                }
                if ok {
                    let text = format!("p{}(++) ≤ p{}(++) + p{}(++)", ik.label(), ij.label(), jl.label());
                    out.push(certificate(p, y, Some("eq32"), Some(text)));
                }
            }
        }
    }
    let plus_minus = OutcomePair::new(Outcome::Plus, Outcome::Minus);
    let minus_plus = OutcomePair::new(Outcome::Minus, Outcome::Plus);
    for i in 1..=k {
        for j in i + 1..=k {
            for l in j + 1..=k {
                let mut chosen = Vec::new();
                for (a, b) in [(i, j), (j, l), (i, l)] {
                    if let Some(s) = find_pair(a, b).or_else(|| find_pair(b, a)) {
                        chosen.push(s);
                    }
                }
                if chosen.len() != 3 {
                    continue;
                }
                let mut y = vec![Rational::zero(); m];
                let Some(norm) = p.row_of(NORMALIZATION) else { continue };
                y[norm] += Rational::one();
                let mut ok = true;
                for &pair in &chosen {
                    for o in [plus_minus, minus_plus] {
                        match p.row_of(&entry_label(pair, o)) {
                            Some(r) => y[r] -= Rational::one(),
                            None => ok = false,
                        }
                    }
                }
                if ok {
                    let text = format!(
                        "{} ≥ 1",
                        chosen
                            .iter()
                            .map(|s| format!("p{0}(+-) + p{0}(-+)", s.label()))
                            .collect::<Vec<_>>()
                            .join(" + ")
                    );
                    out.push(certificate(p, y, Some("agreement"), Some(text)));
                }
            }
        }
    }
    out
}

/// Checks a result against the problem without re-running the solver.
pub fn verify_certificate(r: &FeasibilityResult, p: &FeasibilityProblem) -> Result<(), FeasibilityError> {
    let mismatch = |s: String| Err(FeasibilityError::CertificateMismatch(s));
    match r {
        FeasibilityResult::Feasible { witness } => {
            let q = &witness.distribution;
            if witness.directions != p.directions || q.len() != p.variables() {
                return mismatch("witness has the wrong dimension".into());
            }
            if q.iter().any(|x| x.is_negative()) {
                return mismatch("witness has a negative weight".into());
            }
            if !q.iter().cloned().sum::<Rational>().is_one() {
                return mismatch("witness is not normalized".into());
            }
            if let Some(model) = witness.model() {
                let predicted = predicted_conditionals(&model).map_err(|e| FeasibilityError::CertificateMismatch(e.to_string()))?;
                for &pair in &p.pairs {
                    if predicted.row(pair) != p.targets.row(pair) {
                        return mismatch(format!("witness does not reproduce pair {pair}"));
                    }
                }
            }
            for c in &p.constraints {
                if c.evaluate(q) != c.target {
                    return mismatch(format!("witness violates {}", c.labels.join(", ")));
                }
            }
            Ok(())
        }
        FeasibilityResult::Infeasible { certificate } | FeasibilityResult::Indeterminate { certificate, .. } => {
            let y = &certificate.multipliers;
            if y.len() != p.constraints.len() {
                return mismatch("one multiplier per constraint required".into());
            }
            for col in 0..p.variables() {
                let s: Rational = p
                    .constraints
                    .iter()
                    .zip(y)
                    .filter(|(c, _)| c.coefficients[col] == 1)
                    .map(|(_, y)| y.clone())
                    .sum();
                if s.is_positive() {
                    return mismatch(format!("functional is positive on assignment {col}"));
                }
            }
            let expected = self::certificate(p, y.clone(), None, None);
            if expected.violation != certificate.violation || expected.bound != certificate.bound {
                return mismatch("recorded violation or bound is wrong".into());
            }
            if !certificate.violation.is_positive() {
                return mismatch("functional does not separate the targets".into());
            }
            let clears = certificate.margin().is_positive();
            match r {
                FeasibilityResult::Infeasible { .. } if !clears => {
                    mismatch("violation does not exceed the rounding bound".into())
                }
                FeasibilityResult::Indeterminate { .. } if clears => {
                    mismatch("certificate clears the rounding bound; verdict should be infeasible".into())
                }
                _ => Ok(()),
            }
        }
    }
}

enum Phase1 {
    Feasible(Vec<Rational>),
    /// Farkas multipliers in the original row signs.
    Infeasible(Vec<Rational>),
}

/// Phase one of the simplex method with Bland's rule, in exact arithmetic.
/// Artificial columns never re-enter, so termination leaves reduced costs
/// `-(wᵀA)` non-negative on the real columns.
fn phase_one(p: &FeasibilityProblem) -> Phase1 {
    let m = p.constraints.len();
    let n = p.variables();
    let width = n + m;
    let signs: Vec<bool> = p.constraints.iter().map(|c| c.target.is_negative()).collect();
    let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rational> = Vec::with_capacity(m);
    for (r, c) in p.constraints.iter().enumerate() {
        let flip = if signs[r] { -Rational::one() } else { Rational::one() };
        let mut row = vec![Rational::zero(); width];
        for (j, &a) in c.coefficients.iter().enumerate() {
            if a == 1 {
                row[j] = flip.clone();
            }
        }
        row[n + r] = Rational::one();
        rows.push(row);
        rhs.push(&c.target * &flip);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // Reduced costs of the phase-one objective (sum of artificials).
    let mut cost = vec![Rational::zero(); width];
    for j in 0..n {
        cost[j] = -rows.iter().map(|row| row[j].clone()).sum::<Rational>();
    }
    let mut value: Rational = rhs.iter().cloned().sum();

    while let Some(enter) = (0..n).find(|&j| cost[j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for r in 0..m {
            if rows[r][enter].is_positive() {
                let t = &rhs[r] / &rows[r][enter];
                let better = match &leave {
                    None => true,
                    Some((lr, lt)) => t < *lt || (t == *lt && basis[r] < basis[*lr]),
                };
                if better {
                    leave = Some((r, t));
                }
            }
        }
        // The objective is bounded below by zero, so a leaving row exists.
        let (r, _) = leave.expect("phase one is bounded");
        let pivot = rows[r][enter].clone();
        for x in rows[r].iter_mut() {
            *x /= &pivot;
        }
        rhs[r] /= &pivot;
        let pivot_row = rows[r].clone();
        let pivot_rhs = rhs[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            rhs[i] -= &f * &pivot_rhs;
        }
        let f = cost[enter].clone();
        for (x, y) in cost.iter_mut().zip(&pivot_row) {
            if !y.is_zero() {
                *x -= &f * y;
            }
        }
        value += &f * &pivot_rhs;
        basis[r] = enter;
    }

    if value.is_zero() {
        let mut q = vec![Rational::zero(); n];
        for (r, &b) in basis.iter().enumerate() {
            if b < n {
                q[b] = rhs[r].clone();
            }
        }
        Phase1::Feasible(q)
    } else {
        // Artificial column r has unit cost, so its reduced cost is 1 − w_r.
        let y = (0..m)
            .map(|r| {
                let w = Rational::one() - &cost[n + r];
                if signs[r] {
                    -w
                } else {
                    w
                }
            })
            .collect();
        Phase1::Infeasible(y)
    }
}
