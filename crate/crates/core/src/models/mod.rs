//! Separate-common-cause hidden-variable models and the probability
//! spaces they induce.
//!
//! A model draws an assignment of the three parallel-pair causes
//! `C11, C22, C33`, then a setting pair (possibly depending on the
//! assignment), and finally outcomes through a response rule. The default
//! rule is the minimal-theory rule: left `+` at `L_i` iff `C_ii`, right `+`
//! at `R_j` iff `¬C_jj`.

pub mod catalog;
mod doc;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::experiment::{
    cause_event, outcome_event, setting_event, Outcome, OutcomePair, SettingPair, Wing, DIRECTIONS,
};
use crate::probability::{EventExpr, FiniteProbabilitySpace, SpaceBuilder, SpaceError};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("setting pair {0} has probability zero")]
    ZeroConditioning(SettingPair),
    #[error("invalid target statistics: {0}")]
    InvalidTargets(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Truth values of `C11, C22, C33`, packed as bits 0..3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CauseAssignment(u8);

impl CauseAssignment {
    pub const COUNT: usize = 8;

    pub fn from_bits(bits: u8) -> Self {
        assert!(bits < 8, "three cause atoms");
        Self(bits)
    }

    pub fn from_values(c11: bool, c22: bool, c33: bool) -> Self {
        Self(c11 as u8 | (c22 as u8) << 1 | (c33 as u8) << 2)
    }

    pub fn all() -> impl Iterator<Item = CauseAssignment> {
        (0..8).map(CauseAssignment)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Value of `C_ii` for the 1-based direction `i`.
    pub fn cause(self, direction: u8) -> bool {
        self.0 >> (direction - 1) & 1 == 1
    }

    /// `TFT`-style label, `C11` first.
    pub fn label(self) -> String {
        (1..=DIRECTIONS)
            .map(|i| if self.cause(i) { 'T' } else { 'F' })
            .collect()
    }
}

impl fmt::Display for CauseAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Distribution over the nine setting pairs, optionally conditioned on the
/// cause assignment (which makes conspiratorial models representable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SettingPolicy {
    /// One row of nine probabilities, indexed by [`SettingPair::index`].
    Independent(Vec<Rational>),
    /// One row per cause assignment.
    Conditional(Vec<Vec<Rational>>),
}

impl SettingPolicy {
    pub fn uniform() -> Self {
        SettingPolicy::Independent(vec![rational::ratio(1, 9); 9])
    }

    /// `p(pair | c)`.
    pub fn prob(&self, c: CauseAssignment, pair: SettingPair) -> &Rational {
        &self.row(c)[pair.index()]
    }

    pub fn row(&self, c: CauseAssignment) -> &[Rational] {
        match self {
            SettingPolicy::Independent(row) => row,
            SettingPolicy::Conditional(rows) => &rows[c.index()],
        }
    }

    pub fn is_independent(&self) -> bool {
        matches!(self, SettingPolicy::Independent(_))
    }

    fn validate(&self) -> Result<(), ModelError> {
        let rows: Vec<&Vec<Rational>> = match self {
            SettingPolicy::Independent(row) => vec![row],
            SettingPolicy::Conditional(rows) => {
                if rows.len() != CauseAssignment::COUNT {
                    return Err(ModelError::InvalidModel(format!(
                        "conditional policy needs 8 rows, got {}",
                        rows.len()
                    )));
                }
                rows.iter().collect()
            }
        };
        for (k, row) in rows.iter().enumerate() {
            check_distribution(row, 9, &format!("policy row {k}"))?;
        }
        Ok(())
    }
}

fn check_distribution(row: &[Rational], len: usize, what: &str) -> Result<(), ModelError> {
    if row.len() != len {
        return Err(ModelError::InvalidModel(format!(
            "{what} has {} entries, expected {len}",
            row.len()
        )));
    }
    if let Some(p) = row.iter().find(|p| p.is_negative()) {
        return Err(ModelError::InvalidModel(format!(
            "{what} has negative entry {}",
            rational::to_text(p)
        )));
    }
    let total: Rational = row.iter().cloned().sum();
    if !total.is_one() {
        return Err(ModelError::InvalidModel(format!(
            "{what} sums to {}, expected 1",
            rational::to_text(&total)
        )));
    }
    Ok(())
}

/// What one wing registers in one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WingResponse {
    Outcome(Outcome),
    /// No outcome is registered.
    Silent,
    /// Both outcomes are registered at once.
    Both,
}

impl WingResponse {
    pub fn symbol(self) -> char {
        match self {
            WingResponse::Outcome(o) => o.symbol(),
            WingResponse::Silent => '0',
            WingResponse::Both => '*',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '0' => Some(WingResponse::Silent),
            '*' => Some(WingResponse::Both),
            other => Outcome::from_symbol(other).map(WingResponse::Outcome),
        }
    }

    fn outcomes(self) -> &'static [Outcome] {
        match self {
            WingResponse::Outcome(Outcome::Plus) => &[Outcome::Plus],
            WingResponse::Outcome(Outcome::Minus) => &[Outcome::Minus],
            WingResponse::Silent => &[],
            WingResponse::Both => &Outcome::BOTH,
        }
    }
}

/// Maps `(assignment, setting pair)` to what each wing registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseRule {
    /// Minimal-theory rule.
    Mth,
    /// Explicit table: 8 rows (assignments) × 9 columns (setting pairs).
    Table(Vec<Vec<(WingResponse, WingResponse)>>),
}

impl ResponseRule {
    /// MTH rule written out as a table, ready for targeted edits.
    pub fn mth_table() -> Vec<Vec<(WingResponse, WingResponse)>> {
        CauseAssignment::all()
            .map(|c| {
                SettingPair::all()
                    .map(|s| {
                        let o = mth_outcomes(c, s);
                        (WingResponse::Outcome(o.left), WingResponse::Outcome(o.right))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn respond(&self, c: CauseAssignment, pair: SettingPair) -> (WingResponse, WingResponse) {
        match self {
            ResponseRule::Mth => {
                let o = mth_outcomes(c, pair);
                (WingResponse::Outcome(o.left), WingResponse::Outcome(o.right))
            }
            ResponseRule::Table(rows) => rows[c.index()][pair.index()],
        }
    }
}

/// Outcomes dictated by the minimal theories.
pub fn mth_outcomes(c: CauseAssignment, pair: SettingPair) -> OutcomePair {
    let left = if c.cause(pair.left) { Outcome::Plus } else { Outcome::Minus };
    let right = if c.cause(pair.right) { Outcome::Minus } else { Outcome::Plus };
    OutcomePair::new(left, right)
}

/// Distribution over cause assignments, setting policy and response rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "doc::ModelDoc", into = "doc::ModelDoc")]
pub struct HiddenVariableModel {
    cause_dist: Vec<Rational>,
    policy: SettingPolicy,
    response: ResponseRule,
}

impl HiddenVariableModel {
    pub fn new(
        cause_dist: Vec<Rational>,
        policy: SettingPolicy,
        response: ResponseRule,
    ) -> Result<Self, ModelError> {
        check_distribution(&cause_dist, CauseAssignment::COUNT, "cause distribution")?;
        policy.validate()?;
        if let ResponseRule::Table(rows) = &response {
            if rows.len() != CauseAssignment::COUNT || rows.iter().any(|r| r.len() != 9) {
                return Err(ModelError::InvalidModel(
                    "response table must be 8 rows of 9 entries".into(),
                ));
            }
        }
        Ok(Self {
            cause_dist,
            policy,
            response,
        })
    }

    /// MTH response with a setting-independent uniform policy.
    pub fn mth(cause_dist: Vec<Rational>) -> Result<Self, ModelError> {
        Self::new(cause_dist, SettingPolicy::uniform(), ResponseRule::Mth)
    }

    pub fn cause_dist(&self) -> &[Rational] {
        &self.cause_dist
    }

    pub fn cause_prob(&self, c: CauseAssignment) -> &Rational {
        &self.cause_dist[c.index()]
    }

    pub fn policy(&self) -> &SettingPolicy {
        &self.policy
    }

    pub fn response(&self) -> &ResponseRule {
        &self.response
    }

    /// Marginal probability of a setting pair.
    pub fn pair_prob(&self, pair: SettingPair) -> Rational {
        CauseAssignment::all()
            .map(|c| self.cause_prob(c) * self.policy.prob(c, pair))
            .sum()
    }

    /// Builder for the induced space, exposed so that callers can graft
    /// additional (possibly defective) event extensions onto it.
    pub fn space_builder(&self) -> SpaceBuilder {
        let mut b = SpaceBuilder::new();
        for i in 1..=DIRECTIONS {
            for wing in [Wing::Left, Wing::Right] {
                b.declare(setting_event(wing, i));
                for o in Outcome::BOTH {
                    b.declare(outcome_event(wing, i, o));
                }
            }
            b.declare(cause_event(i));
        }
        for c in CauseAssignment::all() {
            for pair in SettingPair::all() {
                let weight = self.cause_prob(c) * self.policy.prob(c, pair);
                if weight.is_zero() {
                    continue;
                }
                let w = b.world(format!("c={c};s={pair}"), weight);
                for i in 1..=DIRECTIONS {
                    if c.cause(i) {
                        b.holds(w, cause_event(i));
                    }
                }
                let (left, right) = pair.settings();
                b.holds(w, left).holds(w, right);
                let (lr, rr) = self.response.respond(c, pair);
                for &o in lr.outcomes() {
                    b.holds(w, outcome_event(Wing::Left, pair.left, o));
                }
                for &o in rr.outcomes() {
                    b.holds(w, outcome_event(Wing::Right, pair.right, o));
                }
            }
        }
        b
    }

    /// The induced finite probability space: one world per positive-weight
    /// `(assignment, setting pair)`.
    pub fn to_space(&self) -> FiniteProbabilitySpace {
        self.space_builder()
            .build()
            .expect("validated model induces a normalized space")
    }
}

/// Free-function form of [`HiddenVariableModel::to_space`].
pub fn model_to_space(m: &HiddenVariableModel) -> FiniteProbabilitySpace {
    m.to_space()
}

/// `L_i ∧ R_j`.
pub fn settings_expr(pair: SettingPair) -> EventExpr {
    let (l, r) = pair.settings();
    EventExpr::atom(l) & EventExpr::atom(r)
}

/// `L_i^a ∧ R_j^b`.
pub fn outcomes_expr(pair: SettingPair, outcomes: OutcomePair) -> EventExpr {
    EventExpr::atom(outcome_event(Wing::Left, pair.left, outcomes.left))
        & EventExpr::atom(outcome_event(Wing::Right, pair.right, outcomes.right))
}

/// Table of conditional outcome probabilities `p_ij(a, b)` per setting pair.
///
/// Entries may carry a rounding radius when they approximate irrational
/// values.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "doc::TargetsDoc", into = "doc::TargetsDoc")]
pub struct TargetStatistics {
    entries: BTreeMap<SettingPair, [Rational; 4]>,
    radius: Option<Rational>,
}

impl TargetStatistics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pair's four entries (order `++, +-, -+, --`); they must be
    /// non-negative and sum to one.
    pub fn insert(&mut self, pair: SettingPair, row: [Rational; 4]) -> Result<(), ModelError> {
        if row.iter().any(|p| p.is_negative()) {
            return Err(ModelError::InvalidTargets(format!("pair {pair} has a negative entry")));
        }
        let total: Rational = row.iter().cloned().sum();
        if !total.is_one() {
            return Err(ModelError::InvalidTargets(format!(
                "pair {pair} sums to {}",
                rational::to_text(&total)
            )));
        }
        self.entries.insert(pair, row);
        Ok(())
    }

    pub fn set_radius(&mut self, radius: Option<Rational>) {
        self.radius = radius.filter(|r| !r.is_zero());
    }

    pub fn radius(&self) -> Option<&Rational> {
        self.radius.as_ref()
    }

    pub fn get(&self, pair: SettingPair, outcomes: OutcomePair) -> Option<&Rational> {
        self.entries.get(&pair).map(|row| &row[outcomes.index()])
    }

    pub fn row(&self, pair: SettingPair) -> Option<&[Rational; 4]> {
        self.entries.get(&pair)
    }

    pub fn pairs(&self) -> impl Iterator<Item = SettingPair> + '_ {
        self.entries.keys().copied()
    }

    /// Keeps only the listed pairs.
    pub fn restrict(&self, pairs: &[SettingPair]) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(p, _)| pairs.contains(p))
                .map(|(p, r)| (*p, r.clone()))
                .collect(),
            radius: self.radius.clone(),
        }
    }

    /// `(p13, p12, p23)` of `++` outcomes, when all three pairs are present.
    pub fn wigner_triple(&self) -> Option<(Rational, Rational, Rational)> {
        let pp = |l, r| self.get(SettingPair::new(l, r), OutcomePair::PLUS_PLUS).cloned();
        Some((pp(1, 3)?, pp(1, 2)?, pp(2, 3)?))
    }
}

/// Exact `p_ij(a, b)` for every setting pair of the model.
pub fn predicted_conditionals(m: &HiddenVariableModel) -> Result<TargetStatistics, ModelError> {
    let space = m.to_space();
    let mut targets = TargetStatistics::new();
    for pair in SettingPair::all() {
        let given = settings_expr(pair);
        let mut row: [Rational; 4] = Default::default();
        for o in OutcomePair::ALL {
            row[o.index()] = match space.cond_prob(&outcomes_expr(pair, o), &given) {
                Ok(p) => p,
                Err(SpaceError::ZeroConditioning) => return Err(ModelError::ZeroConditioning(pair)),
                Err(e) => return Err(e.into()),
            };
        }
        targets.insert(pair, row)?;
    }
    Ok(targets)
}

/// A boolean combination of cause atoms, identified by the set of
/// assignments on which it holds (bit `c` of `members`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauseFormula {
    pub label: String,
    pub expr: EventExpr,
    pub members: u8,
    /// Number of literals when the formula is a conjunction of literals.
    pub literals: Option<usize>,
}

impl CauseFormula {
    pub fn holds(&self, c: CauseAssignment) -> bool {
        self.members >> c.bits() & 1 == 1
    }
}

/// All conjunctions of one to three cause literals (26 formulas).
pub fn cause_conjunctions() -> Vec<CauseFormula> {
    let mut out = Vec::new();
    for subset in 1u8..8 {
        let dirs: Vec<u8> = (1..=DIRECTIONS).filter(|i| subset >> (i - 1) & 1 == 1).collect();
        for signs in 0u8..(1 << dirs.len()) {
            let literals: Vec<(u8, bool)> = dirs
                .iter()
                .enumerate()
                .map(|(k, &i)| (i, signs >> k & 1 == 0))
                .collect();
            let label = literals
                .iter()
                .map(|&(i, pos)| format!("{}{}", if pos { "" } else { "¬" }, cause_event(i)))
                .collect::<Vec<_>>()
                .join("∧");
            let expr = EventExpr::all(literals.iter().map(|&(i, pos)| {
                let a = EventExpr::atom(cause_event(i));
                if pos {
                    a
                } else {
                    !a
                }
            }));
            let members = CauseAssignment::all()
                .filter(|c| literals.iter().all(|&(i, pos)| c.cause(i) == pos))
                .fold(0u8, |m, c| m | 1 << c.bits());
            out.push(CauseFormula {
                label,
                expr,
                members,
                literals: Some(literals.len()),
            });
        }
    }
    out
}

/// Every one of the 256 distinct boolean combinations of the cause atoms,
/// written as a disjunction of full assignments.
pub fn all_cause_formulas() -> Vec<CauseFormula> {
    let conj = cause_conjunctions();
    (0..=255u8)
        .map(|members| {
            if let Some(named) = conj.iter().find(|f| f.members == members) {
                return named.clone();
            }
            let assignments: Vec<CauseAssignment> =
                CauseAssignment::all().filter(|c| members >> c.bits() & 1 == 1).collect();
            let label = format!(
                "{{{}}}",
                assignments.iter().map(|c| c.label()).collect::<Vec<_>>().join(",")
            );
            let expr = EventExpr::any(assignments.iter().map(|&c| assignment_expr(c)));
            CauseFormula {
                label,
                expr,
                members,
                literals: None,
            }
        })
        .collect()
}

/// Full conjunction fixing all three causes to `c`.
pub fn assignment_expr(c: CauseAssignment) -> EventExpr {
    EventExpr::all((1..=DIRECTIONS).map(|i| {
        let a = EventExpr::atom(cause_event(i));
        if c.cause(i) {
            a
        } else {
            !a
        }
    }))
}

/// Which cause combinations [`check_no_cons`] examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConjunctionSweep {
    /// All conjunctions of up to three literals.
    #[default]
    Literals,
    /// All 256 extensions over the eight assignments.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NoConsViolation {
    pub formula: String,
    pub literals: Option<usize>,
    pub pair: SettingPair,
    #[serde(with = "crate::rational::serde_text")]
    pub conditional: Rational,
    #[serde(with = "crate::rational::serde_text")]
    pub marginal: Rational,
    #[serde(with = "crate::rational::serde_text")]
    pub delta: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NoConsReport {
    pub checked: usize,
    pub violations: Vec<NoConsViolation>,
}

impl NoConsReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when no single cause literal depends on the settings.
    pub fn single_literals_hold(&self) -> bool {
        !self.violations.iter().any(|v| v.literals == Some(1))
    }
}

/// Exact no-conspiracy check on the induced space.
pub fn check_no_cons(m: &HiddenVariableModel, sweep: ConjunctionSweep) -> NoConsReport {
    check_no_cons_space(&m.to_space(), sweep).expect("model spaces declare every cause atom")
}

/// No-conspiracy check on any space declaring `C11..C33` and the settings:
/// `p(φ | L_i ∧ R_j) = p(φ)` for each formula `φ` and each realized pair.
pub fn check_no_cons_space(
    space: &FiniteProbabilitySpace,
    sweep: ConjunctionSweep,
) -> Result<NoConsReport, SpaceError> {
    let formulas = match sweep {
        ConjunctionSweep::Literals => cause_conjunctions(),
        ConjunctionSweep::Full => all_cause_formulas(),
    };
    let mut checked = 0;
    let mut violations = Vec::new();
    for f in &formulas {
        let marginal = space.prob(&f.expr)?;
        for pair in SettingPair::all() {
            let Some(conditional) = space.cond_prob_opt(&f.expr, &settings_expr(pair))? else {
                continue;
            };
            checked += 1;
            if conditional != marginal {
                violations.push(NoConsViolation {
                    formula: f.label.clone(),
                    literals: f.literals,
                    pair,
                    delta: &conditional - &marginal,
                    conditional,
                    marginal: marginal.clone(),
                });
            }
        }
    }
    Ok(NoConsReport {
        checked,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExFailure {
    pub pair: SettingPair,
    pub wing: Wing,
    /// `p(X^+ | s) + p(X^- | s)`; must be 1.
    #[serde(with = "crate::rational::serde_text")]
    pub total: Rational,
    /// `p(X^+ ∧ X^- | s)`; must be 0.
    #[serde(with = "crate::rational::serde_text")]
    pub overlap: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NowmFailure {
    pub outcome: String,
    /// `p(outcome ∧ ¬setting)`; must be 0.
    #[serde(with = "crate::rational::serde_text")]
    pub probability: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExNowmReport {
    pub ex: Vec<ExFailure>,
    pub nowm: Vec<NowmFailure>,
}

impl ExNowmReport {
    pub fn ex_holds(&self) -> bool {
        self.ex.is_empty()
    }

    pub fn nowm_holds(&self) -> bool {
        self.nowm.is_empty()
    }
}

/// Exactly-one-of-two-outcomes and no-outcome-without-measurement checks on
/// the model's induced space.
pub fn check_ex_nowm(m: &HiddenVariableModel) -> ExNowmReport {
    check_ex_nowm_space(&m.to_space()).expect("model spaces declare every outcome")
}

/// EX is checked for every realized setting pair and both wings; NOWM for
/// every outcome event type.
pub fn check_ex_nowm_space(space: &FiniteProbabilitySpace) -> Result<ExNowmReport, SpaceError> {
    let mut ex = Vec::new();
    for pair in SettingPair::all() {
        let given = settings_expr(pair);
        for (wing, dir) in [(Wing::Left, pair.left), (Wing::Right, pair.right)] {
            let plus = EventExpr::atom(outcome_event(wing, dir, Outcome::Plus));
            let minus = EventExpr::atom(outcome_event(wing, dir, Outcome::Minus));
            let Some(pp) = space.cond_prob_opt(&plus, &given)? else {
                continue;
            };
            let pm = space.cond_prob(&minus, &given)?;
            let overlap = space.cond_prob(&(plus & minus), &given)?;
            let total = pp + pm;
            if !total.is_one() || !overlap.is_zero() {
                ex.push(ExFailure {
                    pair,
                    wing,
                    total,
                    overlap,
                });
            }
        }
    }
    let mut nowm = Vec::new();
    for wing in [Wing::Left, Wing::Right] {
        for dir in 1..=DIRECTIONS {
            let setting = EventExpr::atom(setting_event(wing, dir));
            for o in Outcome::BOTH {
                let name = outcome_event(wing, dir, o);
                let p = space.prob(&(EventExpr::atom(name.clone()) & !setting.clone()))?;
                if !p.is_zero() {
                    nowm.push(NowmFailure {
                        outcome: name,
                        probability: p,
                    });
                }
            }
        }
    }
    Ok(ExNowmReport { ex, nowm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn uniform_causes() -> Vec<Rational> {
        vec![ratio(1, 8); 8]
    }

    fn point_mass(c: CauseAssignment) -> Vec<Rational> {
        let mut d = vec![int(0); 8];
        d[c.index()] = int(1);
        d
    }

    fn pair_only(pair: SettingPair) -> SettingPolicy {
        let mut row = vec![int(0); 9];
        row[pair.index()] = int(1);
        SettingPolicy::Independent(row)
    }

    #[test]
    fn uniform_model_space_has_72_equal_atoms() {
        let m = HiddenVariableModel::mth(uniform_causes()).unwrap();
        let space = m.to_space();
        assert_eq!(space.len(), 72);
        assert!((0..72).all(|w| space.weight(w) == ratio(1, 72)));
    }

    #[test]
    fn point_mass_single_atom() {
        let c = CauseAssignment::from_values(true, true, true);
        let m = HiddenVariableModel::new(point_mass(c), pair_only(SettingPair::new(1, 1)), ResponseRule::Mth)
            .unwrap();
        let space = m.to_space();
        assert_eq!(space.len(), 1);
        assert_eq!(space.prob(&EventExpr::atom("L1+")).unwrap(), int(1));
        assert_eq!(space.prob(&EventExpr::atom("R1-")).unwrap(), int(1));
    }

    #[test]
    fn conditioned_policy_changes_setting_statistics() {
        // Settings (1,2) whenever C11 holds, (2,3) otherwise.
        let m = catalog::conspiratorial_deterministic();
        let space = m.to_space();
        let s12 = settings_expr(SettingPair::new(1, 2));
        let c11 = EventExpr::atom("C11");
        assert_eq!(space.cond_prob(&s12, &c11).unwrap(), int(1));
        assert_eq!(space.prob(&s12).unwrap(), ratio(1, 2));
    }

    #[test]
    fn predicted_conditionals_examples() {
        let t = predicted_conditionals(&HiddenVariableModel::mth(uniform_causes()).unwrap()).unwrap();
        assert_eq!(t.get(SettingPair::new(1, 2), OutcomePair::PLUS_PLUS), Some(&ratio(1, 4)));
        for i in 1..=3 {
            assert_eq!(t.get(SettingPair::new(i, i), OutcomePair::PLUS_PLUS), Some(&int(0)));
        }
        // C1 fair, C2 independent fair, C3 = ¬C1.
        let t = predicted_conditionals(&catalog::c3_not_c1()).unwrap();
        assert_eq!(t.get(SettingPair::new(1, 3), OutcomePair::PLUS_PLUS), Some(&ratio(1, 2)));
        assert_eq!(t.get(SettingPair::new(1, 2), OutcomePair::PLUS_PLUS), Some(&ratio(1, 4)));
    }

    #[test]
    fn zero_probability_pair_is_reported() {
        let m = HiddenVariableModel::new(uniform_causes(), pair_only(SettingPair::new(1, 2)), ResponseRule::Mth)
            .unwrap();
        assert_eq!(
            predicted_conditionals(&m),
            Err(ModelError::ZeroConditioning(SettingPair::new(1, 1)))
        );
    }

    #[test]
    fn invalid_models_rejected() {
        let mut d = uniform_causes();
        d[0] = ratio(1, 4);
        assert!(matches!(HiddenVariableModel::mth(d), Err(ModelError::InvalidModel(_))));
        let bad = SettingPolicy::Independent(vec![ratio(1, 8); 9]);
        assert!(HiddenVariableModel::new(uniform_causes(), bad, ResponseRule::Mth).is_err());
    }

    #[test]
    fn no_cons_examples() {
        let indep = check_no_cons(&HiddenVariableModel::mth(uniform_causes()).unwrap(), ConjunctionSweep::Full);
        assert!(indep.holds());
        assert_eq!(indep.checked, 256 * 9);

        let cons = check_no_cons(&catalog::conspiratorial_deterministic(), ConjunctionSweep::Literals);
        assert!(cons
            .violations
            .iter()
            .any(|v| v.formula == "C11" && v.pair == SettingPair::new(1, 2) && v.delta == ratio(1, 2)));

        let szabo = check_no_cons(&catalog::szabo_standin(), ConjunctionSweep::Literals);
        assert!(szabo.single_literals_hold());
        assert!(!szabo.holds());
        assert!(szabo.violations.iter().any(|v| v.literals == Some(2)));
    }

    #[test]
    fn ex_nowm_examples() {
        let r = check_ex_nowm(&HiddenVariableModel::mth(uniform_causes()).unwrap());
        assert!(r.ex_holds() && r.nowm_holds());

        let r = check_ex_nowm(&catalog::defective_no_outcome());
        assert!(!r.ex_holds());
        assert_eq!(r.ex[0].pair, SettingPair::new(1, 1));
        assert!(r.nowm_holds());

        // L1+ granted on a world where L1 was not chosen.
        let m = HiddenVariableModel::mth(uniform_causes()).unwrap();
        let mut b = m.space_builder();
        let idx = m.to_space().worlds().iter().position(|w| w.ends_with("s=23")).unwrap();
        b.holds(idx, "L1+");
        let r = check_ex_nowm_space(&b.build().unwrap()).unwrap();
        assert_eq!(r.nowm.len(), 1);
        assert_eq!(r.nowm[0].outcome, "L1+");
    }

    #[test]
    fn conjunction_catalogue() {
        let conj = cause_conjunctions();
        assert_eq!(conj.len(), 26);
        let c11_not_c22 = conj.iter().find(|f| f.label == "C11∧¬C22").unwrap();
        assert_eq!(c11_not_c22.members.count_ones(), 2);
        let all = all_cause_formulas();
        assert_eq!(all.len(), 256);
        let space = HiddenVariableModel::mth(uniform_causes()).unwrap().to_space();
        for f in &all {
            let p = space.prob(&f.expr).unwrap();
            assert_eq!(p, ratio(f.members.count_ones() as i64, 8), "{}", f.label);
        }
    }
}
