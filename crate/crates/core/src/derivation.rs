//! Step-by-step replay of the derivation of the Wigner-Bell inequality on a
//! finite probability space.
//!
//! Each step is a set of exact identities. A step is proven only when all of
//! its identities hold; once a step fails, every later step is reported as
//! blocked instead of being derived from a false premise. Identities that
//! condition on a null event are vacuous and do not count against a step.

use std::fmt;

use indexmap::IndexMap;
use num_traits::{Num, One, Zero};
use serde::Serialize;

use crate::experiment::{cause_event, outcome_event, setting_event, Outcome, SettingPair, Wing, DIRECTIONS};
use crate::models::{check_ex_nowm_space, check_no_cons_space, settings_expr, ConjunctionSweep, HiddenVariableModel};
use crate::probability::{EventExpr, FiniteProbabilitySpace, ScreeningStatus, SpaceError, Variable};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DerivationError {
    #[error("events are not perfectly correlated: {0}")]
    NotPerfectlyCorrelated(String),
    #[error("variable value `{value}` does not screen off the correlation (delta {delta})")]
    NotScreeningOff { value: String, delta: String },
    #[error("reduction check {equation} failed")]
    ReductionFailed { equation: String },
    #[error("minimal theory {which} fails on world `{atom}` ({direction})")]
    BiconditionalFails {
        which: String,
        atom: String,
        direction: &'static str,
    },
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// One exact identity `lhs = rhs`. `lhs` is `None` when it conditions on a
/// null event, in which case the identity is vacuous.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Identity {
    pub label: String,
    #[serde(with = "crate::rational::serde_text_opt")]
    pub lhs: Option<Rational>,
    #[serde(with = "crate::rational::serde_text")]
    pub rhs: Rational,
}

impl Identity {
    pub fn new(label: impl Into<String>, lhs: Option<Rational>, rhs: Rational) -> Self {
        Self {
            label: label.into(),
            lhs,
            rhs,
        }
    }

    pub fn holds(&self) -> bool {
        self.lhs.as_ref().is_none_or(|l| *l == self.rhs)
    }

    pub fn is_vacuous(&self) -> bool {
        self.lhs.is_none()
    }

    /// `lhs − rhs`, or `None` when vacuous.
    pub fn residual(&self) -> Option<Rational> {
        self.lhs.as_ref().map(|l| l - &self.rhs)
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lhs {
            None => write!(f, "{}: vacuous", self.label),
            Some(l) => write!(
                f,
                "{}: {} {} {}",
                self.label,
                rational::to_text(l),
                if *l == self.rhs { "=" } else { "≠" },
                rational::to_text(&self.rhs)
            ),
        }
    }
}

fn cond_identity(
    space: &FiniteProbabilitySpace,
    label: impl Into<String>,
    e: &EventExpr,
    given: &EventExpr,
    rhs: Rational,
) -> Result<Identity, SpaceError> {
    Ok(Identity::new(label, space.cond_prob_opt(e, given)?, rhs))
}

fn null_identity(
    space: &FiniteProbabilitySpace,
    label: impl Into<String>,
    e: &EventExpr,
) -> Result<Identity, SpaceError> {
    Ok(Identity::new(label, Some(space.prob(e)?), Rational::zero()))
}

/// Two-valued common cause event type obtained from a many-valued variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BinarySplit {
    pub variable: String,
    /// Values `q` with `p(a ∧ Vq ∧ given) ≠ 0`.
    pub plus_values: Vec<String>,
    pub minus_values: Vec<String>,
    /// `C = ∨_{q ∈ I+} Vq`.
    #[serde(serialize_with = "serialize_display")]
    pub cause: EventExpr,
    /// `p(C | given)`.
    #[serde(with = "crate::rational::serde_text")]
    pub cause_probability: Rational,
    /// Checks of the four necessity/sufficiency equations, keyed `eq15`..`eq18`.
    pub equations: IndexMap<String, Vec<Identity>>,
}

fn serialize_display<S: serde::Serializer, T: fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Reduces a variable that screens off a perfect correlation between `a`
/// and `b` (within `given`) to a two-valued cause `C` with
/// `p(a|C) = p(b|C) = 1` and `p(a|¬C) = p(b|¬C) = 0`.
///
/// Perfect correlation is read extensionally: `p(a ∧ ¬b ∧ given) = 0` and
/// `p(b ∧ ¬a ∧ given) = 0`, which coincides with `p(a|b) = p(b|a) = 1`
/// whenever those conditionals are defined.
pub fn reduce_to_binary(
    space: &FiniteProbabilitySpace,
    v: &Variable,
    a: &EventExpr,
    b: &EventExpr,
    given: &EventExpr,
) -> Result<BinarySplit, DerivationError> {
    v.check_partition(space)?;
    if space.prob(given)?.is_zero() {
        return Err(SpaceError::ZeroConditioning.into());
    }
    let a_not_b = space.prob(&(a.clone() & !b.clone() & given.clone()))?;
    let b_not_a = space.prob(&(b.clone() & !a.clone() & given.clone()))?;
    if !a_not_b.is_zero() || !b_not_a.is_zero() {
        let show = |x: Option<Rational>| x.map_or("undefined".to_string(), |x| rational::to_text(&x));
        return Err(DerivationError::NotPerfectlyCorrelated(format!(
            "p(a | b ∧ given) = {}, p(b | a ∧ given) = {}",
            show(space.cond_prob_opt(a, &(b.clone() & given.clone()))?),
            show(space.cond_prob_opt(b, &(a.clone() & given.clone()))?),
        )));
    }
    let screening = space.screens_off(v, a, b, given)?;
    if let Some(fail) = screening.failures().next() {
        let ScreeningStatus::Fails { delta } = &fail.status else {
            unreachable!()
        };
        return Err(DerivationError::NotScreeningOff {
            value: fail.label.clone(),
            delta: rational::to_text(delta),
        });
    }

    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for value in &v.values {
        let mass = space.prob(&(a.clone() & value.event.clone() & given.clone()))?;
        if mass.is_zero() {
            minus.push(value);
        } else {
            plus.push(value);
        }
    }
    let cause = EventExpr::any(plus.iter().map(|v| v.event.clone()));
    let one = Rational::one;
    let zero = Rational::zero;

    let mut equations: IndexMap<String, Vec<Identity>> = IndexMap::new();
    let per_value = |values: &[&crate::probability::VariableValue],
                     target: &EventExpr,
                     name: &str,
                     rhs: fn() -> Rational|
     -> Result<Vec<Identity>, SpaceError> {
        values
            .iter()
            .map(|q| {
                cond_identity(
                    space,
                    format!("p({name} | {}) = {}", q.label, rational::to_text(&rhs())),
                    target,
                    &(q.event.clone() & given.clone()),
                    rhs(),
                )
            })
            .collect()
    };
    let aggregate = |target: &EventExpr, name: &str, negated: bool, rhs: Rational| {
        let c = if negated { !cause.clone() } else { cause.clone() };
        cond_identity(
            space,
            format!("p({name} | {}C) = {}", if negated { "¬" } else { "" }, rational::to_text(&rhs)),
            target,
            &(c & given.clone()),
            rhs,
        )
    };
    let mut eq15 = per_value(&minus, a, "a", zero)?;
    eq15.push(aggregate(a, "a", true, zero())?);
    let mut eq16 = per_value(&plus, a, "a", one)?;
    eq16.push(aggregate(a, "a", false, one())?);
    let mut eq17 = per_value(&plus, b, "b", one)?;
    eq17.push(aggregate(b, "b", false, one())?);
    let mut eq18 = per_value(&minus, b, "b", zero)?;
    eq18.push(aggregate(b, "b", true, zero())?);
    equations.insert("eq15".into(), eq15);
    equations.insert("eq16".into(), eq16);
    equations.insert("eq17".into(), eq17);
    equations.insert("eq18".into(), eq18);
    if let Some((key, _)) = equations.iter().find(|(_, ids)| !ids.iter().all(Identity::holds)) {
        return Err(DerivationError::ReductionFailed {
            equation: key.clone(),
        });
    }

    Ok(BinarySplit {
        variable: v.name.clone(),
        plus_values: plus.iter().map(|q| q.label.clone()).collect(),
        minus_values: minus.iter().map(|q| q.label.clone()).collect(),
        cause_probability: space.cond_prob(&cause, given)?,
        cause,
        equations,
    })
}

/// Biconditional `(setting ∧ cause literal) ↔ outcome`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MinimalTheory {
    pub outcome: String,
    pub setting: String,
    pub cause: String,
    pub cause_negated: bool,
}

impl MinimalTheory {
    fn new(wing: Wing, direction: u8) -> Self {
        Self {
            outcome: outcome_event(wing, direction, Outcome::Plus),
            setting: setting_event(wing, direction),
            cause: cause_event(direction),
            cause_negated: wing == Wing::Right,
        }
    }

    /// The two-conjunct condition `setting ∧ (¬)cause`.
    pub fn condition(&self) -> EventExpr {
        let c = EventExpr::atom(&self.cause);
        let literal = if self.cause_negated { !c } else { c };
        EventExpr::atom(&self.setting) & literal
    }

    pub fn outcome_expr(&self) -> EventExpr {
        EventExpr::atom(&self.outcome)
    }
}

impl fmt::Display for MinimalTheory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} ∧ {}{}) ↔ {}",
            self.setting,
            if self.cause_negated { "¬" } else { "" },
            self.cause,
            self.outcome
        )
    }
}

/// The four theories the inequality needs: `L1`, `L2`, `R2`, `R3`.
pub fn minimal_theories() -> [MinimalTheory; 4] {
    [
        MinimalTheory::new(Wing::Left, 1),
        MinimalTheory::new(Wing::Left, 2),
        MinimalTheory::new(Wing::Right, 2),
        MinimalTheory::new(Wing::Right, 3),
    ]
}

/// Verifies each minimal theory as an extension identity: both implication
/// directions must hold on every positive-weight world.
pub fn derive_minimal_theories(
    space: &FiniteProbabilitySpace,
) -> Result<[MinimalTheory; 4], DerivationError> {
    let theories = minimal_theories();
    for t in &theories {
        let cond = t.condition();
        let outcome = t.outcome_expr();
        for (direction, from, to) in [("sufficiency", &cond, &outcome), ("necessity", &outcome, &cond)] {
            if let Some(w) = space.counterexample(from, to)? {
                return Err(DerivationError::BiconditionalFails {
                    which: t.to_string(),
                    atom: space.worlds()[w].clone(),
                    direction,
                });
            }
        }
    }
    Ok(theories)
}

/// Pairs of the three probability identities, with the cause atom the
/// decomposition splits on: (1,2) over C33, (2,3) over C11, (1,3) over C22.
const CHAIN: [(&str, &str, SettingPair, u8); 3] = [
    ("eq25", "eq28", SettingPair::new(1, 2), 3),
    ("eq26", "eq29", SettingPair::new(2, 3), 1),
    ("eq27", "eq30", SettingPair::new(1, 3), 2),
];

fn plus_plus(pair: SettingPair) -> EventExpr {
    EventExpr::atom(outcome_event(Wing::Left, pair.left, Outcome::Plus))
        & EventExpr::atom(outcome_event(Wing::Right, pair.right, Outcome::Plus))
}

/// `C_ii ∧ ¬C_jj` for the pair `(i, j)`.
fn pair_cause(pair: SettingPair) -> EventExpr {
    EventExpr::atom(cause_event(pair.left)) & !EventExpr::atom(cause_event(pair.right))
}

/// `p(L_i^+ ∧ R_j^+ ∧ L_i ∧ R_j) = p(L_i ∧ C_ii ∧ R_j ∧ ¬C_jj)` for the pairs
/// (1,2), (2,3), (1,3).
pub fn decompose_probabilities(space: &FiniteProbabilitySpace) -> Result<Vec<Identity>, SpaceError> {
    CHAIN
        .iter()
        .map(|&(key, _, pair, _)| {
            let lhs = space.prob(&(plus_plus(pair) & settings_expr(pair)))?;
            let rhs = space.prob(&(settings_expr(pair) & pair_cause(pair)))?;
            Ok(Identity::new(
                format!("{key}: p(L{0}+ ∧ R{1}+ ∧ L{0} ∧ R{1}) = p(L{0} ∧ C{0}{0} ∧ R{1} ∧ ¬C{1}{1})", pair.left, pair.right),
                Some(lhs),
                rhs,
            ))
        })
        .collect()
}

/// Transformation of one conditional `++` probability into a sum of two
/// cause-assignment probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CauseEquation {
    pub key: String,
    pub pair: SettingPair,
    /// Steps (i), (ii), (iii) in order.
    pub steps: Vec<Identity>,
    /// The end-to-end identity.
    pub result: Identity,
    /// The conjunction whose independence from the settings failed in (ii).
    pub violating_conjunction: Option<String>,
}

impl CauseEquation {
    pub fn proven(&self) -> bool {
        self.steps.iter().all(Identity::holds) && self.result.holds()
    }
}

/// `p(L_i^+ ∧ R_j^+ | L_i ∧ R_j) = p(C_ii ∧ ¬C_jj ∧ C_kk) + p(C_ii ∧ ¬C_jj ∧ ¬C_kk)`
/// for the three pairs, through steps (i) minimal theories, (ii) no
/// conspiracy, (iii) additivity.
pub fn cause_probabilities(space: &FiniteProbabilitySpace) -> Result<Vec<CauseEquation>, SpaceError> {
    CHAIN
        .iter()
        .map(|&(_, key, pair, split)| {
            let settings = settings_expr(pair);
            let conj = pair_cause(pair);
            let conj_label = format!("C{0}{0}∧¬C{1}{1}", pair.left, pair.right);
            let split_atom = EventExpr::atom(cause_event(split));
            let lhs = space.cond_prob_opt(&plus_plus(pair), &settings)?;
            let step_i = Identity::new(
                "(i) minimal theories",
                lhs.clone(),
                space
                    .cond_prob_opt(&conj, &settings)?
                    .unwrap_or_else(Rational::zero),
            );
            let marginal = space.prob(&conj)?;
            let step_ii = Identity::new(
                format!("(ii) no conspiracy: p({conj_label} | L{} ∧ R{}) = p({conj_label})", pair.left, pair.right),
                space.cond_prob_opt(&conj, &settings)?,
                marginal.clone(),
            );
            let with = space.prob(&(conj.clone() & split_atom.clone()))?;
            let without = space.prob(&(conj.clone() & !split_atom))?;
            let sum = &with + &without;
            let step_iii = Identity::new("(iii) additivity", Some(marginal), sum.clone());
            let violating_conjunction = (!step_ii.holds()).then(|| conj_label.clone());
            Ok(CauseEquation {
                key: key.to_string(),
                pair,
                result: Identity::new(
                    format!(
                        "{key}: p(L{0}+ ∧ R{1}+ | L{0} ∧ R{1}) = p({conj_label}∧C{2}{2}) + p({conj_label}∧¬C{2}{2})",
                        pair.left, pair.right, split
                    ),
                    lhs,
                    sum,
                ),
                steps: vec![step_i, step_ii, step_iii],
                violating_conjunction,
            })
        })
        .collect()
}

/// Outcome of the Wigner-Bell check `p13 ≤ p12 + p23`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BellCheck<T> {
    pub satisfied: bool,
    /// `p12 + p23 − p13`.
    pub slack: T,
}

/// Checks `p13 ≤ p12 + p23` for probabilities in `[0, 1]`, exactly for
/// rationals and in floating point for `f64`.
pub fn bell_check<T>(p13: T, p12: T, p23: T) -> Result<BellCheck<T>, DerivationError>
where
    T: Num + PartialOrd + Clone + fmt::Debug,
{
    for p in [&p13, &p12, &p23] {
        // Written so that NaN is rejected too.
        if !(*p >= T::zero() && *p <= T::one()) {
            return Err(DerivationError::OutOfRange(format!("{p:?}")));
        }
    }
    let slack = p12 + p23 - p13;
    Ok(BellCheck {
        satisfied: slack >= T::zero(),
        slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Proven,
    Failed,
    Blocked,
    /// Causal premise with no statistical test; recorded, not computed.
    Premise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub title: String,
    pub status: StepStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub identities: Vec<Identity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BellValues {
    #[serde(with = "crate::rational::serde_text")]
    pub p13: Rational,
    #[serde(with = "crate::rational::serde_text")]
    pub p12: Rational,
    #[serde(with = "crate::rational::serde_text")]
    pub p23: Rational,
    #[serde(with = "crate::rational::serde_text")]
    pub slack: Rational,
    pub satisfied: bool,
}

/// Per-step outcome of [`run_derivation`], keyed by equation role
/// (`eq9`, `eq14` … `eq32`) plus the named assumptions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivationReport {
    pub steps: IndexMap<String, Step>,
    /// Numeric Wigner-Bell values of the space, whether or not the chain
    /// leading to them was proven.
    pub bell: Option<BellValues>,
}

impl DerivationReport {
    /// Every computed step proven (premises excluded).
    pub fn all_proven(&self) -> bool {
        self.steps
            .values()
            .all(|s| matches!(s.status, StepStatus::Proven | StepStatus::Premise))
    }

    pub fn status(&self, key: &str) -> Option<StepStatus> {
        self.steps.get(key).map(|s| s.status)
    }

    pub fn first_failure(&self) -> Option<&str> {
        self.steps
            .iter()
            .find(|(_, s)| s.status == StepStatus::Failed)
            .map(|(k, _)| k.as_str())
    }
}

type StepResult = Result<Vec<Identity>, String>;

struct Runner {
    steps: IndexMap<String, Step>,
    blocked_by: Option<String>,
}

impl Runner {
    fn premise(&mut self, key: &str, title: &str, detail: &str) {
        self.steps.insert(
            key.into(),
            Step {
                title: title.into(),
                status: StepStatus::Premise,
                detail: Some(detail.into()),
                identities: Vec::new(),
            },
        );
    }

    fn step(&mut self, key: &str, title: &str, check: impl FnOnce() -> StepResult) {
        let step = if let Some(by) = &self.blocked_by {
            Step {
                title: title.into(),
                status: StepStatus::Blocked,
                detail: Some(format!("blocked by {by}")),
                identities: Vec::new(),
            }
        } else {
            match check() {
                Ok(identities) => {
                    let failed: Vec<String> = identities
                        .iter()
                        .filter(|i| !i.holds())
                        .map(|i| i.to_string())
                        .collect();
                    Step {
                        title: title.into(),
                        status: if failed.is_empty() { StepStatus::Proven } else { StepStatus::Failed },
                        detail: (!failed.is_empty()).then(|| summarize(&failed)),
                        identities,
                    }
                }
                Err(detail) => Step {
                    title: title.into(),
                    status: StepStatus::Failed,
                    detail: Some(detail),
                    identities: Vec::new(),
                },
            }
        };
        if step.status == StepStatus::Failed {
            self.blocked_by = Some(key.to_string());
        }
        self.steps.insert(key.into(), step);
    }
}

/// First few failing identities, then a count of the rest.
fn summarize(failed: &[String]) -> String {
    const SHOWN: usize = 3;
    let mut text = failed[..failed.len().min(SHOWN)].join("; ");
    if failed.len() > SHOWN {
        text += &format!("; and {} more", failed.len() - SHOWN);
    }
    text
}

fn parallel_given(space: &FiniteProbabilitySpace, i: u8) -> Result<EventExpr, String> {
    let given = settings_expr(SettingPair::new(i, i));
    match space.prob(&given) {
        Ok(p) if p.is_zero() => Err(format!("parallel settings L{i} ∧ R{i} never occur")),
        Ok(_) => Ok(given),
        Err(e) => Err(e.to_string()),
    }
}

fn atom(name: String) -> EventExpr {
    EventExpr::atom(name)
}

/// Runs the derivation on the model's induced space.
pub fn run_derivation(m: &HiddenVariableModel) -> DerivationReport {
    run_derivation_on_space(&m.to_space())
}

/// Runs every checkable step, in order, on a space declaring the settings,
/// outcomes and the causes `C11, C22, C33`.
pub fn run_derivation_on_space(space: &FiniteProbabilitySpace) -> DerivationReport {
    let mut r = Runner {
        steps: IndexMap::new(),
        blocked_by: None,
    };
    let err = |e: SpaceError| e.to_string();
    let dirs = || 1..=DIRECTIONS;
    let lp = |i| atom(outcome_event(Wing::Left, i, Outcome::Plus));
    let lm = |i| atom(outcome_event(Wing::Left, i, Outcome::Minus));
    let rp = |i| atom(outcome_event(Wing::Right, i, Outcome::Plus));
    let rm = |i| atom(outcome_event(Wing::Right, i, Outcome::Minus));
    let c = |i| atom(cause_event(i));
    let ls = |i| atom(setting_event(Wing::Left, i));
    let rs = |i| atom(setting_event(Wing::Right, i));
    let one = Rational::one;
    let zero = Rational::zero;

    r.step("eq9", "PCORR: p_ii(R_i^- | L_i^+) = p_ii(L_i^+ | R_i^-) = 1", || {
        let mut ids = Vec::new();
        for i in dirs() {
            let g = parallel_given(space, i)?;
            ids.push(cond_identity(space, format!("p_{i}{i}(R{i}- | L{i}+) = 1"), &rm(i), &(lp(i) & g.clone()), one()).map_err(err)?);
            ids.push(cond_identity(space, format!("p_{i}{i}(L{i}+ | R{i}-) = 1"), &lp(i), &(rm(i) & g), one()).map_err(err)?);
        }
        Ok(ids)
    });
    r.premise(
        "sep",
        "SEP: coinciding outcome instances are distinct events",
        "causal premise; no statistical test exists",
    );
    r.premise(
        "loc1",
        "LOC1: no outcome is causally relevant for the other wing's outcome",
        "causal premise; no statistical test exists",
    );
    r.step("eq14", "PCC: C_ii screens off L_i^+ from R_i^- at parallel settings", || {
        let mut ids = Vec::new();
        for i in dirs() {
            let g = parallel_given(space, i)?;
            for (label, value) in [(cause_event(i), c(i)), (format!("¬{}", cause_event(i)), !c(i))] {
                let cond = value & g.clone();
                let joint = space.cond_prob_opt(&(lp(i) & rm(i)), &cond).map_err(err)?;
                let product = match (
                    space.cond_prob_opt(&lp(i), &cond).map_err(err)?,
                    space.cond_prob_opt(&rm(i), &cond).map_err(err)?,
                ) {
                    (Some(x), Some(y)) => x * y,
                    _ => zero(),
                };
                ids.push(Identity::new(
                    format!("p_{i}{i}(L{i}+ ∧ R{i}- | {label}) = p_{i}{i}(L{i}+ | {label}) p_{i}{i}(R{i}- | {label})"),
                    joint,
                    product,
                ));
            }
        }
        Ok(ids)
    });

    // Reduction to a two-valued cause, one split per parallel pair.
    let mut splits: Vec<Result<BinarySplit, String>> = Vec::new();
    if r.blocked_by.is_none() {
        for i in dirs() {
            splits.push(parallel_given(space, i).and_then(|g| {
                reduce_to_binary(space, &Variable::binary(cause_event(i), c(i)), &lp(i), &rm(i), &g)
                    .map_err(|e| format!("i={i}: {e}"))
            }));
        }
    }
    for (key, title) in [
        ("eq15", "values outside I+ are never followed by L_i^+"),
        ("eq16", "values in I+ are sufficient for L_i^+"),
        ("eq17", "values in I+ are sufficient for R_i^-"),
        ("eq18", "values outside I+ are never followed by R_i^-"),
    ] {
        r.step(key, title, || {
            let mut ids = Vec::new();
            for (i, split) in dirs().zip(&splits) {
                let split = split.as_ref().map_err(Clone::clone)?;
                ids.extend(split.equations[key].iter().map(|id| Identity {
                    label: format!("i={i}: {}", id.label),
                    ..id.clone()
                }));
            }
            Ok(ids)
        });
    }

    r.step("eq19", "p_ii(L_i^+ | C_ii) = p_ii(R_i^- | C_ii) = 1", || {
        let mut ids = Vec::new();
        for i in dirs() {
            let g = parallel_given(space, i)?;
            ids.push(cond_identity(space, format!("p_{i}{i}(L{i}+ | C{i}{i}) = 1"), &lp(i), &(c(i) & g.clone()), one()).map_err(err)?);
            ids.push(cond_identity(space, format!("p_{i}{i}(R{i}- | C{i}{i}) = 1"), &rm(i), &(c(i) & g), one()).map_err(err)?);
        }
        Ok(ids)
    });
    r.step("eq20", "p_ii(L_i^+ | ¬C_ii) = p_ii(R_i^- | ¬C_ii) = 0", || {
        let mut ids = Vec::new();
        for i in dirs() {
            let g = parallel_given(space, i)?;
            ids.push(cond_identity(space, format!("p_{i}{i}(L{i}+ | ¬C{i}{i}) = 0"), &lp(i), &(!c(i) & g.clone()), zero()).map_err(err)?);
            ids.push(cond_identity(space, format!("p_{i}{i}(R{i}- | ¬C{i}{i}) = 0"), &rm(i), &(!c(i) & g), zero()).map_err(err)?);
        }
        Ok(ids)
    });

    let ex_nowm = check_ex_nowm_space(space);
    for (key, wing) in [("eq21", Wing::Left), ("eq22", Wing::Right)] {
        let title = format!("EX ({} wing): exactly one of exactly two outcomes", if wing == Wing::Left { "left" } else { "right" });
        r.step(key, &title, || {
            let report = ex_nowm.as_ref().map_err(|e| e.to_string())?;
            Ok(report
                .ex
                .iter()
                .filter(|f| f.wing == wing)
                .flat_map(|f| {
                    let w = wing.letter();
                    [
                        Identity::new(format!("p_{0}({w}+) + p_{0}({w}-) = 1", f.pair), Some(f.total.clone()), one()),
                        Identity::new(format!("p_{0}({w}+ ∧ {w}-) = 0", f.pair), Some(f.overlap.clone()), zero()),
                    ]
                })
                .collect())
        });
    }
    r.step("eq23", "p_ii(L_i^- | C_ii) = p_ii(R_i^+ | C_ii) = 0", || {
        let mut ids = Vec::new();
        for i in dirs() {
            let g = parallel_given(space, i)?;
            ids.push(cond_identity(space, format!("p_{i}{i}(L{i}- | C{i}{i}) = 0"), &lm(i), &(c(i) & g.clone()), zero()).map_err(err)?);
            ids.push(cond_identity(space, format!("p_{i}{i}(R{i}+ | C{i}{i}) = 0"), &rp(i), &(c(i) & g), zero()).map_err(err)?);
        }
        Ok(ids)
    });
    r.step("eq24", "p_ii(L_i^- | ¬C_ii) = p_ii(R_i^+ | ¬C_ii) = 1", || {
        let mut ids = Vec::new();
        for i in dirs() {
            let g = parallel_given(space, i)?;
            ids.push(cond_identity(space, format!("p_{i}{i}(L{i}- | ¬C{i}{i}) = 1"), &lm(i), &(!c(i) & g.clone()), one()).map_err(err)?);
            ids.push(cond_identity(space, format!("p_{i}{i}(R{i}+ | ¬C{i}{i}) = 1"), &rp(i), &(!c(i) & g), one()).map_err(err)?);
        }
        Ok(ids)
    });

    r.step("loc2", "LOC2: L_i ∧ C_ii alone suffices for L_i^+; R_j ∧ ¬C_jj alone for R_j^+", || {
        let mut ids = Vec::new();
        for i in dirs() {
            ids.push(null_identity(space, format!("p(L{i} ∧ C{i}{i} ∧ ¬L{i}+) = 0"), &(ls(i) & c(i) & !lp(i))).map_err(err)?);
            ids.push(null_identity(space, format!("p(R{i} ∧ ¬C{i}{i} ∧ ¬R{i}+) = 0"), &(rs(i) & !c(i) & !rp(i))).map_err(err)?);
        }
        Ok(ids)
    });
    r.step("nowm", "NOWM: no outcome without measurement", || {
        let report = ex_nowm.as_ref().map_err(|e| e.to_string())?;
        let mut ids = Vec::new();
        for wing in [Wing::Left, Wing::Right] {
            for i in dirs() {
                for o in Outcome::BOTH {
                    let name = outcome_event(wing, i, o);
                    let p = report
                        .nowm
                        .iter()
                        .find(|f| f.outcome == name)
                        .map_or_else(zero, |f| f.probability.clone());
                    ids.push(Identity::new(format!("p({name} ∧ ¬{}) = 0", setting_event(wing, i)), Some(p), zero()));
                }
            }
        }
        Ok(ids)
    });
    r.step("loc3", "LOC3: L_i ∧ ¬C_ii alone suffices for ¬L_i^+; R_j ∧ C_jj alone for ¬R_j^+", || {
        let mut ids = Vec::new();
        for i in dirs() {
            ids.push(null_identity(space, format!("p(L{i} ∧ ¬C{i}{i} ∧ L{i}+) = 0"), &(ls(i) & !c(i) & lp(i))).map_err(err)?);
            ids.push(null_identity(space, format!("p(R{i} ∧ C{i}{i} ∧ R{i}+) = 0"), &(rs(i) & c(i) & rp(i))).map_err(err)?);
        }
        Ok(ids)
    });
    r.step("mth", "MTH: minimal theories", || {
        let theories = derive_minimal_theories(space).map_err(|e| e.to_string())?;
        let mut ids = Vec::new();
        for t in &theories {
            ids.push(null_identity(space, format!("{t}: p(condition ∧ ¬{}) = 0", t.outcome), &(t.condition() & !t.outcome_expr())).map_err(err)?);
            ids.push(null_identity(space, format!("{t}: p({} ∧ ¬condition) = 0", t.outcome), &(t.outcome_expr() & !t.condition())).map_err(err)?);
        }
        Ok(ids)
    });

    let decomposition = decompose_probabilities(space);
    for (k, &(key, _, pair, _)) in CHAIN.iter().enumerate() {
        let title = format!("probability of L{0}+ ∧ R{1}+ from the minimal theories", pair.left, pair.right);
        r.step(key, &title, || {
            let ids = decomposition.as_ref().map_err(|e| e.to_string())?;
            Ok(vec![ids[k].clone()])
        });
    }
    r.step("eq31", "NO-CONS: cause conjunctions independent of the settings", || {
        let report = check_no_cons_space(space, ConjunctionSweep::Literals).map_err(err)?;
        Ok(report
            .violations
            .iter()
            .map(|v| {
                Identity::new(
                    format!("p({} | L{} ∧ R{}) = p({})", v.formula, v.pair.left, v.pair.right, v.formula),
                    Some(v.conditional.clone()),
                    v.marginal.clone(),
                )
            })
            .collect())
    });
    let causes = cause_probabilities(space);
    for (k, &(_, key, pair, _)) in CHAIN.iter().enumerate() {
        let title = format!("p{0}{1}(++) as a sum of cause-assignment probabilities", pair.left, pair.right);
        r.step(key, &title, || {
            let eqs = causes.as_ref().map_err(|e| e.to_string())?;
            let eq = &eqs[k];
            let mut ids = eq.steps.clone();
            ids.push(eq.result.clone());
            Ok(ids)
        });
    }

    let bell = bell_values(space);
    let bell_title = "BELL: p13(++) ≤ p12(++) + p23(++)";
    match (&r.blocked_by, &bell) {
        (None, Some(b)) => {
            let b = b.clone();
            r.step("eq32", bell_title, move || {
                Ok(vec![Identity::new(
                    "p12 + p23 − p13 ≥ 0",
                    Some(if b.satisfied { Rational::zero() } else { b.slack.clone() }),
                    Rational::zero(),
                )])
            });
        }
        (None, None) => r.step("eq32", bell_title, || Err("a Wigner setting pair never occurs".into())),
        (Some(_), _) => {
            r.step("eq32", bell_title, || unreachable!("blocked steps are not evaluated"));
            if let (Some(step), Some(b)) = (r.steps.get_mut("eq32"), &bell) {
                let verdict = if b.satisfied { "holds" } else { "is violated" };
                let by = step.detail.take().unwrap_or_default();
                step.detail = Some(format!(
                    "{by}; numerically the inequality {verdict} (slack {})",
                    rational::to_text(&b.slack)
                ));
            }
        }
    }

    DerivationReport {
        steps: r.steps,
        bell,
    }
}

fn bell_values(space: &FiniteProbabilitySpace) -> Option<BellValues> {
    let p = |pair: SettingPair| space.cond_prob_opt(&plus_plus(pair), &settings_expr(pair)).ok().flatten();
    let p13 = p(SettingPair::new(1, 3))?;
    let p12 = p(SettingPair::new(1, 2))?;
    let p23 = p(SettingPair::new(2, 3))?;
    let check = bell_check(p13.clone(), p12.clone(), p23.clone()).ok()?;
    Some(BellValues {
        p13,
        p12,
        p23,
        slack: check.slack,
        satisfied: check.satisfied,
    })
}
