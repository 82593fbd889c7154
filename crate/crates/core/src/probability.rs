//! Finite probability spaces with exact rational weights and a boolean
//! algebra of event types evaluated by atom enumeration.
//!
//! An event type is an [`EventExpr`]; its extension in a space is the set of
//! atoms (worlds) on which it holds, and its probability is the exact sum of
//! the weights of those atoms. Conditioning on a null event is an error.

use std::collections::BTreeMap;
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("undeclared atomic event type `{0}`")]
    UndeclaredAtom(String),
    #[error("conditioning event has probability zero")]
    ZeroConditioning,
    #[error("weights sum to {0}, expected exactly 1")]
    NotNormalized(String),
    #[error("world `{world}` has negative weight {weight}")]
    NegativeWeight { world: String, weight: String },
    #[error("event `{event}` references world index {index} outside the space")]
    UnknownWorld { event: String, index: usize },
    #[error("duplicate world identifier `{0}`")]
    DuplicateWorld(String),
    #[error("variable `{variable}` is not a partition: {reason}")]
    NotAPartition { variable: String, reason: String },
}

/// Symbolic boolean expression over atomic event types.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventExpr {
    True,
    False,
    Atom(String),
    Not(Box<EventExpr>),
    And(Vec<EventExpr>),
    Or(Vec<EventExpr>),
}

impl EventExpr {
    pub fn atom(name: impl Into<String>) -> Self {
        EventExpr::Atom(name.into())
    }

    /// Negation; `¬¬x` collapses to `x` and constants flip.
    pub fn negate(self) -> Self {
        match self {
            EventExpr::Not(inner) => *inner,
            EventExpr::True => EventExpr::False,
            EventExpr::False => EventExpr::True,
            other => EventExpr::Not(Box::new(other)),
        }
    }

    /// Conjunction of all operands; an empty conjunction is `True`.
    pub fn all<I: IntoIterator<Item = EventExpr>>(operands: I) -> Self {
        let mut flat = Vec::new();
        for op in operands {
            match op {
                EventExpr::True => {}
                EventExpr::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => EventExpr::True,
            1 => flat.pop().unwrap(),
            _ => EventExpr::And(flat),
        }
    }

    /// Disjunction of all operands; an empty disjunction is `False`.
    pub fn any<I: IntoIterator<Item = EventExpr>>(operands: I) -> Self {
        let mut flat = Vec::new();
        for op in operands {
            match op {
                EventExpr::False => {}
                EventExpr::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => EventExpr::False,
            1 => flat.pop().unwrap(),
            _ => EventExpr::Or(flat),
        }
    }

    pub fn and(self, other: EventExpr) -> Self {
        EventExpr::all([self, other])
    }

    pub fn or(self, other: EventExpr) -> Self {
        EventExpr::any([self, other])
    }

    /// Leaf names in first-occurrence order.
    pub fn atoms(&self) -> Vec<&str> {
        fn walk<'a>(e: &'a EventExpr, out: &mut Vec<&'a str>) {
            match e {
                EventExpr::Atom(n) => {
                    if !out.contains(&n.as_str()) {
                        out.push(n);
                    }
                }
                EventExpr::Not(inner) => walk(inner, out),
                EventExpr::And(ops) | EventExpr::Or(ops) => ops.iter().for_each(|o| walk(o, out)),
                EventExpr::True | EventExpr::False => {}
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

impl ops::Not for EventExpr {
    type Output = EventExpr;
    fn not(self) -> EventExpr {
        self.negate()
    }
}

impl ops::BitAnd for EventExpr {
    type Output = EventExpr;
    fn bitand(self, rhs: EventExpr) -> EventExpr {
        self.and(rhs)
    }
}

impl ops::BitOr for EventExpr {
    type Output = EventExpr;
    fn bitor(self, rhs: EventExpr) -> EventExpr {
        self.or(rhs)
    }
}

impl fmt::Display for EventExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn joined(f: &mut fmt::Formatter<'_>, ops: &[EventExpr], sep: &str) -> fmt::Result {
            f.write_str("(")?;
            for (k, op) in ops.iter().enumerate() {
                if k > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "{op}")?;
            }
            f.write_str(")")
        }
        match self {
            EventExpr::True => f.write_str("⊤"),
            EventExpr::False => f.write_str("⊥"),
            EventExpr::Atom(n) => f.write_str(n),
            EventExpr::Not(inner) => write!(f, "¬{inner}"),
            EventExpr::And(ops) => joined(f, ops, " ∧ "),
            EventExpr::Or(ops) => joined(f, ops, " ∨ "),
        }
    }
}

/// Finite set of worlds with exact weights and a map from atomic event
/// names to their extensions.
///
/// Weights are stored as integer numerators over one common denominator so
/// that event probabilities reduce to a single big-integer sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteProbabilitySpace {
    worlds: Vec<String>,
    numerators: Vec<BigInt>,
    denominator: BigInt,
    extensions: BTreeMap<String, Vec<bool>>,
}

/// Incremental constructor for [`FiniteProbabilitySpace`].
#[derive(Debug, Default, Clone)]
pub struct SpaceBuilder {
    worlds: Vec<(String, Rational)>,
    extensions: BTreeMap<String, Vec<usize>>,
}

impl SpaceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a world and returns its index.
    pub fn world(&mut self, id: impl Into<String>, weight: Rational) -> usize {
        self.worlds.push((id.into(), weight));
        self.worlds.len() - 1
    }

    /// Declares an atomic event type, possibly with an empty extension.
    pub fn declare(&mut self, event: impl Into<String>) -> &mut Self {
        self.extensions.entry(event.into()).or_default();
        self
    }

    /// Records that `event` holds on `world`.
    pub fn holds(&mut self, world: usize, event: impl Into<String>) -> &mut Self {
        let members = self.extensions.entry(event.into()).or_default();
        if !members.contains(&world) {
            members.push(world);
        }
        self
    }

    pub fn build(self) -> Result<FiniteProbabilitySpace, SpaceError> {
        let (ids, weights): (Vec<_>, Vec<_>) = self.worlds.into_iter().unzip();
        FiniteProbabilitySpace::new(ids, weights, self.extensions)
    }
}

impl FiniteProbabilitySpace {
    pub fn new(
        worlds: Vec<String>,
        weights: Vec<Rational>,
        extensions: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, SpaceError> {
        assert_eq!(worlds.len(), weights.len(), "one weight per world");
        let mut seen = std::collections::HashSet::new();
        for w in &worlds {
            if !seen.insert(w.as_str()) {
                return Err(SpaceError::DuplicateWorld(w.clone()));
            }
        }
        for (w, p) in worlds.iter().zip(&weights) {
            if p.is_negative() {
                return Err(SpaceError::NegativeWeight {
                    world: w.clone(),
                    weight: rational::to_text(p),
                });
            }
        }
        let total: Rational = weights.iter().cloned().sum();
        if !total.is_one() {
            return Err(SpaceError::NotNormalized(rational::to_text(&total)));
        }
        let denominator = weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let numerators = weights
            .iter()
            .map(|w| w.numer() * (&denominator / w.denom()))
            .collect();
        let mut masks = BTreeMap::new();
        for (event, members) in extensions {
            let mut mask = vec![false; worlds.len()];
            for index in members {
                if index >= worlds.len() {
                    return Err(SpaceError::UnknownWorld { event, index });
                }
                mask[index] = true;
            }
            masks.insert(event, mask);
        }
        Ok(Self {
            worlds,
            numerators,
            denominator,
            extensions: masks,
        })
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn weight(&self, world: usize) -> Rational {
        Rational::new(self.numerators[world].clone(), self.denominator.clone())
    }

    pub fn is_declared(&self, event: &str) -> bool {
        self.extensions.contains_key(event)
    }

    pub fn event_names(&self) -> impl Iterator<Item = &str> {
        self.extensions.keys().map(String::as_str)
    }

    /// Extension of `e` as a membership mask over the worlds.
    pub fn extension(&self, e: &EventExpr) -> Result<Vec<bool>, SpaceError> {
        let n = self.worlds.len();
        Ok(match e {
            EventExpr::True => vec![true; n],
            EventExpr::False => vec![false; n],
            EventExpr::Atom(name) => self
                .extensions
                .get(name)
                .cloned()
                .ok_or_else(|| SpaceError::UndeclaredAtom(name.clone()))?,
            EventExpr::Not(inner) => self.extension(inner)?.into_iter().map(|b| !b).collect(),
            EventExpr::And(ops) => {
                let mut acc = vec![true; n];
                for op in ops {
                    for (a, b) in acc.iter_mut().zip(self.extension(op)?) {
                        *a &= b;
                    }
                }
                acc
            }
            EventExpr::Or(ops) => {
                let mut acc = vec![false; n];
                for op in ops {
                    for (a, b) in acc.iter_mut().zip(self.extension(op)?) {
                        *a |= b;
                    }
                }
                acc
            }
        })
    }

    fn mass(&self, mask: &[bool]) -> Rational {
        let sum: BigInt = self
            .numerators
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum();
        Rational::new(sum, self.denominator.clone())
    }

    /// Exact probability of `e`.
    pub fn prob(&self, e: &EventExpr) -> Result<Rational, SpaceError> {
        Ok(self.mass(&self.extension(e)?))
    }

    /// `p(e | given) = p(e ∧ given) / p(given)`.
    pub fn cond_prob(&self, e: &EventExpr, given: &EventExpr) -> Result<Rational, SpaceError> {
        let g = self.extension(given)?;
        let pg = self.mass(&g);
        if pg.is_zero() {
            return Err(SpaceError::ZeroConditioning);
        }
        let joint: Vec<bool> = self.extension(e)?.iter().zip(&g).map(|(a, b)| *a && *b).collect();
        Ok(self.mass(&joint) / pg)
    }

    /// Like [`cond_prob`](Self::cond_prob) but `None` when `given` is null.
    pub fn cond_prob_opt(
        &self,
        e: &EventExpr,
        given: &EventExpr,
    ) -> Result<Option<Rational>, SpaceError> {
        match self.cond_prob(e, given) {
            Ok(p) => Ok(Some(p)),
            Err(SpaceError::ZeroConditioning) => Ok(None),
            Err(other) => Err(other),
        }
    }

    /// Covariance-style correlation test of `a` and `b` within `given`.
    pub fn correlated(
        &self,
        a: &EventExpr,
        b: &EventExpr,
        given: &EventExpr,
    ) -> Result<Correlation, SpaceError> {
        let pab = self.cond_prob(&a.clone().and(b.clone()), given)?;
        let pa = self.cond_prob(a, given)?;
        let pb = self.cond_prob(b, given)?;
        let delta = pab - pa * pb;
        Ok(Correlation {
            correlated: !delta.is_zero(),
            delta,
        })
    }

    /// Per-value screening-off test: for every value `q` of `v`,
    /// `p(a ∧ b | Vq ∧ given) = p(a | Vq ∧ given) · p(b | Vq ∧ given)`.
    /// Values with `p(Vq ∧ given) = 0` are reported as vacuous.
    pub fn screens_off(
        &self,
        v: &Variable,
        a: &EventExpr,
        b: &EventExpr,
        given: &EventExpr,
    ) -> Result<ScreeningReport, SpaceError> {
        v.check_partition(self)?;
        let mut values = Vec::with_capacity(v.values.len());
        for value in &v.values {
            let cond = value.event.clone().and(given.clone());
            let status = match self.correlated(a, b, &cond) {
                Ok(c) if c.correlated => ScreeningStatus::Fails { delta: c.delta },
                Ok(_) => ScreeningStatus::Holds,
                Err(SpaceError::ZeroConditioning) => ScreeningStatus::Vacuous,
                Err(e) => return Err(e),
            };
            values.push(ValueScreening {
                label: value.label.clone(),
                status,
            });
        }
        Ok(ScreeningReport {
            variable: v.name.clone(),
            values,
        })
    }

    /// Whether `a`'s extension is contained in `b`'s (over all worlds).
    pub fn entails(&self, a: &EventExpr, b: &EventExpr) -> Result<bool, SpaceError> {
        let ea = self.extension(a)?;
        let eb = self.extension(b)?;
        Ok(ea.iter().zip(&eb).all(|(x, y)| !x || *y))
    }

    /// First positive-weight world where `a` holds and `b` does not.
    pub fn counterexample(
        &self,
        a: &EventExpr,
        b: &EventExpr,
    ) -> Result<Option<usize>, SpaceError> {
        let ea = self.extension(a)?;
        let eb = self.extension(b)?;
        Ok((0..self.len()).find(|&w| ea[w] && !eb[w] && !self.numerators[w].is_zero()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Correlation {
    pub correlated: bool,
    #[serde(with = "crate::rational::serde_text")]
    pub delta: Rational,
}

/// One value `Vq` of a finite variable, bound to the event type "V has value q".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableValue {
    pub label: String,
    pub event: EventExpr,
}

/// Finite-valued variable; its value events must partition the space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub values: Vec<VariableValue>,
}

impl Variable {
    pub fn new<I, S>(name: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = (S, EventExpr)>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            values: values
                .into_iter()
                .map(|(label, event)| VariableValue {
                    label: label.into(),
                    event,
                })
                .collect(),
        }
    }

    /// Two-valued variable `{C, ¬C}`.
    pub fn binary(name: impl Into<String>, event: EventExpr) -> Self {
        let name = name.into();
        let neg = format!("¬{name}");
        Self::new(name.clone(), [(name, event.clone()), (neg, event.negate())])
    }

    /// One-valued variable whose only value is the sure event.
    pub fn trivial(name: impl Into<String>) -> Self {
        Self::new(name, [("⊤", EventExpr::True)])
    }

    /// Checks that value extensions are pairwise disjoint and cover every world.
    pub fn check_partition(&self, space: &FiniteProbabilitySpace) -> Result<(), SpaceError> {
        let mut owner: Vec<Option<usize>> = vec![None; space.len()];
        for (k, value) in self.values.iter().enumerate() {
            for (w, member) in space.extension(&value.event)?.into_iter().enumerate() {
                if !member {
                    continue;
                }
                if let Some(prev) = owner[w] {
                    return Err(SpaceError::NotAPartition {
                        variable: self.name.clone(),
                        reason: format!(
                            "values `{}` and `{}` overlap on world `{}`",
                            self.values[prev].label,
                            value.label,
                            space.worlds()[w]
                        ),
                    });
                }
                owner[w] = Some(k);
            }
        }
        if let Some(w) = owner.iter().position(Option::is_none) {
            return Err(SpaceError::NotAPartition {
                variable: self.name.clone(),
                reason: format!("world `{}` has no value", space.worlds()[w]),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScreeningStatus {
    Holds,
    Fails {
        #[serde(with = "crate::rational::serde_text")]
        delta: Rational,
    },
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValueScreening {
    pub label: String,
    #[serde(flatten)]
    pub status: ScreeningStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScreeningReport {
    pub variable: String,
    pub values: Vec<ValueScreening>,
}

impl ScreeningReport {
    /// True when no value fails (vacuous values do not count against it).
    pub fn holds(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValueScreening> {
        self.values
            .iter()
            .filter(|v| matches!(v.status, ScreeningStatus::Fails { .. }))
    }
}
