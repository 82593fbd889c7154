//! Vocabulary of the EPR-Bohm setup: measurement directions, wings,
//! outcomes, setting pairs and the atomic event names built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of measurement directions per wing.
pub const DIRECTIONS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Wing {
    Left,
    Right,
}

impl Wing {
    pub fn letter(self) -> char {
        match self {
            Wing::Left => 'L',
            Wing::Right => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Outcome::Plus),
            '-' => Some(Outcome::Minus),
            _ => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Joint outcome `(a, b)` of the left and right measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomePair {
    pub left: Outcome,
    pub right: Outcome,
}

impl OutcomePair {
    /// Canonical order `++, +-, -+, --`; table columns follow it.
    pub const ALL: [OutcomePair; 4] = [
        OutcomePair::new(Outcome::Plus, Outcome::Plus),
        OutcomePair::new(Outcome::Plus, Outcome::Minus),
        OutcomePair::new(Outcome::Minus, Outcome::Plus),
        OutcomePair::new(Outcome::Minus, Outcome::Minus),
    ];
    pub const PLUS_PLUS: OutcomePair = OutcomePair::ALL[0];

    pub const fn new(left: Outcome, right: Outcome) -> Self {
        Self { left, right }
    }

    pub fn index(self) -> usize {
        match (self.left, self.right) {
            (Outcome::Plus, Outcome::Plus) => 0,
            (Outcome::Plus, Outcome::Minus) => 1,
            (Outcome::Minus, Outcome::Plus) => 2,
            (Outcome::Minus, Outcome::Minus) => 3,
        }
    }

    pub fn is_equal(self) -> bool {
        self.left == self.right
    }

    pub fn label(self) -> String {
        format!("{}{}", self.left.symbol(), self.right.symbol())
    }
}

impl fmt::Display for OutcomePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for OutcomePair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => match (Outcome::from_symbol(a), Outcome::from_symbol(b)) {
                (Some(a), Some(b)) => Ok(OutcomePair::new(a, b)),
                _ => Err(format!("bad outcome pair `{s}`")),
            },
            _ => Err(format!("bad outcome pair `{s}`")),
        }
    }
}

/// Setting pair `(L_i, R_j)` with 1-based direction indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SettingPair {
    pub left: u8,
    pub right: u8,
}

impl SettingPair {
    pub const fn new(left: u8, right: u8) -> Self {
        Self { left, right }
    }

    /// All `k²` pairs in row-major order `11, 12, …, kk`.
    pub fn all_for(k: u8) -> impl Iterator<Item = SettingPair> {
        (1..=k).flat_map(move |l| (1..=k).map(move |r| SettingPair::new(l, r)))
    }

    /// The nine pairs of the three-direction experiment.
    pub fn all() -> impl Iterator<Item = SettingPair> {
        Self::all_for(DIRECTIONS)
    }

    /// The three pairs that enter the Wigner-Bell inequality.
    pub const WIGNER: [SettingPair; 3] = [
        SettingPair::new(1, 2),
        SettingPair::new(2, 3),
        SettingPair::new(1, 3),
    ];

    /// Row-major index among the nine three-direction pairs.
    pub fn index(self) -> usize {
        debug_assert!(self.within(DIRECTIONS));
        (self.left as usize - 1) * DIRECTIONS as usize + (self.right as usize - 1)
    }

    pub fn from_index(index: usize) -> Self {
        let k = DIRECTIONS as usize;
        Self::new((index / k + 1) as u8, (index % k + 1) as u8)
    }

    pub fn within(self, k: u8) -> bool {
        (1..=k).contains(&self.left) && (1..=k).contains(&self.right)
    }

    pub fn is_parallel(self) -> bool {
        self.left == self.right
    }

    pub fn label(self) -> String {
        if self.left < 10 && self.right < 10 {
            format!("{}{}", self.left, self.right)
        } else {
            format!("{}:{}", self.left, self.right)
        }
    }

    /// Event type `L_i ∧ R_j` in name form.
    pub fn settings(self) -> (String, String) {
        (
            setting_event(Wing::Left, self.left),
            setting_event(Wing::Right, self.right),
        )
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SettingPair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad setting pair `{s}`: expected `ij` or `i:j`");
        let s = s.trim();
        let (l, r) = if let Some((l, r)) = s.split_once([':', ',']) {
            (l.trim().parse::<u8>(), r.trim().parse::<u8>())
        } else if s.len() == 2 && s.is_ascii() {
            (s[..1].parse::<u8>(), s[1..].parse::<u8>())
        } else {
            return Err(bad());
        };
        match (l, r) {
            (Ok(l), Ok(r)) if l >= 1 && r >= 1 => Ok(SettingPair::new(l, r)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for SettingPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for SettingPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// `L_i` / `R_j`.
pub fn setting_event(wing: Wing, direction: u8) -> String {
    format!("{}{}", wing.letter(), direction)
}

/// `L_i^a` / `R_j^b`, written `L1+`, `R3-`.
pub fn outcome_event(wing: Wing, direction: u8, outcome: Outcome) -> String {
    format!("{}{}{}", wing.letter(), direction, outcome.symbol())
}

/// Common cause event type of the parallel pair `(i, i)`, written `C11`.
pub fn cause_event(direction: u8) -> String {
    format!("C{direction}{direction}")
}
