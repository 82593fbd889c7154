//! Exact finite probability spaces, hidden variable models of the
//! three-direction EPR-Bohm experiment, and tools for testing whether a set
//! of outcome statistics admits a common cause explanation.

pub mod derivation;
pub mod experiment;
pub mod feasibility;
pub mod models;
pub mod probability;
pub mod quantum;
pub mod rational;
pub mod simulate;

pub use derivation::{bell_check, run_derivation, BellCheck, DerivationError, DerivationReport};
pub use experiment::{Outcome, OutcomePair, SettingPair, Wing};
pub use models::{HiddenVariableModel, ModelError, TargetStatistics};
pub use probability::{EventExpr, FiniteProbabilitySpace, SpaceError, Variable};
pub use quantum::DirectionConfig;
pub use rational::Rational;
