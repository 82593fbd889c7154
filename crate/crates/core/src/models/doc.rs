//! JSON documents for models and target tables. Rationals are `"num/den"`
//! strings so documents round-trip bit-exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    HiddenVariableModel, ModelError, ResponseRule, SettingPolicy, TargetStatistics, WingResponse,
};
use crate::experiment::SettingPair;
use crate::rational::{serde_text_opt, serde_text_vec, Rational};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub(crate) struct RationalRow(#[serde(with = "serde_text_vec")] pub Vec<Rational>);

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelDoc {
    cause_dist: RationalRow,
    policy: PolicyDoc,
    response: ResponseDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum PolicyDoc {
    Independent(RationalRow),
    Conditional(Vec<RationalRow>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ResponseDoc {
    Named(String),
    Table(Vec<Vec<String>>),
}

impl From<HiddenVariableModel> for ModelDoc {
    fn from(m: HiddenVariableModel) -> Self {
        let policy = match m.policy {
            SettingPolicy::Independent(row) => PolicyDoc::Independent(RationalRow(row)),
            SettingPolicy::Conditional(rows) => {
                PolicyDoc::Conditional(rows.into_iter().map(RationalRow).collect())
            }
        };
        let response = match m.response {
            ResponseRule::Mth => ResponseDoc::Named("mth".into()),
            ResponseRule::Table(rows) => ResponseDoc::Table(
                rows.iter()
                    .map(|row| {
                        row.iter()
                            .map(|(l, r)| format!("{}{}", l.symbol(), r.symbol()))
                            .collect()
                    })
                    .collect(),
            ),
        };
        ModelDoc {
            cause_dist: RationalRow(m.cause_dist),
            policy,
            response,
        }
    }
}

impl TryFrom<ModelDoc> for HiddenVariableModel {
    type Error = ModelError;

    fn try_from(doc: ModelDoc) -> Result<Self, ModelError> {
        let policy = match doc.policy {
            PolicyDoc::Independent(row) => SettingPolicy::Independent(row.0),
            PolicyDoc::Conditional(rows) => {
                SettingPolicy::Conditional(rows.into_iter().map(|r| r.0).collect())
            }
        };
        let response = match doc.response {
            ResponseDoc::Named(name) if name == "mth" => ResponseRule::Mth,
            ResponseDoc::Named(other) => {
                return Err(ModelError::InvalidModel(format!(
                    "unknown response rule `{other}` (expected \"mth\" or a table)"
                )))
            }
            ResponseDoc::Table(rows) => ResponseRule::Table(
                rows.iter()
                    .map(|row| row.iter().map(|cell| parse_cell(cell)).collect())
                    .collect::<Result<_, _>>()?,
            ),
        };
        HiddenVariableModel::new(doc.cause_dist.0, policy, response)
    }
}

fn parse_cell(cell: &str) -> Result<(WingResponse, WingResponse), ModelError> {
    let bad = || ModelError::InvalidModel(format!("bad response cell `{cell}`"));
    let mut chars = cell.chars();
    match (chars.next(), chars.next(), chars.next()) {
        (Some(l), Some(r), None) => Ok((
            WingResponse::from_symbol(l).ok_or_else(bad)?,
            WingResponse::from_symbol(r).ok_or_else(bad)?,
        )),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TargetsDoc {
    pairs: BTreeMap<SettingPair, RationalRow>,
    #[serde(with = "serde_text_opt", default)]
    radius: Option<Rational>,
}

impl From<TargetStatistics> for TargetsDoc {
    fn from(t: TargetStatistics) -> Self {
        TargetsDoc {
            pairs: t
                .entries
                .into_iter()
                .map(|(p, row)| (p, RationalRow(row.to_vec())))
                .collect(),
            radius: t.radius,
        }
    }
}

impl TryFrom<TargetsDoc> for TargetStatistics {
    type Error = ModelError;

    fn try_from(doc: TargetsDoc) -> Result<Self, ModelError> {
        let mut t = TargetStatistics::new();
        for (pair, row) in doc.pairs {
            let row: [Rational; 4] = row.0.try_into().map_err(|_| {
                ModelError::InvalidTargets(format!("pair {pair} needs four entries"))
            })?;
            t.insert(pair, row)?;
        }
        t.set_radius(doc.radius);
        Ok(t)
    }
}
