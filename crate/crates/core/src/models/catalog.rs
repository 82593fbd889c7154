//! Named models shipped with the crate.

use super::{
    CauseAssignment, HiddenVariableModel, ResponseRule, SettingPolicy, WingResponse,
};
use crate::experiment::SettingPair;
use crate::rational::{int, ratio, Rational};

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 5] = [
    "uniform",
    "c3-not-c1",
    "szabo-standin",
    "conspiratorial",
    "defective",
];

pub fn by_name(name: &str) -> Option<HiddenVariableModel> {
    Some(match name {
        "uniform" => uniform(),
        "c3-not-c1" => c3_not_c1(),
        "szabo-standin" => szabo_standin(),
        "conspiratorial" => conspiratorial(),
        "defective" => defective_no_outcome(),
        _ => return None,
    })
}

fn uniform_causes() -> Vec<Rational> {
    vec![ratio(1, 8); 8]
}

/// Uniform causes, uniform independent settings, MTH response.
pub fn uniform() -> HiddenVariableModel {
    HiddenVariableModel::mth(uniform_causes()).unwrap()
}

/// `C11` and `C22` independent and fair, `C33 = ¬C11`; reproduces the
/// singlet statistics at directions 0°, 90°, 180°.
pub fn c3_not_c1() -> HiddenVariableModel {
    let dist = CauseAssignment::all()
        .map(|c| if c.cause(3) != c.cause(1) { ratio(1, 4) } else { int(0) })
        .collect();
    HiddenVariableModel::mth(dist).unwrap()
}

/// Stand-in for the kind of model described by Szabó (the concrete published
/// model is not reproduced here): uniform causes and an assignment-dependent
/// setting policy under which each single cause atom is statistically
/// independent of the settings, while two-atom conjunctions are not.
///
/// With `χ_ij(c) = +1` if `c_i = c_j` and `-1` otherwise, the policy is
/// `p(s | c) = (1 + σ_s χ(c)) / 9` with `σ = +χ12` on (1,2), `-χ12` on (2,1),
/// `+χ23` on (2,3), `-χ23` on (3,2), `-χ13` on (1,3) and `+χ13` on (3,1).
/// Each character is uncorrelated with every single literal under uniform
/// causes, but the pair conjunctions shift: the model reaches
/// `p13(++) = 1/2 > p12(++) + p23(++) = 0`.
pub fn szabo_standin() -> HiddenVariableModel {
    let chi = |c: CauseAssignment, i: u8, j: u8| -> i64 {
        if c.cause(i) == c.cause(j) {
            1
        } else {
            -1
        }
    };
    let rows = CauseAssignment::all()
        .map(|c| {
            SettingPair::all()
                .map(|s| {
                    let shift = match (s.left, s.right) {
                        (1, 2) => chi(c, 1, 2),
                        (2, 1) => -chi(c, 1, 2),
                        (2, 3) => chi(c, 2, 3),
                        (3, 2) => -chi(c, 2, 3),
                        (1, 3) => -chi(c, 1, 3),
                        (3, 1) => chi(c, 1, 3),
                        _ => 0,
                    };
                    ratio(1 + shift, 9)
                })
                .collect()
        })
        .collect();
    HiddenVariableModel::new(uniform_causes(), SettingPolicy::Conditional(rows), ResponseRule::Mth)
        .unwrap()
}

/// Settings forced by `C11`: half the time uniform, otherwise (1,2) when
/// `C11` holds and (2,3) when it does not. Every pair keeps positive
/// probability so the rest of the derivation remains checkable.
pub fn conspiratorial() -> HiddenVariableModel {
    let rows = CauseAssignment::all()
        .map(|c| {
            let forced = if c.cause(1) { SettingPair::new(1, 2) } else { SettingPair::new(2, 3) };
            SettingPair::all()
                .map(|s| ratio(1, 18) + if s == forced { ratio(1, 2) } else { int(0) })
                .collect()
        })
        .collect();
    HiddenVariableModel::new(uniform_causes(), SettingPolicy::Conditional(rows), ResponseRule::Mth)
        .unwrap()
}

/// Settings (1,2) iff `C11`, otherwise (2,3).
pub fn conspiratorial_deterministic() -> HiddenVariableModel {
    let rows = CauseAssignment::all()
        .map(|c| {
            let forced = if c.cause(1) { SettingPair::new(1, 2) } else { SettingPair::new(2, 3) };
            SettingPair::all()
                .map(|s| if s == forced { int(1) } else { int(0) })
                .collect()
        })
        .collect();
    HiddenVariableModel::new(uniform_causes(), SettingPolicy::Conditional(rows), ResponseRule::Mth)
        .unwrap()
}

/// MTH response except that neither wing registers an outcome at parallel
/// settings (1,1) when all three causes are absent.
pub fn defective_no_outcome() -> HiddenVariableModel {
    let mut table = ResponseRule::mth_table();
    let c = CauseAssignment::from_values(false, false, false);
    table[c.index()][SettingPair::new(1, 1).index()] = (WingResponse::Silent, WingResponse::Silent);
    HiddenVariableModel::new(uniform_causes(), SettingPolicy::uniform(), ResponseRule::Table(table))
        .unwrap()
}
