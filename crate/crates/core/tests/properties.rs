use bellwright::derivation::{bell_check, reduce_to_binary, run_derivation, DerivationError, Identity};
use bellwright::experiment::{Outcome, OutcomePair, SettingPair, Wing};
use bellwright::feasibility::{encode, solve, verify_certificate, FeasibilityProblem, FeasibilityResult};
use bellwright::models::{predicted_conditionals, ResponseRule, SettingPolicy, TargetStatistics};
use bellwright::probability::SpaceBuilder;
use bellwright::quantum::{self, DirectionConfig};
use bellwright::rational::{int, ratio, Rational};
use bellwright::simulate::{self, RunConfig};
use bellwright::{EventExpr, HiddenVariableModel, Variable};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn normalized(weights: &[i64]) -> Vec<Rational> {
    let total: i64 = weights.iter().sum();
    weights.iter().map(|&w| ratio(w, total)).collect()
}

fn positive_weights(len: usize, max: i64) -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::vec(0..max, len).prop_filter("some mass", |w| w.iter().any(|&x| x > 0))
}

fn mth_model() -> impl Strategy<Value = HiddenVariableModel> {
    (positive_weights(8, 15), proptest::collection::vec(1i64..10, 9)).prop_map(|(c, p)| {
        HiddenVariableModel::new(normalized(&c), SettingPolicy::Independent(normalized(&p)), ResponseRule::Mth).unwrap()
    })
}

fn any_model() -> impl Strategy<Value = HiddenVariableModel> {
    (
        positive_weights(8, 10),
        proptest::collection::vec(proptest::collection::vec(1i64..6, 9), 8),
    )
        .prop_map(|(c, rows)| {
            let policy = SettingPolicy::Conditional(rows.iter().map(|r| normalized(r)).collect());
            HiddenVariableModel::new(normalized(&c), policy, ResponseRule::Mth).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quantum_rows_are_normalized(a in -720.0f64..720.0, b in -720.0f64..720.0, c in -720.0f64..720.0) {
        let cfg = DirectionConfig::from_degrees([a, b, c]).unwrap();
        for pair in SettingPair::all() {
            let sum: f64 = OutcomePair::ALL.iter().map(|&o| quantum::joint_prob(&cfg, pair, o)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for o in Outcome::BOTH {
                let left: f64 = Outcome::BOTH.iter().map(|&r| quantum::joint_prob(&cfg, pair, OutcomePair::new(o, r))).sum();
                prop_assert!((left - 0.5).abs() < 1e-12);
                prop_assert_eq!(quantum::marginal_prob(&cfg, Wing::Right, pair, o), 0.5);
            }
            let phi = cfg.angle_between(pair.left, pair.right);
            prop_assert!((quantum::correlation_coefficient(&cfg, pair) + phi.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn induced_spaces_are_normalized(m in any_model()) {
        let space = m.to_space();
        prop_assert_eq!(space.prob(&EventExpr::True).unwrap(), int(1));
        let t = predicted_conditionals(&m).unwrap();
        for pair in t.pairs() {
            let sum: Rational = t.row(pair).unwrap().iter().cloned().sum();
            prop_assert!(sum.is_one());
        }
    }

    #[test]
    fn derivation_is_sound(m in mth_model()) {
        let report = run_derivation(&m);
        prop_assert!(report.all_proven(), "{:?}", report.first_failure());
        let t = predicted_conditionals(&m).unwrap();
        let (p13, p12, p23) = t.wigner_triple().unwrap();
        prop_assert!(bell_check(p13, p12, p23).unwrap().satisfied);
    }
}

/// One value of a screening variable: whether `a ∧ b` holds on it, and the
/// weights of its worlds inside and outside the conditioning event.
#[derive(Debug, Clone)]
struct ValueSpec {
    plus: bool,
    inside: Vec<i64>,
    outside: Vec<(i64, bool, bool)>,
}

fn value_spec() -> impl Strategy<Value = ValueSpec> {
    (
        any::<bool>(),
        proptest::collection::vec(1i64..20, 1..=3),
        proptest::collection::vec((1i64..20, any::<bool>(), any::<bool>()), 0..=2),
    )
        .prop_map(|(plus, inside, outside)| ValueSpec { plus, inside, outside })
}

fn screened_space(values: &[ValueSpec]) -> (bellwright::FiniteProbabilitySpace, Variable) {
    let total: i64 = values
        .iter()
        .map(|v| v.inside.iter().sum::<i64>() + v.outside.iter().map(|o| o.0).sum::<i64>())
        .sum();
    let mut b = SpaceBuilder::new();
    b.declare("a").declare("b").declare("g");
    for q in 0..values.len() {
        b.declare(format!("v{q}"));
    }
    for (q, v) in values.iter().enumerate() {
        for (n, &w) in v.inside.iter().enumerate() {
            let i = b.world(format!("v{q}-in{n}"), ratio(w, total));
            b.holds(i, "g").holds(i, format!("v{q}"));
            if v.plus {
                b.holds(i, "a").holds(i, "b");
            }
        }
        for (n, &(w, a, bb)) in v.outside.iter().enumerate() {
            let i = b.world(format!("v{q}-out{n}"), ratio(w, total));
            b.holds(i, format!("v{q}"));
            if a {
                b.holds(i, "a");
            }
            if bb {
                b.holds(i, "b");
            }
        }
    }
    let var = Variable::new(
        "V",
        (0..values.len()).map(|q| (format!("v{q}"), EventExpr::atom(format!("v{q}")))),
    );
    (b.build().unwrap(), var)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reduction_is_sound(values in proptest::collection::vec(value_spec(), 1..=6)) {
        let (space, v) = screened_space(&values);
        let (a, b, g) = (EventExpr::atom("a"), EventExpr::atom("b"), EventExpr::atom("g"));
        let split = reduce_to_binary(&space, &v, &a, &b, &g).unwrap();
        for ids in split.equations.values() {
            prop_assert!(ids.iter().all(Identity::holds));
        }
        let expected: Vec<String> = values.iter().enumerate().filter(|(_, s)| s.plus).map(|(q, _)| format!("v{q}")).collect();
        prop_assert_eq!(&split.plus_values, &expected);
        prop_assert_eq!(split.plus_values.len() + split.minus_values.len(), values.len());
        let c = split.cause.clone();
        for (e, given, want) in [(&a, c.clone() & g.clone(), 1), (&b, c.clone() & g.clone(), 1), (&a, !c.clone() & g.clone(), 0), (&b, !c & g.clone(), 0)] {
            if let Some(p) = space.cond_prob_opt(e, &given).unwrap() {
                prop_assert_eq!(p, int(want));
            }
        }
    }

    #[test]
    fn imperfect_correlation_is_named(values in proptest::collection::vec(value_spec(), 1..=6), which in 0usize..6) {
        // Break one inside world: `a` without `b`.
        let (space, v) = screened_space(&values);
        let q = which % values.len();
        let mut b = SpaceBuilder::new();
        for name in space.event_names() {
            b.declare(name);
        }
        b.declare("a").declare("b");
        for (i, id) in space.worlds().iter().enumerate() {
            let w = b.world(id.clone(), space.weight(i));
            for name in space.event_names() {
                if space.extension(&EventExpr::atom(name)).unwrap()[i] {
                    b.holds(w, name);
                }
            }
            if id == &format!("v{q}-in0") {
                b.holds(w, "a");
            }
        }
        let broken = b.build().unwrap();
        let r = reduce_to_binary(&broken, &v, &EventExpr::atom("a"), &EventExpr::atom("b"), &EventExpr::atom("g"));
        if values[q].plus {
            prop_assert!(r.is_ok());
        } else {
            let named = matches!(r, Err(DerivationError::NotPerfectlyCorrelated(_)));
            prop_assert!(named, "{:?}", r);
        }
    }
}

/// Independent oracle: a system `Aq = b, q ≥ 0` is feasible iff some set of
/// linearly independent columns carries a non-negative solution.
fn vertex_oracle(p: &FeasibilityProblem) -> bool {
    let n = p.variables();
    let m = p.constraints.len();
    for mask in 0u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|&j| mask >> j & 1 == 1).collect();
        if cols.len() > m {
            continue;
        }
        let mut rows: Vec<Vec<Rational>> = p
            .constraints
            .iter()
            .map(|c| {
                let mut r: Vec<Rational> = cols.iter().map(|&j| int(c.coefficients[j].into())).collect();
                r.push(c.target.clone());
                r
            })
            .collect();
        let k = cols.len();
        let mut rank = 0;
        let mut pivots = Vec::new();
        for col in 0..k {
            let Some(pr) = (rank..m).find(|&r| !rows[r][col].is_zero()) else { continue };
            rows.swap(rank, pr);
            let pv = rows[rank][col].clone();
            for x in rows[rank].iter_mut() {
                *x /= &pv;
            }
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && !row[col].is_zero() {
                    let f = row[col].clone();
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        *x -= &f * y;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
        }
        if rank < k {
            continue;
        }
        let consistent = rows[rank..].iter().all(|r| r[k].is_zero());
        let nonneg = (0..rank).all(|r| !rows[r][k].is_negative());
        if consistent && nonneg {
            return true;
        }
    }
    false
}

fn row_strategy() -> impl Strategy<Value = [Rational; 4]> {
    proptest::collection::vec(0i64..6, 4)
        .prop_filter("some mass", |w| w.iter().any(|&x| x > 0))
        .prop_map(|w| {
            let r = normalized(&w);
            [r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone()]
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn wigner_violation_implies_infeasibility(r13 in row_strategy(), r12 in row_strategy(), r23 in row_strategy()) {
        let mut t = TargetStatistics::new();
        t.insert(SettingPair::new(1, 3), r13).unwrap();
        t.insert(SettingPair::new(1, 2), r12).unwrap();
        t.insert(SettingPair::new(2, 3), r23).unwrap();
        let p = encode(&t, &SettingPair::WIGNER).unwrap();
        let r = solve(&p);
        verify_certificate(&r, &p).unwrap();
        let (p13, p12, p23) = t.wigner_triple().unwrap();
        if !bell_check(p13, p12, p23).unwrap().satisfied {
            let infeasible = matches!(r, FeasibilityResult::Infeasible { .. });
            prop_assert!(infeasible, "{}", r);
        }
        prop_assert_eq!(r.is_feasible(), vertex_oracle(&p));
    }

    #[test]
    fn model_statistics_are_always_feasible(m in mth_model()) {
        let t = predicted_conditionals(&m).unwrap();
        let p = encode(&t, &[]).unwrap();
        let r = solve(&p);
        prop_assert!(r.is_feasible());
        verify_certificate(&r, &p).unwrap();
    }

    #[test]
    fn runs_are_reproducible(m in any_model(), trials in 1u64..3000, seed in any::<u64>(), substreams in 1u32..20) {
        let mut cfg = RunConfig::new(trials, seed);
        cfg.substreams = substreams;
        let a = simulate::run(&m, &cfg).unwrap();
        prop_assert_eq!(a.counts.iter().flatten().sum::<u64>(), trials);
        let cc = a.cause_counts.unwrap();
        prop_assert_eq!(cc.iter().flatten().sum::<u64>(), trials);
        prop_assert_eq!(&a, &simulate::run(&m, &cfg).unwrap());
    }
}

#[test]
fn feasibility_handles_more_directions() {
    // Four directions with all-parallel-free pairs from an explicit model on
    // 16 assignments: every assignment equally likely.
    let mut t = TargetStatistics::new();
    let quarter = ratio(1, 4);
    for (l, r) in [(1, 2), (2, 3), (3, 4), (1, 4)] {
        t.insert(SettingPair::new(l, r), [quarter.clone(), quarter.clone(), quarter.clone(), quarter.clone()]).unwrap();
    }
    let p = encode(&t, &[]).unwrap();
    assert_eq!(p.directions, 4);
    assert_eq!(p.variables(), 16);
    let r = solve(&p);
    assert!(r.is_feasible());
    verify_certificate(&r, &p).unwrap();
    assert!(r.witness().unwrap().model().is_none());
    let sum: Rational = r.witness().unwrap().distribution.iter().cloned().sum();
    assert!(sum.is_one());
}
