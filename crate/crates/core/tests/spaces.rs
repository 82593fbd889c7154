use bellwright::models::{check_ex_nowm, check_no_cons, ConjunctionSweep, ResponseRule, SettingPolicy};
use bellwright::probability::SpaceBuilder;
use bellwright::quantum::{self, DirectionConfig};
use bellwright::rational::{int, ratio};
use bellwright::{EventExpr, FiniteProbabilitySpace, HiddenVariableModel, OutcomePair, SettingPair, Variable};
use proptest::prelude::*;

const NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn space_strategy() -> impl Strategy<Value = FiniteProbabilitySpace> {
    proptest::collection::vec((0i64..10, proptest::collection::vec(any::<bool>(), 4)), 1..12)
        .prop_filter("some mass", |ws| ws.iter().any(|(w, _)| *w > 0))
        .prop_map(|ws| {
            let total: i64 = ws.iter().map(|(w, _)| w).sum();
            let mut b = SpaceBuilder::new();
            for n in NAMES {
                b.declare(n);
            }
            for (i, (w, flags)) in ws.iter().enumerate() {
                let id = b.world(format!("w{i}"), ratio(*w, total));
                for (n, &f) in NAMES.iter().zip(flags) {
                    if f {
                        b.holds(id, *n);
                    }
                }
            }
            b.build().unwrap()
        })
}

fn expr_strategy() -> impl Strategy<Value = EventExpr> {
    let leaf = prop_oneof![
        (0usize..4).prop_map(|i| EventExpr::atom(NAMES[i])),
        Just(EventExpr::True),
        Just(EventExpr::False),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| !e),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a & b),
            (inner.clone(), inner).prop_map(|(a, b)| a | b),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn probability_is_additive(s in space_strategy(), a in expr_strategy(), b in expr_strategy()) {
        let whole = s.prob(&a).unwrap();
        let split = s.prob(&(a.clone() & b.clone())).unwrap() + s.prob(&(a.clone() & !b.clone())).unwrap();
        prop_assert_eq!(whole.clone(), split);
        prop_assert!(whole >= int(0) && whole <= int(1));
    }

    #[test]
    fn probability_is_monotone(s in space_strategy(), a in expr_strategy(), b in expr_strategy()) {
        let narrow = a.clone() & b;
        prop_assert!(s.entails(&narrow, &a).unwrap());
        prop_assert!(s.prob(&narrow).unwrap() <= s.prob(&a).unwrap());
    }

    #[test]
    fn conditioning_rescales_exactly(s in space_strategy(), e in expr_strategy(), g in expr_strategy()) {
        let pg = s.prob(&g).unwrap();
        match s.cond_prob(&e, &g) {
            Ok(c) => prop_assert_eq!(c * pg, s.prob(&(e & g)).unwrap()),
            Err(_) => prop_assert_eq!(pg, int(0)),
        }
    }

    #[test]
    fn double_negation_collapses(e in expr_strategy()) {
        prop_assert_eq!(!!e.clone(), e);
    }

    #[test]
    fn quantum_table_is_symmetric(a in 0.0f64..360.0, b in 0.0f64..360.0, c in 0.0f64..360.0) {
        let cfg = DirectionConfig::from_degrees([a, b, c]).unwrap();
        for pair in SettingPair::all() {
            let swapped = SettingPair::new(pair.right, pair.left);
            for o in OutcomePair::ALL {
                let flipped = OutcomePair::new(o.right, o.left);
                prop_assert_eq!(quantum::joint_prob(&cfg, pair, o), quantum::joint_prob(&cfg, swapped, flipped));
            }
        }
    }

}

proptest! {
    // The full 256-formula sweep is the expensive part.
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn independent_mth_models_pass_every_checker(
        c in proptest::collection::vec(0i64..9, 8).prop_filter("mass", |w| w.iter().any(|&x| x > 0)),
        p in proptest::collection::vec(1i64..9, 9),
    ) {
        let ct: i64 = c.iter().sum();
        let pt: i64 = p.iter().sum();
        let m = HiddenVariableModel::new(
            c.iter().map(|&w| ratio(w, ct)).collect(),
            SettingPolicy::Independent(p.iter().map(|&w| ratio(w, pt)).collect()),
            ResponseRule::Mth,
        ).unwrap();
        let ex = check_ex_nowm(&m);
        prop_assert!(ex.ex_holds() && ex.nowm_holds());
        prop_assert!(check_no_cons(&m, ConjunctionSweep::Full).holds());
        let space = m.to_space();
        for i in 1..=3u8 {
            let given = EventExpr::atom(format!("L{i}")) & EventExpr::atom(format!("R{i}"));
            let lp = EventExpr::atom(format!("L{i}+"));
            let rm = EventExpr::atom(format!("R{i}-"));
            if let Some(p) = space.cond_prob_opt(&rm, &(lp.clone() & given.clone())).unwrap() {
                prop_assert_eq!(p, int(1));
            }
            let v = Variable::binary(format!("C{i}{i}"), EventExpr::atom(format!("C{i}{i}")));
            prop_assert!(space.screens_off(&v, &lp, &rm, &given).unwrap().holds());
        }
    }
}
