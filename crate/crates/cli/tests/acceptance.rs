//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bellwright::derivation::{bell_check, reduce_to_binary, run_derivation, DerivationError, Identity};
use bellwright::feasibility::{encode, solve, verify_certificate, FeasibilityResult};
use bellwright::models::{catalog, check_no_cons, predicted_conditionals, ConjunctionSweep, SettingPolicy};
use bellwright::probability::SpaceBuilder;
use bellwright::quantum::{self, quantum_targets, DirectionConfig, DEFAULT_DENOMINATOR};
use bellwright::rational::{int, ratio, to_f64, Rational};
use bellwright::simulate::{self, empirical_bell, empirical_no_cons, EstimateOptions, RunConfig, SHIPPED_SEED};
use bellwright::{EventExpr, FiniteProbabilitySpace, HiddenVariableModel, Outcome, OutcomePair, SettingPair, SpaceError, Variable, Wing};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and budgets.
const QUANTUM_TOL: f64 = 1e-12;
const SCAN_MIN: f64 = -0.125;
const SCAN_MIN_TOL: f64 = 1e-9;
const SCAN_THETA_TOL: f64 = 0.5;
const MC_TOL: f64 = 0.005;
const MC_TRIALS: u64 = 1_000_000;
const RNG_SEED: u64 = 20_241;

const BUDGET_1: Duration = Duration::from_secs(1);
const BUDGET_2: Duration = Duration::from_secs(5);
const BUDGET_4: Duration = Duration::from_secs(30);
const BUDGET_5: Duration = Duration::from_secs(2);
const BUDGET_6: Duration = Duration::from_secs(10);
const BUDGET_7: Duration = Duration::from_secs(60);

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let detail = f()?;
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:.2?}, budget {budget:?}"))?;
    Ok(format!("{detail} in {took:.2?}"))
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(stream: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(RNG_SEED);
        r.set_stream(stream);
        Rng(r)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }

    fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    fn coin(&mut self) -> bool {
        self.below(2) == 1
    }

    fn angle(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 720.0 - 360.0
    }

    /// Rational probability vector with at least one positive entry.
    fn distribution(&mut self, len: usize, lo: i64, hi: i64) -> Vec<Rational> {
        loop {
            let w: Vec<i64> = (0..len).map(|_| self.range(lo, hi)).collect();
            let total: i64 = w.iter().sum();
            if total > 0 {
                return w.iter().map(|&x| ratio(x, total)).collect();
            }
        }
    }
}

fn c1_quantum_identities() -> Verdict {
    within(BUDGET_1, || {
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            let cfg = DirectionConfig::from_degrees([rng.angle(), rng.angle(), rng.angle()]).unwrap();
            for pair in SettingPair::all() {
                let sum: f64 = OutcomePair::ALL.iter().map(|&o| quantum::joint_prob(&cfg, pair, o)).sum();
                ensure((sum - 1.0).abs() <= QUANTUM_TOL, || format!("row {} sums to {sum}", pair.label()))?;
                for a in Outcome::BOTH {
                    let left: f64 = Outcome::BOTH.iter().map(|&b| quantum::joint_prob(&cfg, pair, OutcomePair::new(a, b))).sum();
                    let right: f64 = Outcome::BOTH.iter().map(|&b| quantum::joint_prob(&cfg, pair, OutcomePair::new(b, a))).sum();
                    ensure((left - 0.5).abs() <= QUANTUM_TOL && (right - 0.5).abs() <= QUANTUM_TOL, || {
                        format!("marginals {left}, {right} at {}", pair.label())
                    })?;
                }
            }
        }
        let cfg = DirectionConfig::from_degrees([0.0, 0.0, 0.0]).unwrap();
        for i in 1..=3 {
            let pair = SettingPair::new(i, i);
            let joint = quantum::exact_joint_prob(&cfg, pair, OutcomePair::new(Outcome::Plus, Outcome::Minus)).unwrap();
            let marginal = quantum::exact_marginal_prob(&cfg, Wing::Left, pair, Outcome::Plus);
            ensure(joint / marginal == int(1), || "p(R- | L+) is not exactly 1 at zero angle".into())?;
        }
        Ok("1000 configurations, p(R-|L+)=1 exactly at 0°".into())
    })
}

fn c2_scan() -> Verdict {
    within(BUDGET_2, || {
        let out = Command::new(env!("CARGO_BIN_EXE_bellwright"))
            .args(["scan", "--theta", "0.1,179.9,0.1"])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        let text = String::from_utf8_lossy(&out.stdout);
        let mut best = (f64::NAN, f64::INFINITY);
        let mut rows = 0;
        for line in text.lines().skip(1) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            rows += 1;
            if cols[4] < best.1 {
                best = (cols[0], cols[4]);
            }
        }
        ensure(rows == 1799, || format!("{rows} grid points"))?;
        ensure((best.1 - SCAN_MIN).abs() <= SCAN_MIN_TOL, || format!("minimum slack {}", best.1))?;
        ensure((best.0 - 60.0).abs() <= SCAN_THETA_TOL, || format!("minimum at {}°", best.0))?;
        Ok(format!("min slack {} at θ={}°", best.1, best.0))
    })
}

fn c3_exact_triples() -> Verdict {
    let check = |angles: [f64; 3], want: (Rational, Rational, Rational), satisfied: bool| -> Result<(), String> {
        let cfg = DirectionConfig::from_degrees(angles).unwrap();
        let got = quantum::exact_wigner_triple(&cfg).ok_or("no exact triple")?;
        ensure(got == want, || format!("{angles:?} gave {got:?}"))?;
        let verdict = bell_check(got.0, got.1, got.2).map_err(|e| e.to_string())?;
        ensure(verdict.satisfied == satisfied, || format!("{angles:?} slack {}", verdict.slack))
    };
    check([0.0, 60.0, 120.0], (ratio(3, 8), ratio(1, 8), ratio(1, 8)), false)?;
    check([0.0, 120.0, 240.0], (ratio(3, 8), ratio(3, 8), ratio(3, 8)), true)?;
    Ok("(3/8,1/8,1/8) violated, (3/8,3/8,3/8) satisfied".into())
}

fn c4_theorem_as_property() -> Verdict {
    within(BUDGET_4, || {
        let mut rng = Rng::new(4);
        for n in 0..200 {
            let causes = rng.distribution(8, 0, 12);
            let policy = SettingPolicy::Independent(rng.distribution(9, 1, 9));
            let m = HiddenVariableModel::new(causes, policy, bellwright::models::ResponseRule::Mth).map_err(|e| e.to_string())?;
            let report = run_derivation(&m);
            ensure(report.all_proven(), || format!("model {n}: failed at {:?}", report.first_failure()))?;
            let (p13, p12, p23) = predicted_conditionals(&m).map_err(|e| e.to_string())?.wigner_triple().unwrap();
            let b = bell_check(p13, p12, p23).map_err(|e| e.to_string())?;
            ensure(b.satisfied, || format!("model {n}: slack {}", b.slack))?;
        }
        Ok("200 models proven with slack ≥ 0".into())
    })
}

fn c5_certificates() -> Verdict {
    let run = |angles: [f64; 3]| -> Result<(FeasibilityResult, Duration), String> {
        let start = Instant::now();
        let t = quantum_targets(&DirectionConfig::from_degrees(angles).unwrap(), DEFAULT_DENOMINATOR);
        let p = encode(&t, &[]).map_err(|e| e.to_string())?;
        let r = solve(&p);
        verify_certificate(&r, &p).map_err(|e| e.to_string())?;
        if let Some(w) = r.witness() {
            let m = w.model().ok_or("witness is not a model")?;
            let back = predicted_conditionals(&m).map_err(|e| e.to_string())?;
            for pair in t.pairs() {
                ensure(back.row(pair) == t.row(pair), || format!("witness misses pair {}", pair.label()))?;
            }
        }
        let took = start.elapsed();
        ensure(took < BUDGET_5, || format!("{angles:?} took {took:.2?}"))?;
        Ok((r, took))
    };
    let name = |r: &FeasibilityResult| r.certificate().and_then(|c| c.name.clone());
    let (a, ta) = run([0.0, 60.0, 120.0])?;
    ensure(matches!(a, FeasibilityResult::Infeasible { .. }) && name(&a).as_deref() == Some("eq32"), || format!("0,60,120: {a}"))?;
    let (b, tb) = run([0.0, 120.0, 240.0])?;
    ensure(matches!(b, FeasibilityResult::Infeasible { .. }) && name(&b).as_deref() == Some("agreement"), || format!("0,120,240: {b}"))?;
    let (c, tc) = run([0.0, 90.0, 180.0])?;
    ensure(c.is_feasible(), || format!("0,90,180: {c}"))?;
    Ok(format!("Wigner form, agreement bound, exact witness in {ta:.2?}/{tb:.2?}/{tc:.2?}"))
}

/// Worlds of one screening value: `(weight, a, b, inside conditioning event)`.
type ValueWorlds = Vec<(i64, bool, bool, bool)>;

fn screened_space(values: &[ValueWorlds], overlap: bool) -> Result<(FiniteProbabilitySpace, Variable), SpaceError> {
    let total: i64 = values.iter().flatten().map(|w| w.0).sum();
    let mut b = SpaceBuilder::new();
    b.declare("a").declare("b").declare("g");
    for q in 0..values.len() {
        b.declare(format!("v{q}"));
    }
    for (q, worlds) in values.iter().enumerate() {
        for (n, &(w, a, bb, g)) in worlds.iter().enumerate() {
            let i = b.world(format!("v{q}-{n}"), ratio(w, total));
            b.holds(i, format!("v{q}"));
            for (flag, atom) in [(a, "a"), (bb, "b"), (g, "g")] {
                if flag {
                    b.holds(i, atom);
                }
            }
        }
    }
    let mut labels: Vec<(String, EventExpr)> = (0..values.len()).map(|q| (format!("v{q}"), EventExpr::atom(format!("v{q}")))).collect();
    if overlap {
        labels.push(("dup".into(), EventExpr::atom("v0")));
    }
    Ok((b.build()?, Variable::new("V", labels)))
}

fn random_values(rng: &mut Rng) -> (Vec<ValueWorlds>, Vec<bool>) {
    let k = rng.range(1, 6) as usize;
    let mut values = Vec::new();
    let mut plus = Vec::new();
    for _ in 0..k {
        let p = rng.coin();
        let mut worlds: ValueWorlds = (0..rng.range(1, 3)).map(|_| (rng.range(1, 20), p, p, true)).collect();
        for _ in 0..rng.range(0, 2) {
            worlds.push((rng.range(1, 20), rng.coin(), rng.coin(), false));
        }
        values.push(worlds);
        plus.push(p);
    }
    (values, plus)
}

fn c6_reduction() -> Verdict {
    within(BUDGET_6, || {
        let mut rng = Rng::new(6);
        let (a, b, g) = (EventExpr::atom("a"), EventExpr::atom("b"), EventExpr::atom("g"));
        let mut broken = [0usize; 3];
        for n in 0..500 {
            let (values, plus) = random_values(&mut rng);
            let (space, v) = screened_space(&values, false).map_err(|e| e.to_string())?;
            let split = reduce_to_binary(&space, &v, &a, &b, &g).map_err(|e| format!("space {n}: {e}"))?;
            ensure(split.equations.len() == 4 && split.equations.values().flatten().all(Identity::holds), || {
                format!("space {n}: an identity fails")
            })?;
            let expect: Vec<String> = plus.iter().enumerate().filter(|(_, &p)| p).map(|(q, _)| format!("v{q}")).collect();
            ensure(split.plus_values == expect, || format!("space {n}: plus values {:?}", split.plus_values))?;

            // Break the same space one of three ways.
            let q = rng.below(values.len() as u64) as usize;
            let mut bad = values.clone();
            let kind = n % 3;
            match kind {
                0 => bad[q].push((rng.range(1, 20), true, false, true)),
                1 => {
                    let p = !plus[q];
                    bad[q].push((rng.range(1, 20), p, p, true));
                }
                _ => {}
            }
            let (space, v) = screened_space(&bad, kind == 2).map_err(|e| e.to_string())?;
            let r = reduce_to_binary(&space, &v, &a, &b, &g);
            let named = match kind {
                0 => matches!(r, Err(DerivationError::NotPerfectlyCorrelated(_))),
                1 => matches!(r, Err(DerivationError::NotScreeningOff { .. })),
                _ => matches!(r, Err(DerivationError::Space(SpaceError::NotAPartition { .. }))),
            };
            ensure(named, || format!("space {n}, break {kind}: {r:?}"))?;
            broken[kind] += 1;
        }
        Ok(format!(
            "500 spaces reduce exactly; {}/{}/{} broken inputs named",
            broken[0], broken[1], broken[2]
        ))
    })
}

fn c7_monte_carlo() -> Verdict {
    within(BUDGET_7, || {
        let m = catalog::uniform();
        let cfg = RunConfig::new(MC_TRIALS, SHIPPED_SEED);
        let t = simulate::run(&m, &cfg).map_err(|e| e.to_string())?;
        let exact = predicted_conditionals(&m).map_err(|e| e.to_string())?;
        let opts = EstimateOptions::default();
        let mut worst: f64 = 0.0;
        for pair in SettingPair::all() {
            for o in OutcomePair::ALL {
                let e = simulate::estimate(&t, pair, o, &opts).map_err(|e| e.to_string())?;
                let diff = (e.estimate - to_f64(exact.get(pair, o).unwrap())).abs();
                worst = worst.max(diff);
                ensure(diff <= MC_TOL, || format!("{} {} off by {diff}", pair.label(), o.label()))?;
            }
        }
        let bell = empirical_bell(&t, &opts).map_err(|e| e.to_string())?;
        ensure(bell.ci_low > 0.0, || format!("slack interval [{}, {}]", bell.ci_low, bell.ci_high))?;
        let again = simulate::run(&m, &cfg).map_err(|e| e.to_string())?;
        ensure(again == t, || "rerun differs".into())?;
        Ok(format!("max error {worst:.5}, slack ci=[{:.4}, {:.4}], rerun identical", bell.ci_low, bell.ci_high))
    })
}

fn c8_conspiracy() -> Verdict {
    let m = catalog::szabo_standin();
    let exact = check_no_cons(&m, ConjunctionSweep::Full);
    ensure(exact.single_literals_hold(), || "a single cause atom fails exactly".into())?;
    ensure(!exact.holds(), || "no conjunction fails exactly".into())?;
    let t = simulate::run(&m, &RunConfig::new(MC_TRIALS, SHIPPED_SEED)).map_err(|e| e.to_string())?;
    let emp = empirical_no_cons(&t, &EstimateOptions::default()).map_err(|e| e.to_string())?;
    let flagged = emp.flagged().count();
    ensure(flagged > 0, || "nothing flagged empirically".into())?;
    ensure(emp.single_literals_clear(), || "a single cause atom is flagged empirically".into())?;
    Ok(format!("{} exact violations, {flagged} flagged cells, all conjunctions", exact.violations.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("quantum identities", c1_quantum_identities),
        ("Wigner violation point", c2_scan),
        ("exact inequality values", c3_exact_triples),
        ("theorem as property", c4_theorem_as_property),
        ("feasibility certificates", c5_certificates),
        ("reduction soundness", c6_reduction),
        ("Monte Carlo convergence", c7_monte_carlo),
        ("conspiracy detection", c8_conspiracy),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {} {name}: {why}", n + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
