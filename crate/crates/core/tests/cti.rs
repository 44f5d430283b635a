mod common;

use common::*;
use paraverify_core::cti::*;
use paraverify_core::formula::ConcreteInvariant;
use paraverify_core::protocol::{concretize, concretize_relaxed, Concretization, ConcreteProtocol};
use paraverify_core::symmetry::{forall_quant_info, get_symmetry_invs};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIMIT: u64 = 10_000_000;

fn rule_index(p: &ConcreteProtocol, label: &str) -> usize {
    p.rules.iter().position(|r| r.label() == label).unwrap_or_else(|| panic!("no rule {label}"))
}

fn mux3() -> ConcreteProtocol {
    concretize(&spec("mux"), &Concretization(vec![3])).unwrap()
}

fn mutual12(p: &ConcreteProtocol) -> ConcreteInvariant {
    clause(vec![lit(p, "st", &[1], "Critical"), lit(p, "st", &[2], "Critical")])
}

#[test]
fn crit_against_mutual() {
    let p = mux3();
    let inv = mutual12(&p);
    let o = build_ind_obligation(&p, rule_index(&p, "crit(1)"), &inv).unwrap().unwrap();
    let v = o.render(&p);
    assert_eq!(v.rule, "crit(1)");
    assert_eq!(v.guard, ["st[1] = Trying", "lock = false"]);
    assert_eq!(v.action, ["st[1]' = Critical", "lock' = true"]);
    assert_eq!(v.frame, ["st[2]' = st[2]"]);
    assert_eq!(v.neg_goal, ["st[1]' = Critical", "st[2]' = Critical"]);

    let sol = solve_obligation(&p, &o, &BlockedAssertionStore::new(), LIMIT).unwrap().unwrap();
    assert_eq!(sol.render(&p.spec), ["st[1] = Trying", "lock = false", "st[2] = Critical"]);
    let cand = candidate_invariant(&sol).unwrap();
    assert_eq!(cand.lits.len(), 3);

    let mut store = BlockedAssertionStore::new();
    store.insert(&clause(vec![lit(&p, "lock", &[], "false"), lit(&p, "st", &[2], "Critical")]));
    assert!(solve_obligation(&p, &o, &store, LIMIT).unwrap().is_none());
}

#[test]
fn hoare_filter_and_exit() {
    let p = mux3();
    let inv = mutual12(&p);
    assert!(build_ind_obligation(&p, rule_index(&p, "try(3)"), &inv).unwrap().is_none());
    let o = build_ind_obligation(&p, rule_index(&p, "exit(1)"), &inv).unwrap().unwrap();
    // Exiting never makes a node critical.
    assert!(solve_obligation(&p, &o, &BlockedAssertionStore::new(), LIMIT).unwrap().is_none());
}

#[test]
fn unknown_variable_is_reported() {
    let s = spec("mux");
    let p3 = mux3();
    let p2 = concretize(&s, &Concretization(vec![2])).unwrap();
    let inv = clause(vec![lit(&p3, "st", &[3], "Critical")]);
    let err = build_ind_obligation(&p2, 0, &inv).unwrap_err();
    assert_eq!(err, CtiError::UnknownVar("st[3]".into()));
}

#[test]
fn candidate_examples() {
    let p = mux3();
    let sol = EquationSet::new(vec![lit(&p, "st", &[2], "Critical"), lit(&p, "lock", &[], "false")]);
    let c = candidate_invariant(&sol).unwrap();
    assert_eq!(c.render(&p.spec), "!(lock = false & st[2] = Critical)");
    assert_eq!(candidate_invariant(&EquationSet::new(vec![])), Err(CtiError::EmptySolution));
}

#[test]
fn blocking_with_images() {
    let s = spec("mux");
    let p = mux3();
    let sizes = Concretization(vec![3]);
    let aux = clause(vec![lit(&p, "lock", &[], "false"), lit(&p, "st", &[1], "Critical")]);
    let images = get_symmetry_invs(&s, &aux, &forall_quant_info(&s), &sizes).unwrap();
    let mut store = BlockedAssertionStore::new();
    assert_eq!(block_assertion(&aux, &images, &mut store), 3);
    assert_eq!(block_assertion(&aux, &images, &mut store), 0);
    assert_eq!(store.len(), 3);
    for n in 1..=3 {
        assert!(store.contains(&clause(vec![lit(&p, "st", &[n], "Critical"), lit(&p, "lock", &[], "false")])));
    }

    let global = clause(vec![lit(&p, "lock", &[], "true")]);
    let images = get_symmetry_invs(&s, &global, &forall_quant_info(&s), &sizes).unwrap();
    assert!(images.is_empty());
    assert_eq!(block_assertion(&global, &images, &mut store), 1);
    assert_eq!(store.prefix(3).len(), 3);
    assert!(!store.prefix(3).contains(&global));
}

/// Pre-states satisfying the obligation and every blocked clause, by enumeration.
fn satisfying_states(p: &ConcreteProtocol, o: &IndObligation, store: &BlockedAssertionStore) -> Vec<Vec<u8>> {
    let r = &p.rules[o.rule];
    all_states(p)
        .into_iter()
        .filter(|s| r.enabled(s))
        .filter(|s| {
            let t = r.fire(s);
            o.neg_goal.iter().all(|(slot, v)| t[*slot] == *v)
        })
        .filter(|s| store.items().iter().all(|c| eval_clause(p, c, s)))
        .collect()
}

fn random_clause(p: &ConcreteProtocol, rng: &mut ChaCha8Rng) -> ConcreteInvariant {
    let n = rng.gen_range(1..=3.min(p.vars.len()));
    let lits = (0..n)
        .map(|_| {
            let s = rng.gen_range(0..p.vars.len());
            let d = &p.domains[s];
            paraverify_core::formula::Literal::new(p.vars[s].clone(), d[rng.gen_range(0..d.len())])
        })
        .collect();
    ConcreteInvariant::new(lits).canonical()
}

fn random_instance(seed: u64) -> Option<ConcreteProtocol> {
    let s = parse_random(seed);
    let sizes = Concretization((0..s.param_types.len()).map(|t| 1 + ((seed >> (2 * t)) % 2) as u8).collect());
    let p = concretize_relaxed(&s, &sizes).unwrap();
    (p.state_space() <= 20_000 && !p.vars.is_empty() && !p.rules.is_empty()).then_some(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn solver_agrees_with_enumeration(seed in any::<u64>()) {
        let Some(p) = random_instance(seed) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..6 {
            let inv = random_clause(&p, &mut rng);
            let rule = rng.gen_range(0..p.rules.len());
            let Some(o) = build_ind_obligation(&p, rule, &inv).unwrap() else { continue };
            let mut store = BlockedAssertionStore::new();
            for _ in 0..rng.gen_range(0..3) {
                store.insert(&random_clause(&p, &mut rng));
            }
            let models = satisfying_states(&p, &o, &store);
            let sol = solve_obligation(&p, &o, &store, LIMIT).unwrap();
            prop_assert_eq!(sol.is_some(), !models.is_empty());
            if let Some(sol) = sol {
                // The projection extends to at least one real model.
                let fits = |s: &Vec<u8>| sol.lits.iter().all(|l| s[p.slot_of[&l.var]] == l.value);
                prop_assert!(models.iter().any(fits));
                prop_assert_eq!(sol.lits.len(), obligation_slots(&p, &o).len());
            }
        }
    }

    #[test]
    fn skipped_pairs_preserve_the_invariant(seed in any::<u64>()) {
        let Some(p) = random_instance(seed) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let states = all_states(&p);
        for _ in 0..6 {
            let inv = random_clause(&p, &mut rng);
            let rule = rng.gen_range(0..p.rules.len());
            if build_ind_obligation(&p, rule, &inv).unwrap().is_none() {
                let r = &p.rules[rule];
                for s in states.iter().filter(|s| r.enabled(s)) {
                    let t = r.fire(s);
                    prop_assert_eq!(eval_clause(&p, &inv, s), eval_clause(&p, &inv, &t));
                }
            }
        }
    }

    #[test]
    fn blocking_only_removes_solutions(seed in any::<u64>()) {
        let Some(p) = random_instance(seed) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let inv = random_clause(&p, &mut rng);
        let rule = rng.gen_range(0..p.rules.len());
        let Some(o) = build_ind_obligation(&p, rule, &inv).unwrap() else { return Ok(()) };
        let mut store = BlockedAssertionStore::new();
        let mut prev = satisfying_states(&p, &o, &store);
        for _ in 0..4 {
            store.insert(&random_clause(&p, &mut rng));
            let now = satisfying_states(&p, &o, &store);
            prop_assert!(now.iter().all(|s| prev.contains(s)));
            if prev.is_empty() {
                prop_assert!(solve_obligation(&p, &o, &store, LIMIT).unwrap().is_none());
            }
            prev = now;
        }
    }
}
