mod common;

use std::sync::Arc;

use common::*;
use paraverify_core::checker::*;
use paraverify_core::formula::{ConcreteInvariant, GroundFormula, Literal};
use paraverify_core::protocol::{concretize, concretize_relaxed, parse_protocol, Concretization};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mux_reachable_counts() {
    let s = spec("mux");
    let p2 = concretize(&s, &Concretization(vec![2])).unwrap();
    assert_eq!(reachable_states(&p2, DEFAULT_STATE_LIMIT).unwrap().len(), 8);
    let p1 = concretize_relaxed(&s, &Concretization(vec![1])).unwrap();
    let r1 = reachable_states(&p1, DEFAULT_STATE_LIMIT).unwrap();
    assert_eq!(r1.len(), 3);
    let expected = [
        state_of(&p1, &[("st", &[1], "Idle"), ("lock", &[], "false")]),
        state_of(&p1, &[("st", &[1], "Trying"), ("lock", &[], "false")]),
        state_of(&p1, &[("st", &[1], "Critical"), ("lock", &[], "true")]),
    ];
    for s in &expected {
        assert!(r1.contains(s));
    }
}

#[test]
fn no_rules_means_only_initial_states() {
    let s = parse_protocol("type T; var a : array[T] of boolean; init { } invariant t : true;").unwrap();
    let p = concretize(&s, &Concretization(vec![2])).unwrap();
    assert_eq!(p.init_states.len(), 4);
    assert_eq!(reachable_states(&p, 100).unwrap().len(), 4);
}

#[test]
fn state_limit_is_an_error_not_a_verdict() {
    let s = spec("mux");
    let p = concretize(&s, &Concretization(vec![3])).unwrap();
    let err = reachable_states(&p, 5).unwrap_err();
    assert!(err.is_resource());
    assert!(matches!(err, CheckError::StateLimit { limit: 5 }));
}

#[test]
fn invariant_examples() {
    let s = spec("mux");
    let p = concretize(&s, &Concretization(vec![2])).unwrap();
    let holds = clause(vec![lit(&p, "lock", &[], "false"), lit(&p, "st", &[2], "Critical")]);
    assert!(check_invariant(&p, &holds, DEFAULT_STATE_LIMIT).unwrap().holds());

    let bad = clause(vec![lit(&p, "st", &[2], "Critical")]);
    let r = check_invariant(&p, &bad, DEFAULT_STATE_LIMIT).unwrap();
    assert_eq!(r.verdict, Verdict::Violated);
    let w = r.witness.unwrap();
    assert_eq!(w, state_of(&p, &[("st", &[2], "Critical"), ("lock", &[], "true")]));

    let falsum = ConcreteInvariant::new(vec![]);
    let r = check_invariant(&p, &falsum, DEFAULT_STATE_LIMIT).unwrap();
    assert_eq!(r.witness.unwrap(), p.init_states[0]);
}

#[test]
fn inductive_examples() {
    let s = spec("mux");
    let p = concretize(&s, &Concretization(vec![2])).unwrap();
    let mutual12 = clause(vec![lit(&p, "st", &[1], "Critical"), lit(&p, "st", &[2], "Critical")]);
    let aux = |n: u8| clause(vec![lit(&p, "lock", &[], "false"), lit(&p, "st", &[n], "Critical")]);
    let full: Vec<GroundFormula> = vec![mutual12.clone().into(), mutual12.clone().into(), aux(1).into(), aux(2).into()];
    assert!(check_inductive(&p, &full, DEFAULT_STATE_LIMIT).unwrap().holds());

    let weak: Vec<GroundFormula> = vec![mutual12.clone().into()];
    let r = check_inductive(&p, &weak, DEFAULT_STATE_LIMIT).unwrap();
    assert!(!r.holds());
    let rule = r.rule.unwrap();
    assert!(rule.starts_with("crit("), "{rule}");
    let w = r.witness.unwrap();
    let crit_node: u8 = rule[5..6].parse().unwrap();
    let other = 3 - crit_node;
    assert_eq!(w[p.slot_of[&lit(&p, "st", &[crit_node], "Idle").var]], 1, "pre-state is Trying");
    assert_eq!(w[p.slot_of[&lit(&p, "st", &[other], "Idle").var]], 2, "other node is Critical");
    assert_eq!(w[p.slot_of[&lit(&p, "lock", &[], "false").var]], 0);

    assert!(check_inductive(&p, &[GroundFormula::truth()], DEFAULT_STATE_LIMIT).unwrap().holds());
}

#[test]
fn cache_counts_hits() {
    let s = spec("mux");
    let c = Checker::new(s.clone(), DEFAULT_STATE_LIMIT);
    let sizes = Concretization(vec![2]);
    let p = c.protocol(&sizes).unwrap();
    let inv = clause(vec![lit(&p, "st", &[2], "Critical"), lit(&p, "lock", &[], "false")]);
    let reordered = ConcreteInvariant::new(inv.lits.iter().rev().cloned().collect());
    let a = c.check(&sizes, &inv).unwrap();
    let b = c.check(&sizes, &reordered).unwrap();
    assert!(!a.stats.cache_hit);
    assert!(b.stats.cache_hit);
    assert_eq!(a.verdict, b.verdict);
    assert_eq!(c.query_counts(), (2, 1));
}

fn random_clause(p: &paraverify_core::protocol::ConcreteProtocol, rng: &mut ChaCha8Rng) -> ConcreteInvariant {
    let n = rng.gen_range(1..=3.min(p.vars.len()));
    let lits: Vec<Literal> = (0..n)
        .map(|_| {
            let s = rng.gen_range(0..p.vars.len());
            let d = &p.domains[s];
            Literal::new(p.vars[s].clone(), d[rng.gen_range(0..d.len())])
        })
        .collect();
    ConcreteInvariant::new(lits)
}

fn sizes_for(s: &paraverify_core::protocol::ProtocolSpec, seed: u64) -> Concretization {
    Concretization((0..s.param_types.len()).map(|t| 1 + ((seed >> (2 * t)) % 2) as u8).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn reachability_matches_naive_search(seed in any::<u64>()) {
        let s = parse_random(seed);
        let p = concretize_relaxed(&s, &sizes_for(&s, seed)).unwrap();
        prop_assume!(p.state_space() <= 100_000);
        let fast = reachable_states(&p, DEFAULT_STATE_LIMIT).unwrap();
        let slow = naive_reachable(&p);
        prop_assert_eq!(fast.len(), slow.len());
        prop_assert!(slow.iter().all(|s| fast.contains(s)));
    }

    #[test]
    fn invariant_verdicts_match_naive_search(seed in any::<u64>()) {
        let s = parse_random(seed);
        let p = concretize_relaxed(&s, &sizes_for(&s, seed)).unwrap();
        prop_assume!(p.state_space() <= 100_000 && !p.vars.is_empty());
        let slow = naive_reachable(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let inv = random_clause(&p, &mut rng);
            let r = check_invariant(&p, &inv, DEFAULT_STATE_LIMIT).unwrap();
            let expected = slow.iter().all(|st| eval_clause(&p, &inv, st));
            prop_assert_eq!(r.holds(), expected);
            if let Some(w) = r.witness {
                prop_assert!(slow.contains(&w) && !eval_clause(&p, &inv, &w));
            }
        }
    }

    #[test]
    fn inductive_verdicts_match_state_enumeration(seed in any::<u64>()) {
        let s = parse_random(seed);
        let p = concretize_relaxed(&s, &sizes_for(&s, seed)).unwrap();
        prop_assume!(p.state_space() <= 20_000 && !p.vars.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..6 {
            let k = rng.gen_range(1..=3);
            let fs: Vec<GroundFormula> = (0..k).map(|_| random_clause(&p, &mut rng).into()).collect();
            let r = check_inductive(&p, &fs, DEFAULT_STATE_LIMIT).unwrap();
            prop_assert_eq!(r.holds(), naive_inductive(&p, &fs));
            if r.holds() {
                // Inductive clauses are invariants.
                for f in &fs {
                    let GroundFormula::Clause(c) = f else { unreachable!() };
                    prop_assert!(check_invariant(&p, c, DEFAULT_STATE_LIMIT).unwrap().holds());
                }
            }
        }
    }

    #[test]
    fn cache_is_transparent(seed in any::<u64>()) {
        let s = parse_random(seed);
        let sizes = sizes_for(&s, seed);
        let warm = Checker::new(s.clone(), DEFAULT_STATE_LIMIT);
        let cold = Checker::new(Arc::clone(&s), DEFAULT_STATE_LIMIT).without_cache();
        let p = warm.protocol(&sizes).unwrap();
        prop_assume!(p.state_space() <= 100_000 && !p.vars.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let invs: Vec<ConcreteInvariant> = (0..8).map(|_| random_clause(&p, &mut rng)).collect();
        for round in 0..2 {
            for inv in &invs {
                let a = warm.check(&sizes, inv).unwrap();
                let b = cold.check(&sizes, inv).unwrap();
                prop_assert_eq!(a.verdict, b.verdict);
                prop_assert_eq!(&a.witness, &b.witness);
                if round == 1 {
                    prop_assert!(a.stats.cache_hit);
                }
            }
        }
        warm.cache().clear();
        for inv in &invs {
            prop_assert_eq!(warm.check(&sizes, inv).unwrap().verdict, cold.check(&sizes, inv).unwrap().verdict);
        }
    }
}
