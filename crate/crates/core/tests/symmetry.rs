mod common;

use std::collections::BTreeSet;

use common::*;
use paraverify_core::checker::{check_invariant, reachable_states, DEFAULT_STATE_LIMIT};
use paraverify_core::formula::{ConcreteInvariant, Literal};
use paraverify_core::protocol::{concretize, concretize_relaxed, Concretization, ConcreteProtocol};
use paraverify_core::symmetry::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mux3() -> ConcreteProtocol {
    concretize(&spec("mux"), &Concretization(vec![3])).unwrap()
}

#[test]
fn mux_orbits() {
    let p = mux3();
    let s = &p.spec;
    let sizes = Concretization(vec![3]);
    let q = forall_quant_info(s);

    let mutual = clause(vec![lit(&p, "st", &[1], "Critical"), lit(&p, "st", &[2], "Critical")]);
    let images: Vec<String> = get_symmetry_invs(s, &mutual, &q, &sizes).unwrap().iter().map(|i| i.render(s)).collect();
    assert_eq!(images, ["!(st[1] = Critical & st[3] = Critical)", "!(st[2] = Critical & st[3] = Critical)"]);

    let aux = clause(vec![lit(&p, "lock", &[], "false"), lit(&p, "st", &[2], "Critical")]);
    let images: Vec<String> = get_symmetry_invs(s, &aux, &q, &sizes).unwrap().iter().map(|i| i.render(s)).collect();
    assert_eq!(images, ["!(lock = false & st[1] = Critical)", "!(lock = false & st[3] = Critical)"]);

    let exists = [(0, QuantClass::Exists)].into_iter().collect();
    assert!(get_symmetry_invs(s, &aux, &exists, &sizes).unwrap().is_empty());
    assert!(matches!(
        get_symmetry_invs(s, &aux, &QuantInfo::new(), &sizes),
        Err(SymmetryError::Unclassified(t)) if t == "NODE"
    ));
}

#[test]
fn hybrid_keeps_existential_values_apart() {
    let p = mux3();
    let s = &p.spec;
    let sizes = Concretization(vec![3]);
    let mutual = clause(vec![lit(&p, "st", &[1], "Critical"), lit(&p, "st", &[2], "Critical")]);
    let q = [(0, QuantClass::Hybrid { exists_values: [1].into_iter().collect() })].into_iter().collect();
    let images: Vec<String> = get_symmetry_invs(s, &mutual, &q, &sizes).unwrap().iter().map(|i| i.render(s)).collect();
    assert_eq!(images, ["!(st[1] = Critical & st[3] = Critical)"]);
}

#[test]
fn provisional_classification() {
    let p = concretize(&spec("mux"), &Concretization(vec![2])).unwrap();
    let s = &p.spec;
    let sizes = Concretization(vec![2]);
    let one = clause(vec![lit(&p, "st", &[1], "Critical")]);
    let both = clause(vec![lit(&p, "st", &[1], "Critical"), lit(&p, "st", &[2], "Critical")]);
    assert_eq!(provisional_quant_info(s, &one, &sizes)[&0], QuantClass::Forall);
    assert_eq!(provisional_quant_info(s, &both, &sizes)[&0], QuantClass::Exists);
    let global = clause(vec![lit(&p, "lock", &[], "true")]);
    assert!(provisional_quant_info(s, &global, &sizes).is_empty());
}

#[test]
fn parameter_valued_variables_are_permuted() {
    let s = std::sync::Arc::new(
        paraverify_core::protocol::parse_protocol(
            "type NODE;\nvar owner : NODE;\nvar held : array[NODE] of boolean;\n\
             init { forall n : NODE . held[n] = false; }\n\
             rule take(i : NODE) guard true action owner := i;\ninvariant t : true;",
        )
        .unwrap(),
    );
    let sizes = Concretization(vec![2]);
    let p = concretize_relaxed(&s, &sizes).unwrap();
    let gv = p.vars.iter().find(|v| v.name == "owner").unwrap().clone();
    let t = 0;
    let inv = ConcreteInvariant::new(vec![Literal::new(gv, 1)]);
    let mut perm: Vec<Vec<u8>> = sizes.0.iter().map(|n| (1..=*n).collect()).collect();
    perm[t] = vec![2, 1];
    let image = apply_permutation(&s, &inv, &perm);
    assert_eq!(image.lits[0].value, 2);
    assert_eq!(apply_permutation(&s, &image, &perm), inv.canonical());
}

fn random_perm(sizes: &Concretization, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    sizes
        .0
        .iter()
        .map(|n| {
            let mut v: Vec<u8> = (1..=*n).collect();
            v.shuffle(rng);
            v
        })
        .collect()
}

fn random_clause(p: &ConcreteProtocol, rng: &mut ChaCha8Rng) -> ConcreteInvariant {
    let n = rng.gen_range(1..=3.min(p.vars.len()));
    let lits = (0..n)
        .map(|_| {
            let s = rng.gen_range(0..p.vars.len());
            let d = &p.domains[s];
            Literal::new(p.vars[s].clone(), d[rng.gen_range(0..d.len())])
        })
        .collect();
    ConcreteInvariant::new(lits).canonical()
}

fn factorial(n: u8) -> u64 {
    (1..=n as u64).product()
}

fn instance(seed: u64, max: u8) -> (std::sync::Arc<paraverify_core::ProtocolSpec>, Concretization, ConcreteProtocol) {
    let s = parse_random(seed);
    let sizes = Concretization((0..s.param_types.len()).map(|t| 1 + ((seed >> (2 * t)) % max as u64) as u8).collect());
    let p = concretize_relaxed(&s, &sizes).unwrap();
    (s, sizes, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn orbits_are_closed(seed in any::<u64>()) {
        let (s, sizes, p) = instance(seed, 3);
        prop_assume!(!p.vars.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inv = random_clause(&p, &mut rng);
        let q = forall_quant_info(&s);
        let orbit: BTreeSet<ConcreteInvariant> =
            get_symmetry_invs(&s, &inv, &q, &sizes).unwrap().into_iter().chain([inv.clone()]).collect();
        for _ in 0..10 {
            let perm = random_perm(&sizes, &mut rng);
            for member in &orbit {
                prop_assert!(orbit.contains(&apply_permutation(&s, member, &perm)));
            }
        }
        // Orbit size divides the group order.
        let group: u64 = sizes.0.iter().map(|n| factorial(*n)).product();
        prop_assert_eq!(group % orbit.len() as u64, 0);
    }

    #[test]
    fn verdicts_are_invariant_under_permutation(seed in any::<u64>()) {
        let (s, sizes, p) = instance(seed, 3);
        prop_assume!(p.state_space() <= 50_000 && !p.vars.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let reach = reachable_states(&p, DEFAULT_STATE_LIMIT).unwrap();
        let perm = random_perm(&sizes, &mut rng);
        for st in reach.iter() {
            prop_assert!(reach.contains(&permute_state(&s, &p.vars, &p.slot_of, st, &perm)));
        }
        for _ in 0..8 {
            let inv = random_clause(&p, &mut rng);
            let image = apply_permutation(&s, &inv, &perm);
            let a = check_invariant(&p, &inv, DEFAULT_STATE_LIMIT).unwrap().holds();
            let b = check_invariant(&p, &image, DEFAULT_STATE_LIMIT).unwrap().holds();
            prop_assert_eq!(a, b);
        }
    }
}
