#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use paraverify_core::corpus;
use paraverify_core::formula::{ConcreteInvariant, GroundFormula, GroundVar, Literal};
use paraverify_core::protocol::{parse_protocol, ConcreteProtocol, ProtocolSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn spec(name: &str) -> Arc<ProtocolSpec> {
    Arc::new(corpus::lookup(name).expect("bundled").parse().expect("bundled protocol parses"))
}

pub fn lit(p: &ConcreteProtocol, var: &str, index: &[u8], value: &str) -> Literal {
    let spec = &p.spec;
    let decl = spec.var_id(var).expect("declared variable");
    let value = match value {
        "true" => 1,
        "false" => 0,
        other => match spec.enum_member(other) {
            Some(c) => c.encode(),
            None => other.parse().expect("enum member or parameter value"),
        },
    };
    Literal::new(GroundVar::new(spec, decl, index.to_vec()), value)
}

pub fn clause(lits: Vec<Literal>) -> ConcreteInvariant {
    ConcreteInvariant::new(lits).canonical()
}

/// Every total state of the instance, in lexicographic slot order.
pub fn all_states(p: &ConcreteProtocol) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for d in &p.domains {
        let mut next = Vec::with_capacity(out.len() * d.len());
        for s in &out {
            for v in d {
                let mut t: Vec<u8> = s.clone();
                t.push(*v);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Reachable states by depth-first search.
pub fn naive_reachable(p: &ConcreteProtocol) -> BTreeSet<Vec<u8>> {
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut stack: Vec<Vec<u8>> = p.init_states.clone();
    while let Some(s) = stack.pop() {
        if !seen.insert(s.clone()) {
            continue;
        }
        for r in &p.rules {
            let enabled = r.guard.iter().all(|g| g.holds(&s));
            if enabled {
                let mut t = s.clone();
                for (slot, v) in &r.assigns {
                    t[*slot] = match v {
                        paraverify_core::protocol::GVal::Const(c) => *c,
                        paraverify_core::protocol::GVal::Slot(x) => s[*x],
                    };
                }
                stack.push(t);
            }
        }
    }
    seen
}

pub fn eval_clause(p: &ConcreteProtocol, c: &ConcreteInvariant, s: &[u8]) -> bool {
    !c.lits.iter().all(|l| s[p.slot_of[&l.var]] == l.value)
}

pub fn eval_formula(p: &ConcreteProtocol, f: &GroundFormula, s: &[u8]) -> bool {
    match f {
        GroundFormula::Clause(c) => eval_clause(p, c, s),
        GroundFormula::And(v) => v.iter().all(|g| eval_formula(p, g, s)),
        GroundFormula::Or(v) => v.iter().any(|g| eval_formula(p, g, s)),
    }
}

pub fn successors(p: &ConcreteProtocol, s: &[u8]) -> Vec<Vec<u8>> {
    p.rules.iter().filter(|r| r.enabled(s)).map(|r| r.fire(s)).collect()
}

/// Inductiveness by enumerating every state of the instance.
pub fn naive_inductive(p: &ConcreteProtocol, fs: &[GroundFormula]) -> bool {
    let ok = |s: &[u8]| fs.iter().all(|f| eval_formula(p, f, s));
    if !p.init_states.iter().all(|s| ok(s)) {
        return false;
    }
    all_states(p).iter().filter(|s| ok(s)).all(|s| successors(p, s).iter().all(|t| ok(t)))
}

pub fn state_of(p: &ConcreteProtocol, assign: &[(&str, &[u8], &str)]) -> Vec<u8> {
    let mut s: Vec<u8> = p.domains.iter().map(|d| d[0]).collect();
    for (v, ix, val) in assign {
        let l = lit(p, v, ix, val);
        s[p.slot_of[&l.var]] = l.value;
    }
    s
}

pub fn slot_map(p: &ConcreteProtocol) -> &HashMap<GroundVar, usize> {
    &p.slot_of
}

/// A random well-formed protocol in the surface syntax.
pub fn random_protocol(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ntypes = rng.gen_range(1..=2);
    let types: Vec<String> = ["NODE", "CLIENT"][..ntypes].iter().map(|s| s.to_string()).collect();
    let nmembers = rng.gen_range(2..=3);
    let members: Vec<String> = (0..nmembers).map(|i| format!("M{i}")).collect();
    let mut out = String::new();
    for t in &types {
        out.push_str(&format!("type {t};\n"));
    }
    out.push_str(&format!("enum E {{ {} }};\n", members.join(", ")));

    // (name, index types, sort) where sort is "boolean", "E" or a type index.
    #[derive(Clone)]
    struct V {
        name: String,
        index: Vec<usize>,
        sort: String,
    }
    let nvars = rng.gen_range(2..=4);
    let mut vars = Vec::new();
    for i in 0..nvars {
        let dims = match rng.gen_range(0..10) {
            0..=3 => 0,
            4..=8 => 1,
            _ => 2,
        };
        let index: Vec<usize> = (0..dims).map(|_| rng.gen_range(0..ntypes)).collect();
        let sort = match rng.gen_range(0..5) {
            0 | 1 => "boolean".to_string(),
            2 | 3 => "E".to_string(),
            _ => types[rng.gen_range(0..ntypes)].clone(),
        };
        vars.push(V { name: format!("v{i}"), index, sort });
    }
    for v in &vars {
        let ty = if v.index.is_empty() {
            v.sort.clone()
        } else {
            let ix: Vec<String> = v.index.iter().map(|t| format!("[{}]", types[*t])).collect();
            format!("array{} of {}", ix.join(""), v.sort)
        };
        out.push_str(&format!("var {} : {};\n", v.name, ty));
    }

    let const_of = |rng: &mut ChaCha8Rng, sort: &str, binders: &[(String, usize)]| -> Option<String> {
        match sort {
            "boolean" => Some(if rng.gen() { "true".into() } else { "false".into() }),
            "E" => Some(members[rng.gen_range(0..members.len())].clone()),
            t => {
                let ty = types.iter().position(|x| x == t).expect("type");
                let cands: Vec<&(String, usize)> = binders.iter().filter(|(_, bt)| *bt == ty).collect();
                cands.choose(rng).map(|(n, _)| n.clone())
            }
        }
    };
    let term_of = |rng: &mut ChaCha8Rng, v: &V, binders: &[(String, usize)]| -> Option<String> {
        let mut s = v.name.clone();
        for t in &v.index {
            let cands: Vec<&(String, usize)> = binders.iter().filter(|(_, bt)| bt == t).collect();
            let (n, _) = cands.choose(rng)?;
            s.push_str(&format!("[{n}]"));
        }
        Some(s)
    };

    out.push_str("init {\n");
    for v in &vars {
        let binders: Vec<(String, usize)> =
            v.index.iter().enumerate().map(|(k, t)| (format!("x{k}"), *t)).collect();
        let term = term_of(&mut rng, v, &binders).expect("all indices bound");
        let Some(value) = const_of(&mut rng, &v.sort, &binders) else {
            continue;
        };
        if binders.is_empty() {
            out.push_str(&format!("  {term} = {value};\n"));
        } else {
            let bs: Vec<String> = binders.iter().map(|(n, t)| format!("{n} : {}", types[*t])).collect();
            out.push_str(&format!("  forall {} . {term} = {value};\n", bs.join(", ")));
        }
    }
    out.push_str("}\n");

    let binder_decl = |rng: &mut ChaCha8Rng, max: usize, prefix: &str| {
        let n = rng.gen_range(0..=max);
        let binders: Vec<(String, usize)> = (0..n).map(|k| (format!("{prefix}{k}"), rng.gen_range(0..ntypes))).collect();
        let mut distinct = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if binders[a].1 == binders[b].1 && rng.gen_bool(0.7) {
                    distinct.push(format!("{} != {}", binders[a].0, binders[b].0));
                }
            }
        }
        (binders, distinct)
    };
    let header = |name: &str, binders: &[(String, usize)], distinct: &[String]| {
        let mut s = name.to_string();
        if !binders.is_empty() {
            let bs: Vec<String> = binders.iter().map(|(n, t)| format!("{n} : {}", types[*t])).collect();
            s.push_str(&format!("({})", bs.join(", ")));
        }
        if !distinct.is_empty() {
            s.push_str(&format!(" where {}", distinct.join(" & ")));
        }
        s
    };

    let nrules = rng.gen_range(1..=4);
    for r in 0..nrules {
        let (binders, distinct) = binder_decl(&mut rng, 2, "i");
        let mut guard = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let v = vars.choose(&mut rng).expect("vars").clone();
            if let (Some(t), Some(c)) = (term_of(&mut rng, &v, &binders), const_of(&mut rng, &v.sort, &binders)) {
                let op = if rng.gen_bool(0.75) { "=" } else { "!=" };
                guard.push(format!("{t} {op} {c}"));
            }
        }
        let mut targets = BTreeSet::new();
        let mut action = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let v = vars.choose(&mut rng).expect("vars").clone();
            let Some(t) = term_of(&mut rng, &v, &binders) else { continue };
            if !targets.insert(t.clone()) {
                continue;
            }
            let same: Vec<&V> = vars.iter().filter(|w| w.sort == v.sort).collect();
            let value = if rng.gen_bool(0.25) {
                let w = same.choose(&mut rng).expect("v itself");
                term_of(&mut rng, w, &binders)
            } else {
                None
            };
            let Some(value) = value.or_else(|| const_of(&mut rng, &v.sort, &binders)) else {
                targets.remove(&t);
                continue;
            };
            action.push(format!("{t} := {value}"));
        }
        let guard = if guard.is_empty() { "true".to_string() } else { guard.join(" & ") };
        let action = if action.is_empty() { "skip".to_string() } else { action.join(", ") };
        out.push_str(&format!("rule {} guard {guard} action {action};\n", header(&format!("r{r}"), &binders, &distinct)));
    }

    let (binders, distinct) = binder_decl(&mut rng, 2, "p");
    let mut body = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let v = vars.choose(&mut rng).expect("vars").clone();
        if let (Some(t), Some(c)) = (term_of(&mut rng, &v, &binders), const_of(&mut rng, &v.sort, &binders)) {
            body.push(format!("{t} = {c}"));
        }
    }
    let body = if body.is_empty() { "true".to_string() } else { format!("!({})", body.join(" & ")) };
    out.push_str(&format!("invariant {} : {body};\n", header("prop", &binders, &distinct)));
    out
}

pub fn parse_random(seed: u64) -> Arc<ProtocolSpec> {
    let src = random_protocol(seed);
    Arc::new(parse_protocol(&src).unwrap_or_else(|e| panic!("generated protocol fails to parse: {e}\n{src}")))
}
