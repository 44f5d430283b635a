//! Minimum concretization and symmetry-reduced rule instance enumeration.

use std::collections::{BTreeSet, HashSet};

use super::ast::*;
use super::concretize::{binder_assignments, Concretization};

/// How one rule binder slot relates to the values of the invariant instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotPattern {
    /// Same value as the invariant's value `v`.
    Shared(u8),
    /// A value outside the invariant; fresh values are numbered by first occurrence.
    Fresh(u8),
}

/// Overlap pattern of a rule instance relative to fixed per-type value sets.
pub fn overlap_signature(binders: &[Binder], args: &[u8], fixed: &[BTreeSet<u8>]) -> Vec<SlotPattern> {
    let mut fresh: Vec<(TypeId, u8)> = Vec::new();
    binders
        .iter()
        .zip(args)
        .map(|(b, &v)| {
            if fixed[b.ty].contains(&v) {
                SlotPattern::Shared(v)
            } else {
                let k = match fresh.iter().position(|&(t, x)| t == b.ty && x == v) {
                    Some(k) => k,
                    None => {
                        fresh.push((b.ty, v));
                        fresh.len() - 1
                    }
                };
                SlotPattern::Fresh(k as u8)
            }
        })
        .collect()
}

/// One representative per overlap pattern: the lexicographically smallest
/// binder assignment realizing it. Output is in lexicographic order.
pub fn rule_representatives(rule: &Rule, sizes: &Concretization, fixed: &[BTreeSet<u8>]) -> Vec<Vec<u8>> {
    let mut seen = HashSet::new();
    binder_assignments(&rule.binders, &rule.distinct, sizes)
        .into_iter()
        .filter(|args| seen.insert(overlap_signature(&rule.binders, args, fixed)))
        .collect()
}

fn type_counts(binders: &[Binder], ntypes: usize) -> Vec<usize> {
    let mut out = vec![0; ntypes];
    for b in binders {
        out[b.ty] += 1;
    }
    out
}

/// Smallest instance size per type that realizes every overlap pattern
/// between the property's instance `[1..m]` and any rule instance: `m + k`
/// where `k` is the largest rule arity in that type (at least 1).
pub fn min_concretization(spec: &ProtocolSpec, prop: &SafetyProperty) -> Concretization {
    let ntypes = spec.param_types.len();
    let m = type_counts(&prop.binders, ntypes);
    let mut k = vec![0; ntypes];
    for r in &spec.rules {
        for (t, c) in type_counts(&r.binders, ntypes).into_iter().enumerate() {
            k[t] = k[t].max(c);
        }
    }
    Concretization((0..ntypes).map(|t| (m[t] + k[t]).max(1) as u8).collect())
}

/// Per-type maximum of [`min_concretization`] over all properties.
pub fn joint_min_concretization(spec: &ProtocolSpec) -> Concretization {
    let mut out = vec![1u8; spec.param_types.len()];
    for p in &spec.properties {
        for (t, n) in min_concretization(spec, p).0.into_iter().enumerate() {
            out[t] = out[t].max(n);
        }
    }
    Concretization(out)
}

/// The property's fixed instance: binders of each type numbered `1, 2, ...`
/// in declaration order.
pub fn fixed_property_instance(spec: &ProtocolSpec, prop: &SafetyProperty) -> Vec<u8> {
    let mut next = vec![0u8; spec.param_types.len()];
    prop.binders
        .iter()
        .map(|b| {
            next[b.ty] += 1;
            next[b.ty]
        })
        .collect()
}

/// Pairs of (property instance, rule instance): the property fixed at
/// `[1..m]`, the rule over `1..=n` reduced to one instance per overlap pattern.
pub fn enumerate_instance_pairs(
    spec: &ProtocolSpec,
    prop: &SafetyProperty,
    rule: &Rule,
    sizes: &Concretization,
) -> Vec<(Vec<u8>, Vec<u8>)> {
    let f_args = fixed_property_instance(spec, prop);
    let mut fixed = vec![BTreeSet::new(); spec.param_types.len()];
    for (b, v) in prop.binders.iter().zip(&f_args) {
        fixed[b.ty].insert(*v);
    }
    rule_representatives(rule, sizes, &fixed)
        .into_iter()
        .map(|r| (f_args.clone(), r))
        .collect()
}
