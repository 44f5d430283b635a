//! Bounded implication between quantified invariants and merging of
//! invariant sets.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{CheckError, Checker};
use crate::formula::{Compiled, GroundFormula};
use crate::param::{ParamInvariant, Quantifier};
use crate::protocol::{concretize_relaxed, Concretization, ConcretizeError, ProtocolSpec};
use crate::search::{Search, SearchLimit};

pub const DEFAULT_IMPLICATION_NODES: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum MergeError {
    #[error(transparent)]
    Search(#[from] SearchLimit),
    #[error(transparent)]
    Concretize(#[from] ConcretizeError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

impl MergeError {
    pub fn is_resource(&self) -> bool {
        match self {
            MergeError::Search(_) => true,
            MergeError::Check(e) => e.is_resource(),
            MergeError::Concretize(_) => false,
        }
    }
}

/// Size vectors with every entry in `lo[t]..=bound`, lexicographic.
pub fn size_vectors(lo: &[u8], bound: u8) -> Vec<Concretization> {
    if lo.iter().any(|l| *l > bound) {
        return vec![];
    }
    if lo.is_empty() {
        return vec![Concretization(vec![])];
    }
    lo.iter()
        .map(|l| *l..=bound)
        .multi_cartesian_product()
        .map(Concretization)
        .collect()
}

fn joint_min(spec: &ProtocolSpec, invs: &[&ParamInvariant]) -> Vec<u8> {
    let mut lo = vec![1u8; spec.param_types.len()];
    for inv in invs {
        for (t, m) in inv.min_sizes(spec).into_iter().enumerate() {
            lo[t] = lo[t].max(m);
        }
    }
    lo
}

/// Whether some state over the declared domains at `sizes` satisfies every
/// formula of `premises` and violates `goal`.
fn countermodel_exists(
    spec: &ProtocolSpec,
    sizes: &Concretization,
    premises: &[GroundFormula],
    goal: &GroundFormula,
    limit: u64,
) -> Result<bool, MergeError> {
    let p = concretize_relaxed(spec, sizes)?;
    let compile = |f: &GroundFormula| Compiled::compile(f, &p.slot_of).expect("expansion uses instance variables");
    let premises: Vec<Compiled> = premises.iter().flat_map(|f| f.clone().conjuncts()).map(|f| compile(&f)).collect();
    for part in goal.clone().conjuncts() {
        let neg = compile(&part).negate();
        let mut first = BTreeSet::new();
        neg.slots(&mut first);
        let mut rest = BTreeSet::new();
        premises.iter().for_each(|c| c.slots(&mut rest));
        let order: Vec<usize> = first.iter().copied().chain(rest.into_iter().filter(|s| !first.contains(s))).collect();
        let mut constraints = vec![neg];
        constraints.extend(premises.iter().cloned());
        if Search::new(&p.domains, order, constraints, limit).first()?.is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Bounded implication: the conjunction of `phis` implies `psi` on every
/// instance with sizes up to `bound` (and at least the binder minimum).
pub fn implies_all(
    spec: &ProtocolSpec,
    phis: &[&ParamInvariant],
    psi: &ParamInvariant,
    bound: u8,
) -> Result<bool, MergeError> {
    let mut all: Vec<&ParamInvariant> = phis.to_vec();
    all.push(psi);
    for sizes in size_vectors(&joint_min(spec, &all), bound) {
        let premises: Vec<GroundFormula> = phis.iter().map(|f| f.expand(spec, &sizes)).collect();
        let goal = psi.expand(spec, &sizes);
        if countermodel_exists(spec, &sizes, &premises, &goal, DEFAULT_IMPLICATION_NODES)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn implies_semantically(
    spec: &ProtocolSpec,
    phi: &ParamInvariant,
    psi: &ParamInvariant,
    bound: u8,
) -> Result<bool, MergeError> {
    implies_all(spec, &[phi], psi, bound)
}

/// Both sets imply every member of the other, up to `bound`.
pub fn sets_equivalent(
    spec: &ProtocolSpec,
    a: &[ParamInvariant],
    b: &[ParamInvariant],
    bound: u8,
) -> Result<bool, MergeError> {
    let ra: Vec<&ParamInvariant> = a.iter().collect();
    let rb: Vec<&ParamInvariant> = b.iter().collect();
    for psi in b {
        if !implies_all(spec, &ra, psi, bound)? {
            return Ok(false);
        }
    }
    for psi in a {
        if !implies_all(spec, &rb, psi, bound)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeOptions {
    pub bound: u8,
    /// Try to fuse pairs with shared existential witnesses.
    pub strengthen: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct MergeStats {
    pub input: usize,
    pub duplicates: usize,
    pub implied: usize,
    pub strengthened: usize,
    pub output: usize,
}

/// Dedup, drop members implied by another kept member, then optionally
/// fuse existential pairs. Safety properties are never dropped.
pub fn merge_invariants(
    spec: &ProtocolSpec,
    invs: &[ParamInvariant],
    opts: MergeOptions,
    reference: &[Concretization],
    checker: &Checker,
) -> Result<(Vec<ParamInvariant>, MergeStats), MergeError> {
    let mut stats = MergeStats { input: invs.len(), ..Default::default() };
    let mut seen = BTreeSet::new();
    let mut set: Vec<ParamInvariant> = Vec::new();
    for inv in invs {
        let c = inv.canonical(spec);
        let key = c.render(spec);
        if seen.insert(key) {
            set.push(c);
        } else if let Some(existing) = set.iter_mut().find(|e| e.render(spec) == c.render(spec)) {
            if inv.is_safety() && !existing.is_safety() {
                existing.origin = inv.origin.clone();
            }
            stats.duplicates += 1;
        } else {
            stats.duplicates += 1;
        }
    }

    let mut kept = vec![true; set.len()];
    for i in 0..set.len() {
        if set[i].is_safety() {
            continue;
        }
        for k in 0..set.len() {
            if k != i && kept[k] && implies_semantically(spec, &set[k], &set[i], opts.bound)? {
                kept[i] = false;
                stats.implied += 1;
                break;
            }
        }
    }
    let mut set: Vec<ParamInvariant> = set.into_iter().zip(kept).filter(|(_, k)| *k).map(|(s, _)| s).collect();

    if opts.strengthen {
        stats.strengthened = strengthen(spec, &mut set, opts.bound, reference, checker)?;
    }
    stats.output = set.len();
    Ok((set, stats))
}

fn skeleton(inv: &ParamInvariant) -> Vec<(usize, Quantifier)> {
    inv.binders.iter().map(|b| (b.ty, b.quant)).collect()
}

/// Fuses pairs with identical binder skeletons and existential binders into
/// one invariant sharing the witnesses, when strictly stronger and still
/// true at the reference sizes.
fn strengthen(
    spec: &ProtocolSpec,
    set: &mut Vec<ParamInvariant>,
    bound: u8,
    reference: &[Concretization],
    checker: &Checker,
) -> Result<usize, MergeError> {
    let mut fused = 0;
    let mut i = 0;
    while i < set.len() {
        let mut j = i + 1;
        let mut merged = false;
        while j < set.len() {
            let (a, b) = (&set[i], &set[j]);
            if a.has_exists() && skeleton(a) == skeleton(b) && a.distinct == b.distinct && !a.is_safety() && !b.is_safety()
            {
                let mut cand = a.clone();
                cand.body.extend(b.body.iter().cloned());
                let cand = cand.canonical(spec);
                let stronger = implies_all(spec, &[&cand], a, bound)? && implies_all(spec, &[&cand], b, bound)?;
                let strict = !implies_all(spec, &[a, b], &cand, bound)?;
                let mut holds = stronger && strict;
                for sizes in reference {
                    if !holds {
                        break;
                    }
                    holds = checker.check_formula(sizes, &cand.expand(spec, sizes))?.holds();
                }
                if holds {
                    set[i] = cand;
                    set.remove(j);
                    fused += 1;
                    merged = true;
                    continue;
                }
            }
            j += 1;
        }
        if !merged {
            i += 1;
        }
    }
    Ok(fused)
}
