//! Shrinking solver solutions to minimal auxiliary invariants.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::checker::{CheckError, Checker};
use crate::cti::EquationSet;
use crate::formula::{ConcreteInvariant, Literal};
use crate::protocol::Concretization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Increasing,
    #[default]
    Decreasing,
}

/// Known invariants and search configuration for one generalization.
#[derive(Debug, Clone)]
pub struct GeneralizeContext {
    pub known: Vec<ConcreteInvariant>,
    /// Union of the literals of the known invariants.
    pub eq1: BTreeSet<Literal>,
    pub strategy: Strategy,
    pub heuristic: bool,
    /// Reference instance for checker calls.
    pub sizes: Concretization,
}

impl GeneralizeContext {
    pub fn new(known: Vec<ConcreteInvariant>, strategy: Strategy, heuristic: bool, sizes: Concretization) -> Self {
        let eq1 = known.iter().flat_map(|k| k.lits.iter().cloned()).collect();
        GeneralizeContext { known, eq1, strategy, heuristic, sizes }
    }

    pub fn add_known(&mut self, inv: ConcreteInvariant) {
        self.eq1.extend(inv.lits.iter().cloned());
        self.known.push(inv);
    }

    /// Nonempty and not already known (up to literal order).
    pub fn is_legal(&self, inv: &ConcreteInvariant) -> bool {
        let c = inv.canonical();
        !c.lits.is_empty() && self.known.iter().all(|k| k.canonical() != c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeCall {
    pub lits: Vec<Literal>,
    pub pass: bool,
    pub cache_hit: bool,
}

/// Counts and records checker calls made on behalf of one generalization.
pub struct Probe<'a> {
    checker: &'a Checker,
    sizes: Concretization,
    pub trace: Vec<ProbeCall>,
}

impl<'a> Probe<'a> {
    pub fn new(checker: &'a Checker, sizes: Concretization) -> Self {
        Probe { checker, sizes, trace: Vec::new() }
    }

    /// Whether `!(lits)` is an invariant of the reference instance.
    pub fn test(&mut self, lits: &[Literal]) -> Result<bool, CheckError> {
        let r = self.checker.check(&self.sizes, &ConcreteInvariant::new(lits.to_vec()))?;
        let pass = r.holds();
        self.trace.push(ProbeCall { lits: lits.to_vec(), pass, cache_hit: r.stats.cache_hit });
        Ok(pass)
    }

    pub fn calls(&self) -> usize {
        self.trace.len()
    }

    pub fn cache_hits(&self) -> usize {
        self.trace.iter().filter(|c| c.cache_hit).count()
    }
}

fn sublists(lits: &[Literal], n: usize) -> impl Iterator<Item = Vec<Literal>> + '_ {
    (0..lits.len()).combinations(n).map(move |ix| ix.into_iter().map(|i| lits[i].clone()).collect())
}

fn finish(lits: Vec<Literal>) -> ConcreteInvariant {
    ConcreteInvariant::new(lits).canonical()
}

/// Splits `sol` into literals occurring in the known invariants and the rest.
pub fn compute_join_diff(sol: &EquationSet, ctx: &GeneralizeContext) -> (EquationSet, EquationSet) {
    let (join, diff): (Vec<Literal>, Vec<Literal>) = sol.lits.iter().cloned().partition(|l| ctx.eq1.contains(l));
    (EquationSet::new(join), EquationSet::new(diff))
}

fn decreasing_known(lits: Vec<Literal>, probe: &mut Probe) -> Result<Vec<Literal>, CheckError> {
    if lits.len() <= 1 {
        return Ok(lits);
    }
    for sub in sublists(&lits, lits.len() - 1) {
        if probe.test(&sub)? {
            return decreasing_known(sub, probe);
        }
    }
    Ok(lits)
}

fn increasing_known(lits: Vec<Literal>, probe: &mut Probe) -> Result<Vec<Literal>, CheckError> {
    for n in 1..lits.len() {
        for sub in sublists(&lits, n) {
            if probe.test(&sub)? {
                return Ok(sub);
            }
        }
    }
    Ok(lits)
}

/// Checks the full solution, then descends into the first passing sublist
/// one literal shorter until none passes.
pub fn simplify_decreasing(sol: &EquationSet, probe: &mut Probe) -> Result<Option<ConcreteInvariant>, CheckError> {
    if sol.is_empty() || !probe.test(&sol.lits)? {
        return Ok(None);
    }
    Ok(Some(finish(decreasing_known(sol.lits.clone(), probe)?)))
}

/// First passing sublist by ascending length, lexicographic within a length.
pub fn simplify_increasing(sol: &EquationSet, probe: &mut Probe) -> Result<Option<ConcreteInvariant>, CheckError> {
    for n in 1..=sol.len() {
        for sub in sublists(&sol.lits, n) {
            if probe.test(&sub)? {
                return Ok(Some(finish(sub)));
            }
        }
    }
    Ok(None)
}

pub fn simplify(sol: &EquationSet, strategy: Strategy, probe: &mut Probe) -> Result<Option<ConcreteInvariant>, CheckError> {
    match strategy {
        Strategy::Increasing => simplify_increasing(sol, probe),
        Strategy::Decreasing => simplify_decreasing(sol, probe),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneralizePath {
    /// Join/diff search succeeded.
    Heuristic,
    /// Join/diff search was attempted and failed; plain strategy used.
    Fallback,
    /// Plain strategy only.
    Regular,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralizeOutcome {
    pub invariant: Option<ConcreteInvariant>,
    pub path: GeneralizePath,
    pub calls: usize,
    pub cache_hits: usize,
}

/// Join/diff search with fallback to the configured strategy.
pub fn heuristic_generalize(
    sol: &EquationSet,
    ctx: &GeneralizeContext,
    probe: &mut Probe,
) -> Result<(Option<ConcreteInvariant>, GeneralizePath), CheckError> {
    let (join, diff) = compute_join_diff(sol, ctx);
    if !join.is_empty() {
        for n in 1..=diff.len() {
            for sub in sublists(&diff.lits, n) {
                let cand: Vec<Literal> =
                    sol.lits.iter().filter(|l| join.lits.contains(l) || sub.contains(l)).cloned().collect();
                if probe.test(&cand)? {
                    let stripped = match ctx.strategy {
                        Strategy::Decreasing => decreasing_known(cand, probe)?,
                        Strategy::Increasing => increasing_known(cand, probe)?,
                    };
                    return Ok((Some(finish(stripped)), GeneralizePath::Heuristic));
                }
            }
        }
        return Ok((simplify(sol, ctx.strategy, probe)?, GeneralizePath::Fallback));
    }
    Ok((simplify(sol, ctx.strategy, probe)?, GeneralizePath::Regular))
}

/// Generalizes `sol` per the context and drops illegal results.
pub fn generalize(sol: &EquationSet, ctx: &GeneralizeContext, checker: &Checker) -> Result<GeneralizeOutcome, CheckError> {
    let mut probe = Probe::new(checker, ctx.sizes.clone());
    let (inv, path) = if ctx.heuristic {
        heuristic_generalize(sol, ctx, &mut probe)?
    } else {
        (simplify(sol, ctx.strategy, &mut probe)?, GeneralizePath::Regular)
    };
    let invariant = inv.filter(|i| ctx.is_legal(i));
    Ok(GeneralizeOutcome { invariant, path, calls: probe.calls(), cache_hits: probe.cache_hits() })
}
