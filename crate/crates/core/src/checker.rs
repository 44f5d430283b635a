//! Explicit-state reachability, invariant checking and consecution checking
//! on concrete instances, plus a shared verdict cache.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Compiled, ConcreteInvariant, GroundFormula, SlotOrConst, UnknownVar};
use crate::protocol::{concretize_relaxed, ConcreteProtocol, ConcretizeError, Concretization, GVal, ProtocolSpec};
use crate::search::{compile_glit, Search, SearchLimit};

pub const DEFAULT_STATE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("state limit of {limit} exceeded")]
    StateLimit { limit: usize },
    #[error(transparent)]
    Search(#[from] SearchLimit),
    #[error(transparent)]
    UnknownVar(#[from] UnknownVar),
    #[error(transparent)]
    Concretize(#[from] ConcretizeError),
}

impl CheckError {
    /// Whether this is a resource exhaustion rather than a malformed query.
    pub fn is_resource(&self) -> bool {
        matches!(self, CheckError::StateLimit { .. } | CheckError::Search(_))
    }
}

/// Reachable states of one instance, sorted in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet {
    states: Vec<Vec<u8>>,
}

impl StateSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: &[u8]) -> bool {
        self.states.binary_search_by(|x| x.as_slice().cmp(s)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.states.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckStats {
    pub states_visited: usize,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub verdict: Verdict,
    /// Violating state (or consecution pre-state); present iff violated.
    pub witness: Option<Vec<u8>>,
    /// For consecution failures: the ground rule leading out of the invariant.
    pub rule: Option<String>,
    pub stats: CheckStats,
}

impl CheckResult {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    fn ok(states_visited: usize) -> Self {
        CheckResult {
            verdict: Verdict::Holds,
            witness: None,
            rule: None,
            stats: CheckStats { states_visited, cache_hit: false },
        }
    }

    fn violated(witness: Vec<u8>, rule: Option<String>, states_visited: usize) -> Self {
        CheckResult {
            verdict: Verdict::Violated,
            witness: Some(witness),
            rule,
            stats: CheckStats { states_visited, cache_hit: false },
        }
    }
}

/// Breadth-first fixed point from the initial states.
pub fn reachable_states(p: &ConcreteProtocol, limit: usize) -> Result<StateSet, CheckError> {
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut frontier: Vec<Vec<u8>> = Vec::new();
    let mut inits = p.init_states.clone();
    inits.sort();
    for s in inits {
        if seen.insert(s.clone()) {
            frontier.push(s);
        }
    }
    if seen.len() > limit {
        return Err(CheckError::StateLimit { limit });
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for s in &frontier {
            for r in &p.rules {
                if r.enabled(s) {
                    let t = r.fire(s);
                    if !seen.contains(&t) {
                        seen.insert(t.clone());
                        if seen.len() > limit {
                            return Err(CheckError::StateLimit { limit });
                        }
                        next.push(t);
                    }
                }
            }
        }
        frontier = next;
    }
    let mut states: Vec<Vec<u8>> = seen.into_iter().collect();
    states.sort();
    Ok(StateSet { states })
}

/// First violating state: an initial one if any, else the canonically
/// smallest reachable one.
fn find_violation(p: &ConcreteProtocol, reach: &StateSet, f: &Compiled) -> CheckResult {
    let mut inits = p.init_states.clone();
    inits.sort();
    if let Some(s) = inits.into_iter().find(|s| !f.eval(s)) {
        return CheckResult::violated(s, None, reach.len());
    }
    match reach.iter().find(|s| !f.eval(s)) {
        Some(s) => CheckResult::violated(s.clone(), None, reach.len()),
        None => CheckResult::ok(reach.len()),
    }
}

pub fn check_formula_on(p: &ConcreteProtocol, reach: &StateSet, f: &GroundFormula) -> Result<CheckResult, CheckError> {
    let c = Compiled::compile(f, &p.slot_of)?;
    Ok(find_violation(p, reach, &c))
}

/// Checks a clause invariant against all reachable states, without caching.
pub fn check_invariant(p: &ConcreteProtocol, inv: &ConcreteInvariant, limit: usize) -> Result<CheckResult, CheckError> {
    let reach = reachable_states(p, limit)?;
    check_formula_on(p, &reach, &GroundFormula::Clause(inv.clone()))
}

/// Checks that `invs` hold initially and are preserved by every ground rule
/// from every state satisfying them, reachable or not.
///
/// Consecution is decided per (rule, conjunct) by a finite-domain search for
/// a pre-state satisfying all conjuncts and the guard whose successor
/// falsifies the conjunct; rules that assign none of the conjunct's
/// variables are skipped. Rules are tried in declaration order.
pub fn check_inductive(p: &ConcreteProtocol, invs: &[GroundFormula], limit: usize) -> Result<CheckResult, CheckError> {
    let conjuncts: Vec<Compiled> = invs
        .iter()
        .cloned()
        .flat_map(|f| f.conjuncts())
        .map(|f| Compiled::compile(&f, &p.slot_of))
        .collect::<Result<_, _>>()?;
    let mut inits = p.init_states.clone();
    inits.sort();
    for s in &inits {
        if !conjuncts.iter().all(|c| c.eval(s)) {
            return Ok(CheckResult::violated(s.clone(), None, inits.len()));
        }
    }
    let conj_slots: Vec<BTreeSet<usize>> = conjuncts
        .iter()
        .map(|c| {
            let mut s = BTreeSet::new();
            c.slots(&mut s);
            s
        })
        .collect();
    let mut nodes = 0u64;
    for r in &p.rules {
        let guard: Vec<Compiled> = r.guard.iter().map(compile_glit).collect();
        for (ci, c) in conjuncts.iter().enumerate() {
            if !conj_slots[ci].iter().any(|s| r.assigns_slot(*s).is_some()) {
                continue;
            }
            let post = c.substitute(&|s| match r.assigns_slot(s) {
                Some(GVal::Const(v)) => SlotOrConst::Const(v),
                Some(GVal::Slot(t)) => SlotOrConst::Slot(t),
                None => SlotOrConst::Slot(s),
            });
            let goal = post.negate();
            let mut constraints = guard.clone();
            constraints.push(goal);
            constraints.extend(conjuncts.iter().cloned());
            let mut first: Vec<usize> = Vec::new();
            let mut seen = BTreeSet::new();
            for k in constraints.iter().take(guard.len() + 1) {
                let mut s = BTreeSet::new();
                k.slots(&mut s);
                for x in s {
                    if seen.insert(x) {
                        first.push(x);
                    }
                }
            }
            let mut rest = BTreeSet::new();
            for k in &conj_slots {
                rest.extend(k.iter().copied());
            }
            first.extend(rest.into_iter().filter(|x| !seen.contains(x)));
            let remaining = (limit as u64).saturating_sub(nodes).max(1);
            let mut search = Search::new(&p.domains, first, constraints, remaining);
            let found = search.first()?;
            nodes += search.nodes;
            if let Some(assign) = found {
                let witness: Vec<u8> = assign
                    .iter()
                    .enumerate()
                    .map(|(s, v)| v.unwrap_or(p.domains[s][0]))
                    .collect();
                return Ok(CheckResult::violated(witness, Some(r.label()), nodes as usize));
            }
        }
    }
    Ok(CheckResult::ok(nodes as usize))
}

struct Instance {
    protocol: Arc<ConcreteProtocol>,
    reach: Arc<StateSet>,
}

/// Verdict cache keyed by (instance sizes, canonical invariant).
#[derive(Default)]
pub struct CheckerCache {
    map: RwLock<HashMap<(Concretization, ConcreteInvariant), CheckResult>>,
}

impl CheckerCache {
    pub fn get(&self, sizes: &Concretization, inv: &ConcreteInvariant) -> Option<CheckResult> {
        self.map.read().get(&(sizes.clone(), inv.clone())).cloned()
    }

    /// Inserts unless present; existing verdicts are never replaced.
    pub fn insert(&self, sizes: Concretization, inv: ConcreteInvariant, r: CheckResult) {
        self.map.write().entry((sizes, inv)).or_insert(r);
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().clear();
    }
}

/// Invariant checker over the instances of one protocol. Instances and
/// their reachable sets are built on demand and shared.
pub struct Checker {
    spec: Arc<ProtocolSpec>,
    state_limit: usize,
    instances: RwLock<HashMap<Concretization, Arc<Instance>>>,
    cache: CheckerCache,
    use_cache: bool,
    queries: AtomicU64,
    hits: AtomicU64,
}

impl Checker {
    pub fn new(spec: Arc<ProtocolSpec>, state_limit: usize) -> Self {
        Checker {
            spec,
            state_limit,
            instances: RwLock::new(HashMap::new()),
            cache: CheckerCache::default(),
            use_cache: true,
            queries: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    pub fn without_cache(mut self) -> Self {
        self.use_cache = false;
        self
    }

    pub fn spec(&self) -> &Arc<ProtocolSpec> {
        &self.spec
    }

    pub fn state_limit(&self) -> usize {
        self.state_limit
    }

    pub fn cache(&self) -> &CheckerCache {
        &self.cache
    }

    fn instance(&self, sizes: &Concretization) -> Result<Arc<Instance>, CheckError> {
        if let Some(i) = self.instances.read().get(sizes) {
            return Ok(i.clone());
        }
        let protocol = Arc::new(concretize_relaxed(&self.spec, sizes)?);
        let reach = Arc::new(reachable_states(&protocol, self.state_limit)?);
        let inst = Arc::new(Instance { protocol, reach });
        self.instances.write().entry(sizes.clone()).or_insert(inst.clone());
        Ok(inst)
    }

    pub fn protocol(&self, sizes: &Concretization) -> Result<Arc<ConcreteProtocol>, CheckError> {
        Ok(self.instance(sizes)?.protocol.clone())
    }

    pub fn reachable(&self, sizes: &Concretization) -> Result<Arc<StateSet>, CheckError> {
        Ok(self.instance(sizes)?.reach.clone())
    }

    /// Cached reachability check of a clause invariant.
    pub fn check(&self, sizes: &Concretization, inv: &ConcreteInvariant) -> Result<CheckResult, CheckError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let key = inv.canonical();
        if self.use_cache {
            if let Some(mut r) = self.cache.get(sizes, &key) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                r.stats.cache_hit = true;
                return Ok(r);
            }
        }
        let inst = self.instance(sizes)?;
        let r = check_formula_on(&inst.protocol, &inst.reach, &GroundFormula::Clause(key.clone()))?;
        if self.use_cache {
            self.cache.insert(sizes.clone(), key, r.clone());
        }
        Ok(r)
    }

    /// Uncached reachability check of an arbitrary ground formula.
    pub fn check_formula(&self, sizes: &Concretization, f: &GroundFormula) -> Result<CheckResult, CheckError> {
        let inst = self.instance(sizes)?;
        check_formula_on(&inst.protocol, &inst.reach, f)
    }

    /// Total `check` calls and how many were answered from the cache.
    pub fn query_counts(&self) -> (u64, u64) {
        (self.queries.load(Ordering::Relaxed), self.hits.load(Ordering::Relaxed))
    }
}
