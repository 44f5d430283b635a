//! Inductive proof obligations for (rule instance, invariant instance) pairs,
//! their finite-domain solver, candidate invariants and the blocking store.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Compiled, ConcreteInvariant, Literal};
use crate::protocol::{ConcreteProtocol, GLit, GVal, GroundRule};
use crate::search::{compile_glit, Search, SearchLimit};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CtiError {
    #[error("empty solution would denote the invariant `false`")]
    EmptySolution,
    #[error("invariant mentions `{0}`, which is not part of this instance")]
    UnknownVar(String),
}

/// `guard(R) & act(R') & frame(R, F) & !F'` for one ground rule and one
/// ground clause invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndObligation {
    /// Index into [`ConcreteProtocol::rules`].
    pub rule: usize,
    pub invariant: ConcreteInvariant,
    pub guard_part: Vec<GLit>,
    /// `slot' = value` for every assignment of the rule.
    pub action_part: Vec<(usize, GVal)>,
    /// Slots of the invariant the rule leaves unchanged: `slot' = slot`.
    pub frame_part: Vec<usize>,
    /// Post-state literals whose conjunction falsifies the invariant.
    pub neg_goal: Vec<(usize, u8)>,
}

/// Rendered view of an obligation for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligationView {
    pub rule: String,
    pub invariant: String,
    pub guard: Vec<String>,
    pub action: Vec<String>,
    pub frame: Vec<String>,
    pub neg_goal: Vec<String>,
}

fn render_gval(p: &ConcreteProtocol, v: GVal, sort_of: usize) -> String {
    match v {
        GVal::Slot(s) => p.vars[s].to_string(),
        GVal::Const(c) => p.spec.value_name(p.spec.vars[p.vars[sort_of].decl].sort, c),
    }
}

impl IndObligation {
    pub fn render(&self, p: &ConcreteProtocol) -> ObligationView {
        let guard = self
            .guard_part
            .iter()
            .map(|g| {
                let anchor = match (g.lhs, g.rhs) {
                    (GVal::Slot(s), _) | (_, GVal::Slot(s)) => Some(s),
                    _ => None,
                };
                let show = |v: GVal| match (v, anchor) {
                    (GVal::Const(c), None) => c.to_string(),
                    (v, Some(a)) => render_gval(p, v, a),
                    (GVal::Slot(s), None) => p.vars[s].to_string(),
                };
                format!("{} {} {}", show(g.lhs), if g.positive { "=" } else { "!=" }, show(g.rhs))
            })
            .collect();
        let action = self
            .action_part
            .iter()
            .map(|(s, v)| format!("{}' = {}", p.vars[*s], render_gval(p, *v, *s)))
            .collect();
        let frame = self.frame_part.iter().map(|s| format!("{0}' = {0}", p.vars[*s])).collect();
        let neg_goal = self
            .neg_goal
            .iter()
            .map(|(s, v)| format!("{}' = {}", p.vars[*s], render_gval(p, GVal::Const(*v), *s)))
            .collect();
        ObligationView {
            rule: p.rules[self.rule].label(),
            invariant: self.invariant.render(&p.spec),
            guard,
            action,
            frame,
            neg_goal,
        }
    }
}

/// Builds the obligation, or `None` when the rule assigns no variable of the
/// invariant (the invariant is then trivially preserved).
pub fn build_ind_obligation(
    p: &ConcreteProtocol,
    rule: usize,
    inv: &ConcreteInvariant,
) -> Result<Option<IndObligation>, CtiError> {
    let r: &GroundRule = &p.rules[rule];
    let mut inv_slots = Vec::new();
    let mut neg_goal = Vec::new();
    for l in &inv.lits {
        let s = p.slot(&l.var).ok_or_else(|| CtiError::UnknownVar(l.var.to_string()))?;
        if !inv_slots.contains(&s) {
            inv_slots.push(s);
        }
        neg_goal.push((s, l.value));
    }
    if !inv_slots.iter().any(|s| r.assigns_slot(*s).is_some()) {
        return Ok(None);
    }
    let frame_part = inv_slots.iter().copied().filter(|s| r.assigns_slot(*s).is_none()).collect();
    Ok(Some(IndObligation {
        rule,
        invariant: inv.clone(),
        guard_part: r.guard.clone(),
        action_part: r.assigns.clone(),
        frame_part,
        neg_goal,
    }))
}

/// Pre-state equalities of one obligation solution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EquationSet {
    pub lits: Vec<Literal>,
}

impl EquationSet {
    pub fn new(lits: Vec<Literal>) -> Self {
        EquationSet { lits }
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn render(&self, spec: &crate::protocol::ProtocolSpec) -> Vec<String> {
        self.lits.iter().map(|l| l.render(spec)).collect()
    }
}

/// Learned clause invariants asserted into every subsequent solve.
/// Insert-only; entries are kept canonical and unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockedAssertionStore {
    items: Vec<ConcreteInvariant>,
    index: HashSet<ConcreteInvariant>,
}

impl BlockedAssertionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one constraint; returns whether it was new.
    pub fn insert(&mut self, inv: &ConcreteInvariant) -> bool {
        let c = inv.canonical();
        if self.index.insert(c.clone()) {
            self.items.push(c);
            true
        } else {
            false
        }
    }

    pub fn contains(&self, inv: &ConcreteInvariant) -> bool {
        self.index.contains(&inv.canonical())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ConcreteInvariant] {
        &self.items
    }

    /// The store as it was after its first `len` insertions.
    pub fn prefix(&self, len: usize) -> BlockedAssertionStore {
        let items = self.items[..len.min(self.items.len())].to_vec();
        let index = items.iter().cloned().collect();
        BlockedAssertionStore { items, index }
    }
}

/// Adds `inv` and all of its symmetric images; returns how many were new.
pub fn block_assertion(
    inv: &ConcreteInvariant,
    symmetries: &[ConcreteInvariant],
    store: &mut BlockedAssertionStore,
) -> usize {
    std::iter::once(inv).chain(symmetries).filter(|i| store.insert(i)).count()
}

/// Pre-state constraints of the obligation: guard literals and the negated
/// goal pulled back through the action and frame.
pub fn obligation_constraints(p: &ConcreteProtocol, o: &IndObligation) -> Vec<Compiled> {
    let r = &p.rules[o.rule];
    let mut out: Vec<Compiled> = o.guard_part.iter().map(compile_glit).collect();
    for (s, v) in &o.neg_goal {
        out.push(match r.assigns_slot(*s) {
            Some(GVal::Const(c)) => Compiled::Const(c == *v),
            Some(GVal::Slot(t)) => Compiled::Cube(vec![(t, *v)]),
            None => Compiled::Cube(vec![(*s, *v)]),
        });
    }
    out
}

/// Slots mentioned by the obligation's constraints, in first-occurrence order.
pub fn obligation_slots(p: &ConcreteProtocol, o: &IndObligation) -> Vec<usize> {
    let mut order = Vec::new();
    for c in obligation_constraints(p, o) {
        let mut s = Vec::new();
        collect_ordered(&c, &mut s);
        for x in s {
            if !order.contains(&x) {
                order.push(x);
            }
        }
    }
    order
}

fn collect_ordered(c: &Compiled, out: &mut Vec<usize>) {
    match c {
        Compiled::Const(_) => {}
        Compiled::Clause(l) | Compiled::Cube(l) => out.extend(l.iter().map(|(s, _)| *s)),
        Compiled::SlotEq { a, b, .. } => out.extend([*a, *b]),
        Compiled::And(items) | Compiled::Or(items) => items.iter().for_each(|f| collect_ordered(f, out)),
    }
}

/// Finds the first pre-state valuation (slots in declaration order, values
/// in domain order) satisfying the obligation and every blocked constraint,
/// projected onto the obligation's variables in occurrence order.
pub fn solve_obligation(
    p: &ConcreteProtocol,
    o: &IndObligation,
    blocked: &BlockedAssertionStore,
    limit: u64,
) -> Result<Option<EquationSet>, SearchLimit> {
    let mut constraints = obligation_constraints(p, o);
    let occurrence = obligation_slots(p, o);
    let own: BTreeSet<usize> = occurrence.iter().copied().collect();
    let mut extra = BTreeSet::new();
    for inv in blocked.items() {
        // Constraints over variables absent from this instance cannot be asserted.
        let Ok(c) = Compiled::compile_clause(inv, &p.slot_of) else { continue };
        c.slots(&mut extra);
        constraints.push(c);
    }
    let order: Vec<usize> = own.iter().copied().chain(extra.into_iter().filter(|s| !own.contains(s))).collect();
    let Some(assign) = Search::new(&p.domains, order, constraints, limit).first()? else {
        return Ok(None);
    };
    let lits = occurrence
        .into_iter()
        .map(|s| Literal::new(p.vars[s].clone(), assign[s].expect("ordered slot is assigned")))
        .collect();
    Ok(Some(EquationSet::new(lits)))
}

/// `!(eq_1 & ... & eq_W)` in canonical literal order.
pub fn candidate_invariant(sol: &EquationSet) -> Result<ConcreteInvariant, CtiError> {
    if sol.is_empty() {
        return Err(CtiError::EmptySolution);
    }
    Ok(ConcreteInvariant::new(sol.lits.clone()).canonical())
}
