//! Depth-first search for a satisfying assignment over finite domains.
//!
//! Slots are assigned in a caller-given order with values in domain order,
//! so the first solution found is deterministic. Each constraint is
//! re-evaluated (three-valued) whenever one of its slots is assigned.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::formula::{Compiled, Tri};
use crate::protocol::{GLit, GVal};

#[derive(Debug, Clone, Copy, Error, PartialEq, Eq)]
#[error("search exceeded {limit} nodes")]
pub struct SearchLimit {
    pub limit: u64,
}

const UNSET: u8 = u8::MAX;

pub struct Search<'a> {
    domains: &'a [Vec<u8>],
    order: Vec<usize>,
    constraints: Vec<Compiled>,
    /// `watch[slot]` lists constraints mentioning `slot`.
    watch: Vec<Vec<usize>>,
    limit: u64,
    pub nodes: u64,
}

impl<'a> Search<'a> {
    /// `order` must cover every slot mentioned by `constraints`.
    pub fn new(domains: &'a [Vec<u8>], order: Vec<usize>, constraints: Vec<Compiled>, limit: u64) -> Self {
        let mut watch = vec![Vec::new(); domains.len()];
        for (i, c) in constraints.iter().enumerate() {
            let mut slots = BTreeSet::new();
            c.slots(&mut slots);
            for s in slots {
                watch[s].push(i);
            }
        }
        Search { domains, order, constraints, watch, limit, nodes: 0 }
    }

    /// First satisfying assignment; slots outside `order` stay `None`.
    pub fn first(&mut self) -> Result<Option<Vec<Option<u8>>>, SearchLimit> {
        for c in &self.constraints {
            let mut slots = BTreeSet::new();
            c.slots(&mut slots);
            if slots.is_empty() && !c.eval(&[]) {
                return Ok(None);
            }
        }
        let mut assign = vec![UNSET; self.domains.len()];
        if self.dfs(0, &mut assign)? {
            Ok(Some(assign.into_iter().map(|v| (v != UNSET).then_some(v)).collect()))
        } else {
            Ok(None)
        }
    }

    fn dfs(&mut self, depth: usize, assign: &mut Vec<u8>) -> Result<bool, SearchLimit> {
        if depth == self.order.len() {
            return Ok(true);
        }
        let slot = self.order[depth];
        for vi in 0..self.domains[slot].len() {
            self.nodes += 1;
            if self.nodes > self.limit {
                return Err(SearchLimit { limit: self.limit });
            }
            assign[slot] = self.domains[slot][vi];
            let ok = {
                let view = |s: usize| {
                    let v = assign[s];
                    (v != UNSET).then_some(v)
                };
                self.watch[slot]
                    .iter()
                    .all(|&c| self.constraints[c].eval3(&view) != Tri::False)
            };
            if ok && self.dfs(depth + 1, assign)? {
                return Ok(true);
            }
        }
        assign[slot] = UNSET;
        Ok(false)
    }
}

/// Compiles a ground guard literal into a constraint.
pub fn compile_glit(g: &GLit) -> Compiled {
    match (g.lhs, g.rhs) {
        (GVal::Const(a), GVal::Const(b)) => Compiled::Const((a == b) == g.positive),
        (GVal::Slot(s), GVal::Const(c)) | (GVal::Const(c), GVal::Slot(s)) => {
            if g.positive {
                Compiled::Cube(vec![(s, c)])
            } else {
                Compiled::Clause(vec![(s, c)])
            }
        }
        (GVal::Slot(a), GVal::Slot(b)) => Compiled::SlotEq { a, b, positive: g.positive },
    }
}
