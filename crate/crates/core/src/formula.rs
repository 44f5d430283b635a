//! Ground (concrete-instance) formulas: literals, clause invariants and their
//! boolean combinations, plus a slot-compiled form with three-valued
//! evaluation over partial states.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocol::{ProtocolSpec, Sort, VarId};

/// One instance of a state variable, e.g. `st[2]` or `lock`.
///
/// Ordering is by (name, index tuple), which is the canonical literal order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundVar {
    pub name: String,
    pub index: Vec<u8>,
    pub decl: VarId,
}

impl GroundVar {
    pub fn new(spec: &ProtocolSpec, decl: VarId, index: Vec<u8>) -> Self {
        GroundVar { name: spec.vars[decl].name.clone(), index, decl }
    }
}

impl fmt::Display for GroundVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for i in &self.index {
            write!(f, "[{i}]")?;
        }
        Ok(())
    }
}

/// Equality literal `var = value` over encoded values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: GroundVar,
    pub value: u8,
}

impl Literal {
    pub fn new(var: GroundVar, value: u8) -> Self {
        Literal { var, value }
    }

    pub fn render(&self, spec: &ProtocolSpec) -> String {
        let sort = spec.vars[self.var.decl].sort;
        format!("{} = {}", self.var, spec.value_name(sort, self.value))
    }

    /// Parameter values mentioned by this literal, as (type, value) pairs.
    pub fn param_values(&self, spec: &ProtocolSpec) -> Vec<(usize, u8)> {
        let decl = &spec.vars[self.var.decl];
        let mut out: Vec<(usize, u8)> =
            decl.index.iter().copied().zip(self.var.index.iter().copied()).collect();
        if let Sort::Param(t) = decl.sort {
            out.push((t, self.value));
        }
        out
    }
}

/// A clause invariant `!(l1 & l2 & ...)`. The empty clause denotes `false`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConcreteInvariant {
    pub lits: Vec<Literal>,
}

impl ConcreteInvariant {
    pub fn new(lits: Vec<Literal>) -> Self {
        ConcreteInvariant { lits }
    }

    /// Literals sorted by (variable name, index tuple, value) and deduplicated.
    pub fn canonical(&self) -> ConcreteInvariant {
        let set: BTreeSet<Literal> = self.lits.iter().cloned().collect();
        ConcreteInvariant { lits: set.into_iter().collect() }
    }

    pub fn is_canonical(&self) -> bool {
        self.lits.windows(2).all(|w| w[0] < w[1])
    }

    pub fn vars(&self) -> impl Iterator<Item = &GroundVar> {
        self.lits.iter().map(|l| &l.var)
    }

    /// Holds in a total state given as a lookup function.
    pub fn holds_with(&self, value_of: impl Fn(&GroundVar) -> u8) -> bool {
        !self.lits.iter().all(|l| value_of(&l.var) == l.value)
    }

    pub fn render(&self, spec: &ProtocolSpec) -> String {
        let body: Vec<String> = self.lits.iter().map(|l| l.render(spec)).collect();
        format!("!({})", body.join(" & "))
    }

    /// Distinct parameter values per type occurring in the clause.
    pub fn param_values(&self, spec: &ProtocolSpec) -> Vec<BTreeSet<u8>> {
        let mut out = vec![BTreeSet::new(); spec.param_types.len()];
        for l in &self.lits {
            for (t, v) in l.param_values(spec) {
                out[t].insert(v);
            }
        }
        out
    }
}

/// Boolean combination of clause invariants; produced by ground-expanding
/// quantified invariants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroundFormula {
    Clause(ConcreteInvariant),
    And(Vec<GroundFormula>),
    Or(Vec<GroundFormula>),
}

impl GroundFormula {
    pub fn truth() -> Self {
        GroundFormula::And(vec![])
    }

    /// Splits top-level conjunctions into a flat list of conjuncts.
    pub fn conjuncts(self) -> Vec<GroundFormula> {
        match self {
            GroundFormula::And(items) => items.into_iter().flat_map(|f| f.conjuncts()).collect(),
            other => vec![other],
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<GroundVar>) {
        match self {
            GroundFormula::Clause(c) => out.extend(c.vars().cloned()),
            GroundFormula::And(v) | GroundFormula::Or(v) => v.iter().for_each(|f| f.vars(out)),
        }
    }
}

impl From<ConcreteInvariant> for GroundFormula {
    fn from(c: ConcreteInvariant) -> Self {
        GroundFormula::Clause(c)
    }
}

/// Kleene truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

/// A formula whose literals refer to state slots of one concrete protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Compiled {
    Const(bool),
    /// `!(slot0 = v0 & slot1 = v1 & ...)`
    Clause(Vec<(usize, u8)>),
    /// `slot0 = v0 & slot1 = v1 & ...`
    Cube(Vec<(usize, u8)>),
    /// `a = b` (or `a != b` when `positive` is false) between two slots.
    SlotEq { a: usize, b: usize, positive: bool },
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("variable `{0}` does not exist in this instance")]
pub struct UnknownVar(pub String);

impl Compiled {
    pub fn compile_clause(
        c: &ConcreteInvariant,
        slots: &HashMap<GroundVar, usize>,
    ) -> Result<Compiled, UnknownVar> {
        let mut lits = Vec::with_capacity(c.lits.len());
        for l in &c.lits {
            let s = slots.get(&l.var).ok_or_else(|| UnknownVar(l.var.to_string()))?;
            lits.push((*s, l.value));
        }
        Ok(Compiled::Clause(lits))
    }

    pub fn compile(f: &GroundFormula, slots: &HashMap<GroundVar, usize>) -> Result<Compiled, UnknownVar> {
        Ok(match f {
            GroundFormula::Clause(c) => Compiled::compile_clause(c, slots)?,
            GroundFormula::And(items) => Compiled::And(
                items.iter().map(|f| Compiled::compile(f, slots)).collect::<Result<_, _>>()?,
            ),
            GroundFormula::Or(items) => Compiled::Or(
                items.iter().map(|f| Compiled::compile(f, slots)).collect::<Result<_, _>>()?,
            ),
        })
    }

    /// Evaluates over a total state.
    pub fn eval(&self, state: &[u8]) -> bool {
        match self {
            Compiled::Const(b) => *b,
            Compiled::Clause(lits) => !lits.iter().all(|(s, v)| state[*s] == *v),
            Compiled::Cube(lits) => lits.iter().all(|(s, v)| state[*s] == *v),
            Compiled::SlotEq { a, b, positive } => (state[*a] == state[*b]) == *positive,
            Compiled::And(items) => items.iter().all(|f| f.eval(state)),
            Compiled::Or(items) => items.iter().any(|f| f.eval(state)),
        }
    }

    /// Three-valued evaluation over a partial state; `value_of` returns
    /// `None` for unassigned slots.
    pub fn eval3(&self, value_of: &impl Fn(usize) -> Option<u8>) -> Tri {
        match self {
            Compiled::Const(b) => {
                if *b {
                    Tri::True
                } else {
                    Tri::False
                }
            }
            Compiled::Clause(lits) => {
                let mut unknown = false;
                for (s, v) in lits {
                    match value_of(*s) {
                        Some(x) if x != *v => return Tri::True,
                        Some(_) => {}
                        None => unknown = true,
                    }
                }
                if unknown {
                    Tri::Unknown
                } else {
                    Tri::False
                }
            }
            Compiled::Cube(lits) => {
                let mut unknown = false;
                for (s, v) in lits {
                    match value_of(*s) {
                        Some(x) if x != *v => return Tri::False,
                        Some(_) => {}
                        None => unknown = true,
                    }
                }
                if unknown {
                    Tri::Unknown
                } else {
                    Tri::True
                }
            }
            Compiled::SlotEq { a, b, positive } => match (value_of(*a), value_of(*b)) {
                (Some(x), Some(y)) => {
                    if (x == y) == *positive {
                        Tri::True
                    } else {
                        Tri::False
                    }
                }
                _ => Tri::Unknown,
            },
            Compiled::And(items) => {
                let mut res = Tri::True;
                for f in items {
                    match f.eval3(value_of) {
                        Tri::False => return Tri::False,
                        Tri::Unknown => res = Tri::Unknown,
                        Tri::True => {}
                    }
                }
                res
            }
            Compiled::Or(items) => {
                let mut res = Tri::False;
                for f in items {
                    match f.eval3(value_of) {
                        Tri::True => return Tri::True,
                        Tri::Unknown => res = Tri::Unknown,
                        Tri::False => {}
                    }
                }
                res
            }
        }
    }

    pub fn slots(&self, out: &mut BTreeSet<usize>) {
        match self {
            Compiled::Const(_) => {}
            Compiled::Clause(lits) | Compiled::Cube(lits) => out.extend(lits.iter().map(|(s, _)| *s)),
            Compiled::SlotEq { a, b, .. } => {
                out.insert(*a);
                out.insert(*b);
            }
            Compiled::And(items) | Compiled::Or(items) => items.iter().for_each(|f| f.slots(out)),
        }
    }

    pub fn negate(&self) -> Compiled {
        match self {
            Compiled::Const(b) => Compiled::Const(!b),
            Compiled::Clause(l) => Compiled::Cube(l.clone()),
            Compiled::Cube(l) => Compiled::Clause(l.clone()),
            Compiled::SlotEq { a, b, positive } => Compiled::SlotEq { a: *a, b: *b, positive: !positive },
            Compiled::And(items) => Compiled::Or(items.iter().map(|f| f.negate()).collect()),
            Compiled::Or(items) => Compiled::And(items.iter().map(|f| f.negate()).collect()),
        }
    }

    /// Rewrites every slot through `subst`: a slot maps either to another
    /// slot or to a constant. Literals over constants are folded.
    pub fn substitute(&self, subst: &impl Fn(usize) -> SlotOrConst) -> Compiled {
        fn lits_map(
            lits: &[(usize, u8)],
            subst: &impl Fn(usize) -> SlotOrConst,
        ) -> Option<Vec<(usize, u8)>> {
            // None: some literal is constant-false.
            let mut out = Vec::with_capacity(lits.len());
            for (s, v) in lits {
                match subst(*s) {
                    SlotOrConst::Slot(t) => out.push((t, *v)),
                    SlotOrConst::Const(c) if c == *v => {}
                    SlotOrConst::Const(_) => return None,
                }
            }
            Some(out)
        }
        match self {
            Compiled::Const(b) => Compiled::Const(*b),
            Compiled::Clause(lits) => match lits_map(lits, subst) {
                None => Compiled::Const(true),
                Some(l) if l.is_empty() => Compiled::Const(false),
                Some(l) => Compiled::Clause(l),
            },
            Compiled::Cube(lits) => match lits_map(lits, subst) {
                None => Compiled::Const(false),
                Some(l) if l.is_empty() => Compiled::Const(true),
                Some(l) => Compiled::Cube(l),
            },
            Compiled::SlotEq { a, b, positive } => match (subst(*a), subst(*b)) {
                (SlotOrConst::Slot(x), SlotOrConst::Slot(y)) => Compiled::SlotEq { a: x, b: y, positive: *positive },
                (SlotOrConst::Const(x), SlotOrConst::Const(y)) => Compiled::Const((x == y) == *positive),
                (SlotOrConst::Slot(x), SlotOrConst::Const(c)) | (SlotOrConst::Const(c), SlotOrConst::Slot(x)) => {
                    if *positive {
                        Compiled::Cube(vec![(x, c)])
                    } else {
                        Compiled::Clause(vec![(x, c)])
                    }
                }
            },
            Compiled::And(items) => Compiled::And(items.iter().map(|f| f.substitute(subst)).collect()),
            Compiled::Or(items) => Compiled::Or(items.iter().map(|f| f.substitute(subst)).collect()),
        }
    }
}

/// Target of a slot substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOrConst {
    Slot(usize),
    Const(u8),
}
