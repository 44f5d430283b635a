//! Expansion of a parameterized spec into a finite instance.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::*;
use crate::formula::{ConcreteInvariant, GroundVar, Literal};

/// Size of every parameter type, aligned with [`ProtocolSpec::param_types`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Concretization(pub Vec<u8>);

impl Concretization {
    pub fn uniform(spec: &ProtocolSpec, n: u8) -> Self {
        Concretization(vec![n; spec.param_types.len()])
    }

    pub fn size(&self, t: TypeId) -> u8 {
        self.0[t]
    }

    /// Same sizes with type `t` grown by one.
    pub fn bumped(&self, t: TypeId) -> Self {
        let mut v = self.0.clone();
        v[t] += 1;
        Concretization(v)
    }

    /// Same sizes with every type grown by `d`.
    pub fn grown(&self, d: u8) -> Self {
        Concretization(self.0.iter().map(|s| s + d).collect())
    }

    pub fn render(&self, spec: &ProtocolSpec) -> String {
        spec.param_types
            .iter()
            .zip(&self.0)
            .map(|(t, n)| format!("{t}={n}"))
            .join(",")
    }
}

impl fmt::Display for Concretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0.iter().join(","))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ConcretizeError {
    #[error("expected {expected} sizes, got {got}")]
    SizeCount { expected: usize, got: usize },
    #[error("size of `{ty}` must be at least 1")]
    ZeroSize { ty: String },
    #[error("`{what}` needs {need} distinct values of `{ty}`, but the size is {have}")]
    NotEnoughValues { what: String, ty: String, need: usize, have: u8 },
    #[error("instance too large: {0}")]
    TooLarge(String),
}

/// Ground value of a term: a state slot or an encoded constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GVal {
    Slot(usize),
    Const(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GLit {
    pub lhs: GVal,
    pub rhs: GVal,
    pub positive: bool,
}

impl GLit {
    pub fn holds(&self, state: &[u8]) -> bool {
        let get = |v: GVal| match v {
            GVal::Slot(s) => state[s],
            GVal::Const(c) => c,
        };
        (get(self.lhs) == get(self.rhs)) == self.positive
    }
}

/// One instantiation of a rule at concrete binder values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundRule {
    pub rule: usize,
    pub name: String,
    pub args: Vec<u8>,
    pub guard: Vec<GLit>,
    /// Parallel assignments `slot := value`, read against the pre-state.
    pub assigns: Vec<(usize, GVal)>,
}

impl GroundRule {
    pub fn label(&self) -> String {
        format!("{}({})", self.name, self.args.iter().join(","))
    }

    pub fn enabled(&self, state: &[u8]) -> bool {
        self.guard.iter().all(|g| g.holds(state))
    }

    pub fn fire(&self, state: &[u8]) -> Vec<u8> {
        let mut next = state.to_vec();
        for (slot, v) in &self.assigns {
            next[*slot] = match v {
                GVal::Slot(s) => state[*s],
                GVal::Const(c) => *c,
            };
        }
        next
    }

    pub fn assigns_slot(&self, slot: usize) -> Option<GVal> {
        self.assigns.iter().find(|(s, _)| *s == slot).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundProperty {
    pub property: usize,
    pub name: String,
    pub args: Vec<u8>,
    pub inv: ConcreteInvariant,
}

impl GroundProperty {
    pub fn label(&self) -> String {
        format!("{}({})", self.name, self.args.iter().join(","))
    }
}

/// A finite instance of a protocol.
#[derive(Debug, Clone)]
pub struct ConcreteProtocol {
    pub spec: Arc<ProtocolSpec>,
    pub sizes: Concretization,
    /// Ground variables in canonical state order.
    pub vars: Vec<GroundVar>,
    /// Encoded values of each slot, in domain order.
    pub domains: Vec<Vec<u8>>,
    pub slot_of: HashMap<GroundVar, usize>,
    pub rules: Vec<GroundRule>,
    pub init_states: Vec<Vec<u8>>,
    pub properties: Vec<GroundProperty>,
}

const MAX_INIT_STATES: usize = 1 << 20;

/// All assignments of values `1..=size` to `binders` (lexicographic order)
/// satisfying the pairwise distinctness conditions.
pub fn binder_assignments(
    binders: &[Binder],
    distinct: &[(usize, usize)],
    sizes: &Concretization,
) -> Vec<Vec<u8>> {
    if binders.is_empty() {
        return vec![vec![]];
    }
    binders
        .iter()
        .map(|b| 1..=sizes.size(b.ty))
        .multi_cartesian_product()
        .filter(|args| distinct.iter().all(|(a, b)| args[*a] != args[*b]))
        .collect()
}

/// Largest number of pairwise-distinct binders of each type.
pub fn distinct_requirement(binders: &[Binder], distinct: &[(usize, usize)]) -> Vec<(TypeId, usize)> {
    let mut by_type: HashMap<TypeId, Vec<usize>> = HashMap::new();
    for (i, b) in binders.iter().enumerate() {
        by_type.entry(b.ty).or_default().push(i);
    }
    let related = |a: usize, b: usize| distinct.contains(&(a.min(b), a.max(b)));
    let mut out: Vec<(TypeId, usize)> = by_type
        .into_iter()
        .map(|(t, members)| {
            let mut best = 1;
            for k in 2..=members.len() {
                if members
                    .iter()
                    .combinations(k)
                    .any(|c| c.iter().tuple_combinations().all(|(a, b)| related(**a, **b)))
                {
                    best = k;
                }
            }
            (t, best)
        })
        .collect();
    out.sort();
    out
}

fn ground_val(spec: &ProtocolSpec, slot_of: &HashMap<GroundVar, usize>, t: &Term, args: &[u8]) -> GVal {
    match t {
        Term::Var { var, index } => {
            let gv = GroundVar::new(spec, *var, index.iter().map(|s| args[*s]).collect());
            GVal::Slot(slot_of[&gv])
        }
        Term::Bound(s) => GVal::Const(args[*s]),
        Term::Const(c) => GVal::Const(c.encode()),
    }
}

fn ground_lit(spec: &ProtocolSpec, slot_of: &HashMap<GroundVar, usize>, l: &Lit, args: &[u8]) -> GLit {
    GLit {
        lhs: ground_val(spec, slot_of, &l.lhs, args),
        rhs: ground_val(spec, slot_of, &l.rhs, args),
        positive: l.positive,
    }
}

/// Grounds a property body at the given binder values.
pub fn ground_property_body(spec: &ProtocolSpec, lits: &[Lit], args: &[u8]) -> ConcreteInvariant {
    let out = lits
        .iter()
        .map(|l| {
            let Term::Var { var, index } = &l.lhs else {
                unreachable!("validated by the parser")
            };
            let gv = GroundVar::new(spec, *var, index.iter().map(|s| args[*s]).collect());
            let value = match &l.rhs {
                Term::Bound(s) => args[*s],
                Term::Const(c) => c.encode(),
                Term::Var { .. } => unreachable!("validated by the parser"),
            };
            Literal::new(gv, value)
        })
        .collect();
    ConcreteInvariant::new(out)
}

/// Expands `spec` at `sizes`. Fails if some rule or property needs more
/// distinct values of a type than the size provides.
pub fn concretize(spec: &ProtocolSpec, sizes: &Concretization) -> Result<ConcreteProtocol, ConcretizeError> {
    concretize_inner(spec, sizes, true)
}

/// Like [`concretize`], but rules and properties that cannot be instantiated
/// simply contribute no instances.
pub fn concretize_relaxed(
    spec: &ProtocolSpec,
    sizes: &Concretization,
) -> Result<ConcreteProtocol, ConcretizeError> {
    concretize_inner(spec, sizes, false)
}

fn concretize_inner(
    spec: &ProtocolSpec,
    sizes: &Concretization,
    strict: bool,
) -> Result<ConcreteProtocol, ConcretizeError> {
    if sizes.0.len() != spec.param_types.len() {
        return Err(ConcretizeError::SizeCount { expected: spec.param_types.len(), got: sizes.0.len() });
    }
    for (t, n) in sizes.0.iter().enumerate() {
        if *n == 0 {
            return Err(ConcretizeError::ZeroSize { ty: spec.param_types[t].clone() });
        }
    }
    if strict {
        let checks = spec
            .rules
            .iter()
            .map(|r| (&r.name, &r.binders, &r.distinct))
            .chain(spec.properties.iter().map(|p| (&p.name, &p.binders, &p.distinct)));
        for (name, binders, distinct) in checks {
            for (t, need) in distinct_requirement(binders, distinct) {
                if need > sizes.size(t) as usize {
                    return Err(ConcretizeError::NotEnoughValues {
                        what: name.clone(),
                        ty: spec.param_types[t].clone(),
                        need,
                        have: sizes.size(t),
                    });
                }
            }
        }
    }

    let mut vars = Vec::new();
    let mut domains = Vec::new();
    for (decl, v) in spec.vars.iter().enumerate() {
        let dom: Vec<u8> = match v.sort {
            Sort::Bool => vec![0, 1],
            Sort::Enum(e) => (0..spec.enums[e].members.len() as u8).collect(),
            Sort::Param(t) => (1..=sizes.size(t)).collect(),
        };
        let indices: Vec<Vec<u8>> = if v.index.is_empty() {
            vec![vec![]]
        } else {
            v.index.iter().map(|t| 1..=sizes.size(*t)).multi_cartesian_product().collect()
        };
        for idx in indices {
            vars.push(GroundVar::new(spec, decl, idx));
            domains.push(dom.clone());
        }
    }
    let slot_of: HashMap<GroundVar, usize> =
        vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();

    let mut rules = Vec::new();
    for (ri, r) in spec.rules.iter().enumerate() {
        for args in binder_assignments(&r.binders, &r.distinct, sizes) {
            let mut guard = Vec::new();
            for g in &r.guard {
                match g {
                    GuardItem::Lit(l) => guard.push(ground_lit(spec, &slot_of, l, &args)),
                    GuardItem::Forall { binder, lit } => {
                        for v in 1..=sizes.size(binder.ty) {
                            let mut ext = args.clone();
                            ext.push(v);
                            guard.push(ground_lit(spec, &slot_of, lit, &ext));
                        }
                    }
                }
            }
            let assigns = r
                .action
                .iter()
                .map(|a| {
                    let GVal::Slot(s) = ground_val(spec, &slot_of, &a.target, &args) else {
                        unreachable!("targets are state variables")
                    };
                    (s, ground_val(spec, &slot_of, &a.value, &args))
                })
                .collect::<Vec<_>>();
            // Distinct target terms can collide once grounded, e.g. x[i] and x[j] with i = j.
            if assigns.iter().map(|(s, _)| s).all_unique() {
                rules.push(GroundRule { rule: ri, name: r.name.clone(), args, guard, assigns });
            }
        }
    }

    // Initial states: fixed slots from the init items, free slots range over their domain.
    let mut fixed: Vec<Option<u8>> = vec![None; vars.len()];
    let mut conflict = false;
    for item in &spec.init {
        for args in binder_assignments(&item.binders, &[], sizes) {
            let gl = ground_lit(spec, &slot_of, &item.lit, &args);
            let (GVal::Slot(s), GVal::Const(c)) = (gl.lhs, gl.rhs) else {
                unreachable!("validated by the parser")
            };
            match fixed[s] {
                Some(old) if old != c => conflict = true,
                _ => fixed[s] = Some(c),
            }
        }
    }
    let mut init_states = Vec::new();
    if !conflict {
        let mut count: usize = 1;
        for (s, f) in fixed.iter().enumerate() {
            if f.is_none() {
                count = count.saturating_mul(domains[s].len());
            }
        }
        if count > MAX_INIT_STATES {
            return Err(ConcretizeError::TooLarge(format!("{count} initial states")));
        }
        let choices: Vec<Vec<u8>> = fixed
            .iter()
            .enumerate()
            .map(|(s, f)| match f {
                Some(v) => vec![*v],
                None => domains[s].clone(),
            })
            .collect();
        init_states = if choices.is_empty() {
            vec![vec![]]
        } else {
            choices.into_iter().multi_cartesian_product().collect()
        };
    }

    let mut properties = Vec::new();
    for (pi, p) in spec.properties.iter().enumerate() {
        let Some(body) = &p.body else { continue };
        for args in binder_assignments(&p.binders, &p.distinct, sizes) {
            properties.push(GroundProperty {
                property: pi,
                name: p.name.clone(),
                inv: ground_property_body(spec, body, &args),
                args,
            });
        }
    }

    Ok(ConcreteProtocol {
        spec: Arc::new(spec.clone()),
        sizes: sizes.clone(),
        vars,
        domains,
        slot_of,
        rules,
        init_states,
        properties,
    })
}

impl ConcreteProtocol {
    /// Total number of states over the declared domains, saturating.
    pub fn state_space(&self) -> u128 {
        self.domains.iter().fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    pub fn slot(&self, v: &GroundVar) -> Option<usize> {
        self.slot_of.get(v).copied()
    }

    /// Renders a state as `name=value` pairs in slot order.
    pub fn render_state(&self, state: &[u8]) -> String {
        self.vars
            .iter()
            .zip(state)
            .map(|(v, x)| format!("{v}={}", self.spec.value_name(self.spec.vars[v.decl].sort, *x)))
            .join(", ")
    }
}
