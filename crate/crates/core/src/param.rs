//! Quantified invariants: promotion of concrete clauses by type saturation,
//! rendering and ground expansion.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{CheckError, Checker};
use crate::formula::{ConcreteInvariant, GroundFormula, GroundVar, Literal};
use crate::protocol::{Concretization, ProtocolSpec, SafetyProperty, Sort, Term, TypeId, VarId};

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("no literal of the clause mentions value {value} of type `{ty}`")]
    GroupNotFound { ty: String, value: u8 },
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// Per-type fraction of concrete values occurring in a clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeSaturation {
    pub ty: TypeId,
    pub name: String,
    pub count: usize,
    pub size: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SaturationReport {
    pub types: Vec<TypeSaturation>,
}

impl SaturationReport {
    pub fn get(&self, t: TypeId) -> Option<&TypeSaturation> {
        self.types.iter().find(|s| s.ty == t)
    }

    pub fn is_saturated(&self, t: TypeId) -> bool {
        self.get(t).is_some_and(|s| s.count >= s.size)
    }
}

pub fn compute_saturation(spec: &ProtocolSpec, inv: &ConcreteInvariant, sizes: &Concretization) -> SaturationReport {
    let types = inv
        .param_values(spec)
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(t, v)| {
            let size = sizes.size(t) as usize;
            TypeSaturation {
                ty: t,
                name: spec.param_types[t].clone(),
                count: v.len(),
                size,
                gamma: v.len() as f64 / size as f64,
            }
        })
        .collect();
    SaturationReport { types }
}

fn mentions(spec: &ProtocolSpec, l: &Literal, t: TypeId, value: u8) -> bool {
    l.param_values(spec).contains(&(t, value))
}

/// Replaces value `from` of type `t` by `to`, in indices and in
/// parameter-sorted values.
pub fn substitute_value(spec: &ProtocolSpec, l: &Literal, t: TypeId, from: u8, to: u8) -> Literal {
    let decl = &spec.vars[l.var.decl];
    let swap = |ty: TypeId, v: u8| if ty == t && v == from { to } else { v };
    let index = decl.index.iter().zip(&l.var.index).map(|(ty, v)| swap(*ty, *v)).collect();
    let value = match decl.sort {
        Sort::Param(ty) => swap(ty, l.value),
        _ => l.value,
    };
    Literal::new(GroundVar { name: l.var.name.clone(), index, decl: l.var.decl }, value)
}

/// The clause over sizes with `C(t) + 1` whose literals are the ones of
/// `inv` plus copies of the group of `value` at every value `1..=C(t)+1`.
pub fn extend_group(
    spec: &ProtocolSpec,
    inv: &ConcreteInvariant,
    t: TypeId,
    value: u8,
    sizes: &Concretization,
) -> Result<ConcreteInvariant, ParamError> {
    let group: Vec<&Literal> = inv.lits.iter().filter(|l| mentions(spec, l, t, value)).collect();
    if group.is_empty() {
        return Err(ParamError::GroupNotFound { ty: spec.param_types[t].clone(), value });
    }
    let mut lits: Vec<Literal> = inv.lits.clone();
    for w in 1..=sizes.size(t) + 1 {
        lits.extend(group.iter().map(|l| substitute_value(spec, l, t, value, w)));
    }
    Ok(ConcreteInvariant::new(lits).canonical())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    Forall,
    Exists,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamBinder {
    pub name: String,
    pub ty: TypeId,
    pub quant: Quantifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PValue {
    Const(u8),
    Binder(usize),
}

/// `var[b_i][b_j] = value` with indices given as binder positions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PLit {
    pub var: VarId,
    pub index: Vec<usize>,
    pub value: PValue,
}

/// `!(l1 & l2 & ...)` over binders.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PClause {
    pub lits: Vec<PLit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Safety(String),
    Auxiliary,
}

/// A quantified invariant. The body is a conjunction of disjunctions of
/// clauses; an empty body is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamInvariant {
    pub binders: Vec<ParamBinder>,
    /// Binder position pairs `(a, b)`, `a < b`, that must take distinct values.
    pub distinct: Vec<(usize, usize)>,
    pub body: Vec<Vec<PClause>>,
    pub origin: Origin,
}

/// Binder names per type: lowercase initial plus a counter, or the whole
/// lowercase type name when initials collide.
fn binder_prefixes(spec: &ProtocolSpec) -> Vec<String> {
    let initial = |s: &String| s.chars().next().map(|c| c.to_ascii_lowercase()).unwrap_or('x');
    spec.param_types
        .iter()
        .map(|t| {
            let clash = spec.param_types.iter().filter(|u| initial(u) == initial(t)).count() > 1;
            if clash {
                t.to_lowercase()
            } else {
                initial(t).to_string()
            }
        })
        .collect()
}

fn assign_names(spec: &ProtocolSpec, binders: &mut [ParamBinder]) {
    let prefixes = binder_prefixes(spec);
    let mut counters = vec![0usize; spec.param_types.len()];
    for b in binders {
        counters[b.ty] += 1;
        b.name = format!("{}{}", prefixes[b.ty], counters[b.ty]);
    }
}

impl ParamInvariant {
    /// The safety property as a universally quantified invariant.
    pub fn from_property(spec: &ProtocolSpec, prop: &SafetyProperty) -> ParamInvariant {
        let mut binders: Vec<ParamBinder> = prop
            .binders
            .iter()
            .map(|b| ParamBinder { name: String::new(), ty: b.ty, quant: Quantifier::Forall })
            .collect();
        assign_names(spec, &mut binders);
        let body = match &prop.body {
            None => vec![],
            Some(lits) => {
                let lits = lits
                    .iter()
                    .map(|l| {
                        let Term::Var { var, index } = &l.lhs else { unreachable!("validated by the parser") };
                        let value = match &l.rhs {
                            Term::Bound(s) => PValue::Binder(*s),
                            Term::Const(c) => PValue::Const(c.encode()),
                            Term::Var { .. } => unreachable!("validated by the parser"),
                        };
                        PLit { var: *var, index: index.clone(), value }
                    })
                    .collect();
                vec![vec![PClause { lits }]]
            }
        };
        ParamInvariant { binders, distinct: prop.distinct.clone(), body, origin: Origin::Safety(prop.name.clone()) }
    }

    pub fn has_exists(&self) -> bool {
        self.binders.iter().any(|b| b.quant == Quantifier::Exists)
    }

    pub fn is_safety(&self) -> bool {
        matches!(self.origin, Origin::Safety(_))
    }

    /// Smallest size per type at which every binder gets its own value.
    pub fn min_sizes(&self, spec: &ProtocolSpec) -> Vec<u8> {
        let mut out = vec![1u8; spec.param_types.len()];
        for t in 0..spec.param_types.len() {
            let n = self.binders.iter().filter(|b| b.ty == t).count() as u8;
            out[t] = out[t].max(n);
        }
        out
    }

    fn render_lit(&self, spec: &ProtocolSpec, l: &PLit) -> String {
        let decl = &spec.vars[l.var];
        let mut s = decl.name.clone();
        for i in &l.index {
            s.push_str(&format!("[{}]", self.binders[*i].name));
        }
        let value = match l.value {
            PValue::Binder(b) => self.binders[b].name.clone(),
            PValue::Const(c) => spec.value_name(decl.sort, c),
        };
        format!("{s} = {value}")
    }

    fn render_clause(&self, spec: &ProtocolSpec, c: &PClause) -> String {
        let lits: Vec<String> = c.lits.iter().map(|l| self.render_lit(spec, l)).collect();
        format!("~({})", lits.join(" & "))
    }

    fn render_body(&self, spec: &ProtocolSpec) -> String {
        if self.body.is_empty() {
            return "true".into();
        }
        let parts: Vec<String> = self
            .body
            .iter()
            .map(|alts| {
                let a: Vec<String> = alts.iter().map(|c| self.render_clause(spec, c)).collect();
                if a.len() == 1 {
                    a[0].clone()
                } else {
                    format!("({})", a.join(" | "))
                }
            })
            .collect();
        parts.join(" & ")
    }

    /// Stable text form, e.g.
    /// `forall n1:NODE, n2:NODE. n1 ~= n2 -> ~(st[n1] = Critical & st[n2] = Critical)`.
    pub fn render(&self, spec: &ProtocolSpec) -> String {
        let mut out = String::new();
        for (quant, group) in &self.binders.iter().chunk_by(|b| b.quant) {
            let names: Vec<String> = group.map(|b| format!("{}:{}", b.name, spec.param_types[b.ty])).collect();
            let kw = match quant {
                Quantifier::Forall => "forall",
                Quantifier::Exists => "exists",
            };
            out.push_str(&format!("{kw} {}. ", names.join(", ")));
        }
        let pair = |(a, b): &(usize, usize)| format!("{} ~= {}", self.binders[*a].name, self.binders[*b].name);
        let is_exists = |i: usize| self.binders[i].quant == Quantifier::Exists;
        let (ex, fa): (Vec<&(usize, usize)>, Vec<&(usize, usize)>) =
            self.distinct.iter().partition(|(a, b)| is_exists(*a) || is_exists(*b));
        if !fa.is_empty() {
            out.push_str(&fa.iter().map(|p| pair(p)).join(" & "));
            out.push_str(" -> ");
        }
        if !ex.is_empty() {
            out.push_str(&ex.iter().map(|p| pair(p)).join(" & "));
            out.push_str(" & ");
        }
        out.push_str(&self.render_body(spec));
        out
    }

    /// Applies a renumbering of binder positions (`perm[old] = new`).
    fn renumbered(&self, perm: &[usize]) -> ParamInvariant {
        let mut binders = self.binders.clone();
        for (old, b) in self.binders.iter().enumerate() {
            binders[perm[old]] = b.clone();
        }
        let map_lit = |l: &PLit| PLit {
            var: l.var,
            index: l.index.iter().map(|i| perm[*i]).collect(),
            value: match l.value {
                PValue::Binder(b) => PValue::Binder(perm[b]),
                c => c,
            },
        };
        let mut body: Vec<Vec<PClause>> = self
            .body
            .iter()
            .map(|alts| {
                let mut alts: Vec<PClause> = alts
                    .iter()
                    .map(|c| {
                        let mut lits: Vec<PLit> = c.lits.iter().map(map_lit).collect();
                        lits.sort();
                        lits.dedup();
                        PClause { lits }
                    })
                    .collect();
                alts.sort();
                alts.dedup();
                alts
            })
            .collect();
        body.sort();
        body.dedup();
        let mut distinct: Vec<(usize, usize)> = self
            .distinct
            .iter()
            .map(|(a, b)| (perm[*a].min(perm[*b]), perm[*a].max(perm[*b])))
            .collect();
        distinct.sort();
        distinct.dedup();
        ParamInvariant { binders, distinct, body, origin: self.origin.clone() }
    }

    /// Normal form up to renaming of binders within a (type, quantifier)
    /// block and reordering of literals, clauses and conjuncts.
    pub fn canonical(&self, spec: &ProtocolSpec) -> ParamInvariant {
        // Blocks in prefix order: all binders, stably grouped by (quantifier, type).
        let mut order: Vec<usize> = (0..self.binders.len()).collect();
        order.sort_by_key(|i| (self.binders[*i].quant, self.binders[*i].ty));
        let blocks: Vec<Vec<usize>> = order
            .iter()
            .chunk_by(|i| (self.binders[**i].quant, self.binders[**i].ty))
            .into_iter()
            .map(|(_, g)| g.copied().collect())
            .collect();
        let mut best: Option<(String, ParamInvariant)> = None;
        let block_perms: Vec<Vec<Vec<usize>>> =
            blocks.iter().map(|b| b.iter().copied().permutations(b.len()).collect()).collect();
        for choice in block_perms.iter().map(|p| p.iter()).multi_cartesian_product() {
            // Position `k` of the sorted order is taken by binder `flat[k]`.
            let flat: Vec<usize> = choice.into_iter().flatten().copied().collect();
            let mut perm = vec![0; self.binders.len()];
            for (new, old) in flat.iter().enumerate() {
                perm[*old] = new;
            }
            let mut cand = self.renumbered(&perm);
            cand.sort_lits_by_name(spec);
            assign_names(spec, &mut cand.binders);
            let text = cand.render(spec);
            if best.as_ref().map_or(true, |(t, _)| text < *t) {
                best = Some((text, cand));
            }
        }
        match best {
            Some((_, c)) => c,
            None => {
                let mut c = self.renumbered(&[]);
                assign_names(spec, &mut c.binders);
                c
            }
        }
    }

    fn sort_lits_by_name(&mut self, spec: &ProtocolSpec) {
        for alts in &mut self.body {
            for c in alts.iter_mut() {
                c.lits.sort_by(|a, b| {
                    (&spec.vars[a.var].name, &a.index, a.value).cmp(&(&spec.vars[b.var].name, &b.index, b.value))
                });
            }
        }
    }

    fn ground_clause(&self, spec: &ProtocolSpec, c: &PClause, env: &[u8]) -> ConcreteInvariant {
        let lits = c
            .lits
            .iter()
            .map(|l| {
                let gv = GroundVar::new(spec, l.var, l.index.iter().map(|i| env[*i]).collect());
                let value = match l.value {
                    PValue::Binder(b) => env[b],
                    PValue::Const(v) => v,
                };
                Literal::new(gv, value)
            })
            .collect();
        ConcreteInvariant::new(lits).canonical()
    }

    fn expand_from(&self, spec: &ProtocolSpec, sizes: &Concretization, env: &mut Vec<u8>) -> GroundFormula {
        let k = env.len();
        if k == self.binders.len() {
            let conj = self
                .body
                .iter()
                .map(|alts| {
                    let mut ors: Vec<GroundFormula> =
                        alts.iter().map(|c| GroundFormula::Clause(self.ground_clause(spec, c, env))).collect();
                    if ors.len() == 1 {
                        ors.pop().expect("one element")
                    } else {
                        GroundFormula::Or(ors)
                    }
                })
                .collect::<Vec<_>>();
            return if conj.len() == 1 { conj.into_iter().next().expect("one element") } else { GroundFormula::And(conj) };
        }
        let b = &self.binders[k];
        let mut parts = Vec::new();
        for v in 1..=sizes.size(b.ty) {
            if self.distinct.iter().any(|(x, y)| *y == k && env[*x] == v) {
                continue;
            }
            env.push(v);
            parts.push(self.expand_from(spec, sizes, env));
            env.pop();
        }
        match b.quant {
            Quantifier::Forall => GroundFormula::And(parts),
            Quantifier::Exists => GroundFormula::Or(parts),
        }
    }

    /// The ground formula denoted at `sizes`.
    pub fn expand(&self, spec: &ProtocolSpec, sizes: &Concretization) -> GroundFormula {
        self.expand_from(spec, sizes, &mut Vec::new())
    }

    /// JSON mirror of the syntax tree.
    pub fn view(&self, spec: &ProtocolSpec) -> ParamInvariantView {
        let lit_view = |l: &PLit| LitView {
            var: spec.vars[l.var].name.clone(),
            index: l.index.iter().map(|i| self.binders[*i].name.clone()).collect(),
            value: match l.value {
                PValue::Binder(b) => self.binders[b].name.clone(),
                PValue::Const(c) => spec.value_name(spec.vars[l.var].sort, c),
            },
        };
        ParamInvariantView {
            text: self.render(spec),
            origin: match &self.origin {
                Origin::Safety(n) => format!("safety:{n}"),
                Origin::Auxiliary => "auxiliary".into(),
            },
            binders: self
                .binders
                .iter()
                .map(|b| BinderView { name: b.name.clone(), ty: spec.param_types[b.ty].clone(), quant: b.quant })
                .collect(),
            distinct: self
                .distinct
                .iter()
                .map(|(a, b)| [self.binders[*a].name.clone(), self.binders[*b].name.clone()])
                .collect(),
            body: self
                .body
                .iter()
                .map(|alts| alts.iter().map(|c| c.lits.iter().map(lit_view).collect()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinderView {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub quant: Quantifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LitView {
    pub var: String,
    pub index: Vec<String>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInvariantView {
    pub text: String,
    pub origin: String,
    pub binders: Vec<BinderView>,
    pub distinct: Vec<[String; 2]>,
    /// Conjunction of disjunctions of negated literal conjunctions.
    pub body: Vec<Vec<Vec<LitView>>>,
}

/// Quantifier decision for one concrete value of a saturated type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDecision {
    pub ty: String,
    pub value: u8,
    /// The extended clause holds on the instance with one more value.
    pub extended_holds: bool,
    /// Every relocation of the group to another value holds there too.
    pub relocated_holds: bool,
    pub quant: Quantifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Promotion {
    pub concrete: ConcreteInvariant,
    pub invariant: ParamInvariant,
    pub saturation: SaturationReport,
    pub groups: Vec<GroupDecision>,
}

/// Lifts a concrete clause that holds at `sizes` to a quantified invariant.
pub fn promote(
    spec: &ProtocolSpec,
    inv: &ConcreteInvariant,
    sizes: &Concretization,
    checker: &Checker,
) -> Result<Promotion, ParamError> {
    let inv = inv.canonical();
    let saturation = compute_saturation(spec, &inv, sizes);
    let values = inv.param_values(spec);
    let mut quant: BTreeMap<(TypeId, u8), Quantifier> = BTreeMap::new();
    let mut groups = Vec::new();
    for (t, vals) in values.iter().enumerate() {
        if vals.is_empty() {
            continue;
        }
        if !saturation.is_saturated(t) {
            for v in vals {
                quant.insert((t, *v), Quantifier::Forall);
            }
            continue;
        }
        let bigger = sizes.bumped(t);
        for &v in vals {
            let extended = extend_group(spec, &inv, t, v, sizes)?;
            let extended_holds = checker.check(&bigger, &extended)?.holds();
            let mut relocated_holds = true;
            for w in 1..=bigger.size(t) {
                if w != v && vals.contains(&w) {
                    continue;
                }
                let moved = ConcreteInvariant::new(
                    inv.lits.iter().map(|l| substitute_value(spec, l, t, v, w)).collect(),
                );
                if !checker.check(&bigger, &moved)?.holds() {
                    relocated_holds = false;
                    break;
                }
            }
            let q = if extended_holds && relocated_holds { Quantifier::Forall } else { Quantifier::Exists };
            quant.insert((t, v), q);
            groups.push(GroupDecision {
                ty: spec.param_types[t].clone(),
                value: v,
                extended_holds,
                relocated_holds,
                quant: q,
            });
        }
    }
    let invariant = build_param(spec, &inv, &quant).canonical(spec);
    Ok(Promotion { concrete: inv, invariant, saturation, groups })
}

/// Builds the quantified form given a quantifier per concrete value.
/// Universal values come first, then existential ones; all binders of one
/// type are pairwise distinct.
pub fn build_param(
    spec: &ProtocolSpec,
    inv: &ConcreteInvariant,
    quant: &BTreeMap<(TypeId, u8), Quantifier>,
) -> ParamInvariant {
    let mut keys: Vec<(TypeId, u8)> = quant.keys().copied().collect();
    keys.sort_by_key(|k| (quant[k], k.0, k.1));
    let pos: BTreeMap<(TypeId, u8), usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let mut binders: Vec<ParamBinder> =
        keys.iter().map(|k| ParamBinder { name: String::new(), ty: k.0, quant: quant[k] }).collect();
    assign_names(spec, &mut binders);
    let distinct: Vec<(usize, usize)> = (0..keys.len())
        .tuple_combinations()
        .filter(|(a, b)| keys[*a].0 == keys[*b].0)
        .collect();
    let lift = |l: &Literal| {
        let decl = &spec.vars[l.var.decl];
        PLit {
            var: l.var.decl,
            index: decl.index.iter().zip(&l.var.index).map(|(t, v)| pos[&(*t, *v)]).collect(),
            value: match decl.sort {
                Sort::Param(t) => PValue::Binder(pos[&(t, l.value)]),
                _ => PValue::Const(l.value),
            },
        }
    };
    let exists: Vec<(TypeId, u8)> = keys.iter().copied().filter(|k| quant[k] == Quantifier::Exists).collect();
    let clause_of = |lits: Vec<&Literal>| {
        let mut lits: Vec<PLit> = lits.into_iter().map(lift).collect();
        lits.sort();
        lits.dedup();
        PClause { lits }
    };
    let body = if exists.len() <= 1 {
        vec![vec![clause_of(inv.lits.iter().collect())]]
    } else {
        let touches = |l: &Literal, k: &(TypeId, u8)| l.param_values(spec).contains(k);
        let rest: Vec<&Literal> = inv.lits.iter().filter(|l| !exists.iter().any(|k| touches(l, k))).collect();
        let alts = exists
            .iter()
            .map(|k| {
                let mut lits = rest.clone();
                lits.extend(inv.lits.iter().filter(|l| touches(l, k)));
                clause_of(lits)
            })
            .collect();
        vec![alts]
    };
    ParamInvariant { binders, distinct, body, origin: Origin::Auxiliary }
}

/// Distinct values of every type the clause mentions.
pub fn used_values(spec: &ProtocolSpec, inv: &ConcreteInvariant) -> BTreeSet<(TypeId, u8)> {
    inv.lits.iter().flat_map(|l| l.param_values(spec)).collect()
}
