//! Symmetric images of clause invariants under permutations of parameter
//! values, and canonical forms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{ConcreteInvariant, GroundVar, Literal};
use crate::protocol::{Concretization, ProtocolSpec, Sort, TypeId};

/// How the values of one parameter type may be permuted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantClass {
    /// Any permutation.
    Forall,
    /// Identity only.
    Exists,
    /// Permutations within the listed existential values and within their
    /// complement.
    Hybrid { exists_values: BTreeSet<u8> },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SymmetryError {
    #[error("parameter type `{0}` occurs in the invariant but has no quantifier class")]
    Unclassified(String),
}

pub type QuantInfo = BTreeMap<TypeId, QuantClass>;

/// Literals sorted by (variable name, index tuple, value), duplicates removed.
pub fn canonical_form(inv: &ConcreteInvariant) -> ConcreteInvariant {
    inv.canonical()
}

/// Applies one value mapping per type: `perm[t][v - 1]` is the image of `v`.
/// Values without an entry (short tables) map to themselves.
pub fn apply_permutation(spec: &ProtocolSpec, inv: &ConcreteInvariant, perm: &[Vec<u8>]) -> ConcreteInvariant {
    let map = |t: TypeId, v: u8| perm.get(t).and_then(|p| p.get(v as usize - 1)).copied().unwrap_or(v);
    let lits = inv
        .lits
        .iter()
        .map(|l| {
            let decl = &spec.vars[l.var.decl];
            let index = decl.index.iter().zip(&l.var.index).map(|(t, v)| map(*t, *v)).collect();
            let value = match decl.sort {
                Sort::Param(t) => map(t, l.value),
                _ => l.value,
            };
            Literal::new(GroundVar { name: l.var.name.clone(), index, decl: l.var.decl }, value)
        })
        .collect();
    ConcreteInvariant::new(lits).canonical()
}

/// Permutes a whole state (slot vector) of the instance whose variables are
/// `vars`; `slot_of` resolves the permuted variable back to a slot.
pub fn permute_state(
    spec: &ProtocolSpec,
    vars: &[GroundVar],
    slot_of: &std::collections::HashMap<GroundVar, usize>,
    state: &[u8],
    perm: &[Vec<u8>],
) -> Vec<u8> {
    let map = |t: TypeId, v: u8| perm.get(t).and_then(|p| p.get(v as usize - 1)).copied().unwrap_or(v);
    let mut out = vec![0; state.len()];
    for (s, gv) in vars.iter().enumerate() {
        let decl = &spec.vars[gv.decl];
        let index = decl.index.iter().zip(&gv.index).map(|(t, v)| map(*t, *v)).collect();
        let image = GroundVar { name: gv.name.clone(), index, decl: gv.decl };
        let value = match decl.sort {
            Sort::Param(t) => map(t, state[s]),
            _ => state[s],
        };
        out[slot_of[&image]] = value;
    }
    out
}

/// Injective maps of `used` into `1..=size` allowed by `class`, as
/// (source, target) lists.
fn injections(used: &[u8], size: u8, class: &QuantClass) -> Vec<Vec<(u8, u8)>> {
    let allowed = |src: u8, dst: u8| match class {
        QuantClass::Forall => true,
        QuantClass::Exists => src == dst,
        QuantClass::Hybrid { exists_values } => exists_values.contains(&src) == exists_values.contains(&dst),
    };
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(
        used: &[u8],
        size: u8,
        allowed: &dyn Fn(u8, u8) -> bool,
        cur: &mut Vec<(u8, u8)>,
        out: &mut Vec<Vec<(u8, u8)>>,
    ) {
        let Some(&src) = used.get(cur.len()) else {
            out.push(cur.clone());
            return;
        };
        for dst in 1..=size {
            if allowed(src, dst) && cur.iter().all(|(_, d)| *d != dst) {
                cur.push((src, dst));
                go(used, size, allowed, cur, out);
                cur.pop();
            }
        }
    }
    go(used, size, &allowed, &mut cur, &mut out);
    out
}

/// The orbit of `inv` under the permutation group described by `quant`,
/// without `inv` itself, canonical and sorted.
pub fn get_symmetry_invs(
    spec: &ProtocolSpec,
    inv: &ConcreteInvariant,
    quant: &QuantInfo,
    sizes: &Concretization,
) -> Result<Vec<ConcreteInvariant>, SymmetryError> {
    let used = inv.param_values(spec);
    let mut per_type: Vec<Vec<Vec<(u8, u8)>>> = Vec::new();
    for (t, vals) in used.iter().enumerate() {
        if vals.is_empty() {
            per_type.push(vec![vec![]]);
            continue;
        }
        let class = quant.get(&t).ok_or_else(|| SymmetryError::Unclassified(spec.param_types[t].clone()))?;
        let vals: Vec<u8> = vals.iter().copied().collect();
        per_type.push(injections(&vals, sizes.size(t), class));
    }
    let original = inv.canonical();
    let mut orbit = BTreeSet::new();
    let mut choice = vec![0usize; per_type.len()];
    loop {
        let perm: Vec<Vec<u8>> = per_type
            .iter()
            .zip(&choice)
            .enumerate()
            .map(|(t, (maps, &c))| {
                let mut table: Vec<u8> = (1..=sizes.size(t)).collect();
                for &(s, d) in &maps[c] {
                    table[s as usize - 1] = d;
                }
                table
            })
            .collect();
        let image = apply_permutation(spec, inv, &perm);
        if image != original {
            orbit.insert(image);
        }
        // Odometer over the per-type choices.
        let mut k = 0;
        loop {
            if k == choice.len() {
                return Ok(orbit.into_iter().collect());
            }
            choice[k] += 1;
            if choice[k] < per_type[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// Provisional classification from saturation: types filling every value
/// are treated as existential, the rest as universal.
pub fn provisional_quant_info(spec: &ProtocolSpec, inv: &ConcreteInvariant, sizes: &Concretization) -> QuantInfo {
    inv.param_values(spec)
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(t, v)| {
            let class = if v.len() >= sizes.size(t) as usize { QuantClass::Exists } else { QuantClass::Forall };
            (t, class)
        })
        .collect()
}

/// Classification treating every type as fully symmetric.
pub fn forall_quant_info(spec: &ProtocolSpec) -> QuantInfo {
    (0..spec.param_types.len()).map(|t| (t, QuantClass::Forall)).collect()
}
