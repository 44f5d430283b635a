//! Pretty-printer producing sources that parse back to the same spec.

use std::fmt::Write;

use super::ast::*;

fn term(spec: &ProtocolSpec, scope: &[Binder], t: &Term) -> String {
    match t {
        Term::Var { var, index } => {
            let mut s = spec.vars[*var].name.clone();
            for slot in index {
                let _ = write!(s, "[{}]", scope[*slot].name);
            }
            s
        }
        Term::Bound(slot) => scope[*slot].name.clone(),
        Term::Const(Const::Bool(b)) => b.to_string(),
        Term::Const(Const::Enum { decl, member }) => spec.enums[*decl].members[*member].clone(),
    }
}

fn lit(spec: &ProtocolSpec, scope: &[Binder], l: &Lit) -> String {
    let op = if l.positive { "=" } else { "!=" };
    format!("{} {op} {}", term(spec, scope, &l.lhs), term(spec, scope, &l.rhs))
}

fn binders(spec: &ProtocolSpec, bs: &[Binder]) -> String {
    bs.iter()
        .map(|b| format!("{} : {}", b.name, spec.param_types[b.ty]))
        .collect::<Vec<_>>()
        .join(", ")
}

fn header(spec: &ProtocolSpec, bs: &[Binder], distinct: &[(usize, usize)]) -> String {
    let mut s = String::new();
    if !bs.is_empty() {
        let _ = write!(s, "({})", binders(spec, bs));
    }
    if !distinct.is_empty() {
        let conds: Vec<String> = distinct
            .iter()
            .map(|(a, b)| format!("{} != {}", bs[*a].name, bs[*b].name))
            .collect();
        let _ = write!(s, " where {}", conds.join(" & "));
    }
    s
}

/// Renders a spec in the `.pv` surface syntax.
pub fn print_protocol(spec: &ProtocolSpec) -> String {
    let mut out = String::new();
    for t in &spec.param_types {
        let _ = writeln!(out, "type {t};");
    }
    for e in &spec.enums {
        let _ = writeln!(out, "enum {} {{ {} }};", e.name, e.members.join(", "));
    }
    for v in &spec.vars {
        let sort = match v.sort {
            Sort::Bool => "boolean".to_string(),
            Sort::Enum(e) => spec.enums[e].name.clone(),
            Sort::Param(t) => spec.param_types[t].clone(),
        };
        if v.index.is_empty() {
            let _ = writeln!(out, "var {} : {sort};", v.name);
        } else {
            let dims: String = v.index.iter().map(|t| format!("[{}]", spec.param_types[*t])).collect();
            let _ = writeln!(out, "var {} : array{dims} of {sort};", v.name);
        }
    }
    if !spec.init.is_empty() {
        out.push_str("init {\n");
        for item in &spec.init {
            if item.binders.is_empty() {
                let _ = writeln!(out, "  {};", lit(spec, &item.binders, &item.lit));
            } else {
                let _ = writeln!(
                    out,
                    "  forall {} . {};",
                    binders(spec, &item.binders),
                    lit(spec, &item.binders, &item.lit)
                );
            }
        }
        out.push_str("}\n");
    }
    for r in &spec.rules {
        let guard = if r.guard.is_empty() {
            "true".to_string()
        } else {
            r.guard
                .iter()
                .map(|g| match g {
                    GuardItem::Lit(l) => lit(spec, &r.binders, l),
                    GuardItem::Forall { binder, lit: l } => {
                        let mut scope = r.binders.clone();
                        scope.push(binder.clone());
                        format!(
                            "forall {} : {} . {}",
                            binder.name,
                            spec.param_types[binder.ty],
                            lit(spec, &scope, l)
                        )
                    }
                })
                .collect::<Vec<_>>()
                .join(" & ")
        };
        let action = if r.action.is_empty() {
            "skip".to_string()
        } else {
            r.action
                .iter()
                .map(|a| format!("{} := {}", term(spec, &r.binders, &a.target), term(spec, &r.binders, &a.value)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(
            out,
            "rule {}{} guard {guard} action {action};",
            r.name,
            header(spec, &r.binders, &r.distinct)
        );
    }
    for p in &spec.properties {
        let body = match &p.body {
            None => "true".to_string(),
            Some(lits) => format!(
                "!({})",
                lits.iter().map(|l| lit(spec, &p.binders, l)).collect::<Vec<_>>().join(" & ")
            ),
        };
        let _ = writeln!(
            out,
            "invariant {}{} : {body};",
            p.name,
            header(spec, &p.binders, &p.distinct)
        );
    }
    out
}
