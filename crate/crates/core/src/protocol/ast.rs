//! Abstract syntax of the protocol language.

use serde::{Deserialize, Serialize};

/// Index of a declared parameter type in [`ProtocolSpec::param_types`].
pub type TypeId = usize;
/// Index of a declared state variable in [`ProtocolSpec::vars`].
pub type VarId = usize;

/// Sort of a state variable's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sort {
    Bool,
    Enum(usize),
    Param(TypeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumDecl {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    /// Parameter types of the index slots, at most two.
    pub index: Vec<TypeId>,
    pub sort: Sort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binder {
    pub name: String,
    pub ty: TypeId,
}

/// A constant value of a boolean or enum sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Const {
    Bool(bool),
    Enum { decl: usize, member: usize },
}

/// A term inside a guard, action, init or property.
///
/// `Bound(k)` refers to slot `k` of the enclosing scope: the rule or property
/// binders first, followed by any quantifier-local binders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Var { var: VarId, index: Vec<usize> },
    Bound(usize),
    Const(Const),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lit {
    pub lhs: Term,
    pub rhs: Term,
    /// `true` for `=`, `false` for `!=`.
    pub positive: bool,
}

/// Item of an `init { ... }` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitItem {
    /// Universally quantified binders; slots `0..binders.len()`.
    pub binders: Vec<Binder>,
    pub lit: Lit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardItem {
    Lit(Lit),
    /// `forall b : T . lit`; the quantified binder occupies the slot right
    /// after the rule binders.
    Forall { binder: Binder, lit: Lit },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assign {
    pub target: Term,
    pub value: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub binders: Vec<Binder>,
    /// Pairs of binder slots required to take distinct values.
    pub distinct: Vec<(usize, usize)>,
    pub guard: Vec<GuardItem>,
    pub action: Vec<Assign>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyProperty {
    pub name: String,
    pub binders: Vec<Binder>,
    pub distinct: Vec<(usize, usize)>,
    /// Literals of the negated conjunction; `None` for the trivial property `true`.
    pub body: Option<Vec<Lit>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub param_types: Vec<String>,
    pub enums: Vec<EnumDecl>,
    pub vars: Vec<VarDecl>,
    pub init: Vec<InitItem>,
    pub rules: Vec<Rule>,
    pub properties: Vec<SafetyProperty>,
}

impl ProtocolSpec {
    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.param_types.iter().position(|t| t == name)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn property(&self, name: &str) -> Option<&SafetyProperty> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Looks up an enum member by name across all enum declarations.
    pub fn enum_member(&self, name: &str) -> Option<Const> {
        self.enums.iter().enumerate().find_map(|(decl, e)| {
            e.members
                .iter()
                .position(|m| m == name)
                .map(|member| Const::Enum { decl, member })
        })
    }

    /// Number of values of a sort at the given parameter sizes.
    pub fn sort_size(&self, sort: Sort, sizes: &[u8]) -> usize {
        match sort {
            Sort::Bool => 2,
            Sort::Enum(e) => self.enums[e].members.len(),
            Sort::Param(t) => sizes[t] as usize,
        }
    }

    /// Renders a stored value of `sort`: booleans and enum members by name,
    /// parameter values as their 1-based number.
    pub fn value_name(&self, sort: Sort, value: u8) -> String {
        match sort {
            Sort::Bool => if value == 0 { "false" } else { "true" }.to_string(),
            Sort::Enum(e) => self.enums[e].members[value as usize].clone(),
            Sort::Param(_) => value.to_string(),
        }
    }
}

impl Const {
    /// Encoded value: booleans as 0/1, enum members by position.
    pub fn encode(self) -> u8 {
        match self {
            Const::Bool(b) => b as u8,
            Const::Enum { member, .. } => member as u8,
        }
    }

    pub fn sort(self) -> Sort {
        match self {
            Const::Bool(_) => Sort::Bool,
            Const::Enum { decl, .. } => Sort::Enum(decl),
        }
    }
}
