//! Lexer and recursive-descent parser for `.pv` protocol sources.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnresolvedIdentifier,
    DuplicateDeclaration,
    ArityMismatch,
    TypeMismatch,
    Malformed,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnresolvedIdentifier => "unresolved identifier",
            ParseErrorKind::DuplicateDeclaration => "duplicate declaration",
            ParseErrorKind::ArityMismatch => "arity mismatch",
            ParseErrorKind::TypeMismatch => "type mismatch",
            ParseErrorKind::Malformed => "malformed declaration",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{line}:{col}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Semi,
    Comma,
    Colon,
    Dot,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Eq,
    Neq,
    Assign,
    And,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Neq => f.write_str("`!=`"),
            Tok::Assign => f.write_str("`:=`"),
            Tok::And => f.write_str("`&`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok: Tok, n: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: l0, col: c0 });
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            ';' => push(Tok::Semi, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '[' => push(Tok::LBracket, 1, &mut i, &mut col),
            ']' => push(Tok::RBracket, 1, &mut i, &mut col),
            '{' => push(Tok::LBrace, 1, &mut i, &mut col),
            '}' => push(Tok::RBrace, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '&' => push(Tok::And, 1, &mut i, &mut col),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            ':' if chars.get(i + 1) == Some(&'=') => push(Tok::Assign, 2, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            '!' if chars.get(i + 1) == Some(&'=') => push(Tok::Neq, 2, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            c if c.is_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Spanned { tok: Tok::Ident(word), line: l0, col: c0 });
            }
            other => {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax,
                    message: format!("unexpected character `{other}`"),
                    line,
                    col,
                })
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "type", "enum", "var", "array", "of", "boolean", "init", "forall", "rule", "guard", "action",
    "invariant", "where", "true", "false", "skip",
];

/// Parses and validates a protocol source.
pub fn parse_protocol(src: &str) -> Result<ProtocolSpec, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        spec: ProtocolSpec {
            param_types: vec![],
            enums: vec![],
            vars: vec![],
            init: vec![],
            rules: vec![],
            properties: vec![],
        },
        names: HashSet::new(),
    };
    p.parse_all()?;
    Ok(p.spec)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    spec: ProtocolSpec,
    /// Global identifiers: types, enums, members, variables, rules, invariants.
    names: HashSet<String>,
}

/// Scope of binders visible inside a rule, property, init item or quantifier.
#[derive(Clone, Default)]
struct Scope {
    binders: Vec<Binder>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<usize> {
        self.binders.iter().rposition(|b| b.name == name)
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn err_at(&self, kind: ParseErrorKind, message: impl Into<String>, at: (usize, usize)) -> ParseError {
        ParseError { kind, message: message.into(), line: at.0, col: at.1 }
    }

    fn err(&self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        self.err_at(kind, message, self.here())
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(ParseErrorKind::Syntax, format!("expected {tok}, found {}", self.peek())))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(ParseErrorKind::Syntax, format!("expected `{kw}`, found {}", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<(String, (usize, usize)), ParseError> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok((s, at))
            }
            t => Err(self.err(ParseErrorKind::Syntax, format!("expected identifier, found {t}"))),
        }
    }

    fn declare(&mut self, name: &str, at: (usize, usize)) -> Result<(), ParseError> {
        if !self.names.insert(name.to_string()) {
            return Err(self.err_at(
                ParseErrorKind::DuplicateDeclaration,
                format!("`{name}` is already declared"),
                at,
            ));
        }
        Ok(())
    }

    fn parse_all(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            return Err(self.err(ParseErrorKind::Syntax, "expected declaration"));
        }
        while *self.peek() != Tok::Eof {
            match self.peek() {
                Tok::Ident(k) if k == "type" => self.type_decl()?,
                Tok::Ident(k) if k == "enum" => self.enum_decl()?,
                Tok::Ident(k) if k == "var" => self.var_decl()?,
                Tok::Ident(k) if k == "init" => self.init_block()?,
                Tok::Ident(k) if k == "rule" => self.rule_decl()?,
                Tok::Ident(k) if k == "invariant" => self.invariant_decl()?,
                t => {
                    return Err(self.err(
                        ParseErrorKind::Syntax,
                        format!("expected declaration, found {t}"),
                    ))
                }
            }
        }
        Ok(())
    }

    fn type_decl(&mut self) -> Result<(), ParseError> {
        self.expect_kw("type")?;
        let (name, at) = self.ident()?;
        self.declare(&name, at)?;
        self.expect(Tok::Semi)?;
        self.spec.param_types.push(name);
        Ok(())
    }

    fn enum_decl(&mut self) -> Result<(), ParseError> {
        self.expect_kw("enum")?;
        let (name, at) = self.ident()?;
        self.declare(&name, at)?;
        self.expect(Tok::LBrace)?;
        let mut members = Vec::new();
        loop {
            let (m, at) = self.ident()?;
            self.declare(&m, at)?;
            members.push(m);
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        self.expect(Tok::Semi)?;
        if members.len() > u8::MAX as usize {
            return Err(self.err_at(ParseErrorKind::Malformed, "too many enum members", at));
        }
        self.spec.enums.push(EnumDecl { name, members });
        Ok(())
    }

    fn param_type(&mut self) -> Result<TypeId, ParseError> {
        let (t, at) = self.ident()?;
        self.spec.type_id(&t).ok_or_else(|| {
            self.err_at(
                ParseErrorKind::UnresolvedIdentifier,
                format!("unknown parameter type `{t}`"),
                at,
            )
        })
    }

    fn var_decl(&mut self) -> Result<(), ParseError> {
        self.expect_kw("var")?;
        let (name, at) = self.ident()?;
        self.declare(&name, at)?;
        self.expect(Tok::Colon)?;
        let mut index = Vec::new();
        if self.eat_kw("array") {
            self.expect(Tok::LBracket)?;
            index.push(self.param_type()?);
            loop {
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                        index.push(self.param_type()?);
                    }
                    Tok::RBracket => {
                        self.bump();
                        if *self.peek() == Tok::LBracket {
                            self.bump();
                            index.push(self.param_type()?);
                        } else {
                            break;
                        }
                    }
                    t => {
                        return Err(self.err(
                            ParseErrorKind::Syntax,
                            format!("expected `]` or `,`, found {t}"),
                        ))
                    }
                }
            }
            self.expect_kw("of")?;
        }
        if index.len() > 2 {
            return Err(self.err_at(
                ParseErrorKind::Malformed,
                format!("`{name}` has {} index dimensions; at most 2 are supported", index.len()),
                at,
            ));
        }
        let sort = if self.eat_kw("boolean") {
            Sort::Bool
        } else {
            let (s, sat) = self.ident()?;
            if let Some(e) = self.spec.enums.iter().position(|e| e.name == s) {
                Sort::Enum(e)
            } else if let Some(t) = self.spec.type_id(&s) {
                Sort::Param(t)
            } else {
                return Err(self.err_at(
                    ParseErrorKind::UnresolvedIdentifier,
                    format!("unknown sort `{s}`"),
                    sat,
                ));
            }
        };
        self.expect(Tok::Semi)?;
        self.spec.vars.push(VarDecl { name, index, sort });
        Ok(())
    }

    fn binder(&mut self, scope: &Scope) -> Result<Binder, ParseError> {
        let (name, at) = self.ident()?;
        if scope.lookup(&name).is_some() {
            return Err(self.err_at(
                ParseErrorKind::DuplicateDeclaration,
                format!("binder `{name}` is already bound"),
                at,
            ));
        }
        self.expect(Tok::Colon)?;
        let ty = self.param_type()?;
        Ok(Binder { name, ty })
    }

    fn binder_list(&mut self) -> Result<Scope, ParseError> {
        let mut scope = Scope::default();
        if *self.peek() == Tok::LParen {
            self.bump();
            if *self.peek() != Tok::RParen {
                loop {
                    let b = self.binder(&scope)?;
                    scope.binders.push(b);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok(scope)
    }

    fn where_clause(&mut self, scope: &Scope) -> Result<Vec<(usize, usize)>, ParseError> {
        let mut out = Vec::new();
        if !self.eat_kw("where") {
            return Ok(out);
        }
        loop {
            let (a, aat) = self.ident()?;
            self.expect(Tok::Neq)?;
            let (b, bat) = self.ident()?;
            let ia = scope.lookup(&a).ok_or_else(|| {
                self.err_at(ParseErrorKind::UnresolvedIdentifier, format!("unknown binder `{a}`"), aat)
            })?;
            let ib = scope.lookup(&b).ok_or_else(|| {
                self.err_at(ParseErrorKind::UnresolvedIdentifier, format!("unknown binder `{b}`"), bat)
            })?;
            if scope.binders[ia].ty != scope.binders[ib].ty || ia == ib {
                return Err(self.err_at(
                    ParseErrorKind::TypeMismatch,
                    format!("`{a} != {b}` must relate two distinct binders of one type"),
                    aat,
                ));
            }
            out.push((ia.min(ib), ia.max(ib)));
            if matches!(self.peek(), Tok::And | Tok::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn term(&mut self, scope: &Scope) -> Result<(Term, (usize, usize)), ParseError> {
        let at = self.here();
        if self.eat_kw("true") {
            return Ok((Term::Const(Const::Bool(true)), at));
        }
        if self.eat_kw("false") {
            return Ok((Term::Const(Const::Bool(false)), at));
        }
        let (name, at) = self.ident()?;
        if let Some(slot) = scope.lookup(&name) {
            if *self.peek() == Tok::LBracket {
                return Err(self.err(ParseErrorKind::ArityMismatch, format!("binder `{name}` cannot be indexed")));
            }
            return Ok((Term::Bound(slot), at));
        }
        if let Some(var) = self.spec.var_id(&name) {
            let mut index = Vec::new();
            while *self.peek() == Tok::LBracket {
                self.bump();
                let (b, bat) = self.ident()?;
                let slot = scope.lookup(&b).ok_or_else(|| {
                    self.err_at(ParseErrorKind::UnresolvedIdentifier, format!("unknown binder `{b}`"), bat)
                })?;
                let expected = self.spec.vars[var].index.get(index.len()).copied();
                match expected {
                    None => {
                        return Err(self.err_at(
                            ParseErrorKind::ArityMismatch,
                            format!(
                                "`{name}` takes {} index(es)",
                                self.spec.vars[var].index.len()
                            ),
                            bat,
                        ))
                    }
                    Some(t) if t != scope.binders[slot].ty => {
                        return Err(self.err_at(
                            ParseErrorKind::TypeMismatch,
                            format!(
                                "index `{b}` has type {}, expected {}",
                                self.spec.param_types[scope.binders[slot].ty],
                                self.spec.param_types[t]
                            ),
                            bat,
                        ))
                    }
                    Some(_) => {}
                }
                index.push(slot);
                self.expect(Tok::RBracket)?;
            }
            if index.len() != self.spec.vars[var].index.len() {
                return Err(self.err_at(
                    ParseErrorKind::ArityMismatch,
                    format!(
                        "`{name}` takes {} index(es), found {}",
                        self.spec.vars[var].index.len(),
                        index.len()
                    ),
                    at,
                ));
            }
            return Ok((Term::Var { var, index }, at));
        }
        if let Some(c) = self.spec.enum_member(&name) {
            return Ok((Term::Const(c), at));
        }
        Err(self.err_at(
            ParseErrorKind::UnresolvedIdentifier,
            format!("unknown identifier `{name}`"),
            at,
        ))
    }

    fn term_sort(&self, t: &Term, scope: &Scope) -> Sort {
        match t {
            Term::Var { var, .. } => self.spec.vars[*var].sort,
            Term::Bound(s) => Sort::Param(scope.binders[*s].ty),
            Term::Const(c) => c.sort(),
        }
    }

    fn lit(&mut self, scope: &Scope) -> Result<Lit, ParseError> {
        let (lhs, at) = self.term(scope)?;
        let positive = match self.peek() {
            Tok::Eq => true,
            Tok::Neq => false,
            t => {
                return Err(self.err(ParseErrorKind::Syntax, format!("expected `=` or `!=`, found {t}")));
            }
        };
        self.bump();
        let (rhs, _) = self.term(scope)?;
        if self.term_sort(&lhs, scope) != self.term_sort(&rhs, scope) {
            return Err(self.err_at(ParseErrorKind::TypeMismatch, "operands have different sorts", at));
        }
        // Keep the state variable on the left when there is one.
        let (lhs, rhs) = match (&lhs, &rhs) {
            (Term::Var { .. }, _) => (lhs, rhs),
            (_, Term::Var { .. }) => (rhs, lhs),
            _ => (lhs, rhs),
        };
        Ok(Lit { lhs, rhs, positive })
    }

    fn init_block(&mut self) -> Result<(), ParseError> {
        self.expect_kw("init")?;
        self.expect(Tok::LBrace)?;
        while *self.peek() != Tok::RBrace {
            let at = self.here();
            let mut scope = Scope::default();
            if self.eat_kw("forall") {
                loop {
                    let b = self.binder(&scope)?;
                    scope.binders.push(b);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Dot)?;
            }
            let lit = self.lit(&scope)?;
            if !lit.positive || !matches!(lit.lhs, Term::Var { .. }) || matches!(lit.rhs, Term::Var { .. }) {
                return Err(self.err_at(
                    ParseErrorKind::Malformed,
                    "init literals must have the form `var = value`",
                    at,
                ));
            }
            self.expect(Tok::Semi)?;
            self.spec.init.push(InitItem { binders: scope.binders, lit });
        }
        self.expect(Tok::RBrace)?;
        if *self.peek() == Tok::Semi {
            self.bump();
        }
        Ok(())
    }

    fn rule_decl(&mut self) -> Result<(), ParseError> {
        self.expect_kw("rule")?;
        let (name, at) = self.ident()?;
        self.declare(&name, at)?;
        let scope = self.binder_list()?;
        let distinct = self.where_clause(&scope)?;
        self.expect_kw("guard")?;
        let mut guard = Vec::new();
        if !self.eat_kw("true") {
            let mut seen_forall = false;
            loop {
                let gat = self.here();
                if self.eat_kw("forall") {
                    if seen_forall {
                        return Err(self.err_at(
                            ParseErrorKind::Malformed,
                            "at most one quantified guard literal is supported",
                            gat,
                        ));
                    }
                    seen_forall = true;
                    let b = self.binder(&scope)?;
                    self.expect(Tok::Dot)?;
                    let mut inner = scope.clone();
                    inner.binders.push(b.clone());
                    let lit = self.lit(&inner)?;
                    guard.push(GuardItem::Forall { binder: b, lit });
                } else {
                    guard.push(GuardItem::Lit(self.lit(&scope)?));
                }
                if *self.peek() == Tok::And {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_kw("action")?;
        let mut action: Vec<Assign> = Vec::new();
        if !self.eat_kw("skip") {
            loop {
                let (target, tat) = self.term(&scope)?;
                if !matches!(target, Term::Var { .. }) {
                    return Err(self.err_at(
                        ParseErrorKind::Malformed,
                        "assignment target must be a state variable",
                        tat,
                    ));
                }
                if action.iter().any(|a| a.target == target) {
                    return Err(self.err_at(
                        ParseErrorKind::Malformed,
                        "state variable assigned twice in one rule",
                        tat,
                    ));
                }
                self.expect(Tok::Assign)?;
                let (value, vat) = self.term(&scope)?;
                if self.term_sort(&target, &scope) != self.term_sort(&value, &scope) {
                    return Err(self.err_at(ParseErrorKind::TypeMismatch, "assigned value has a different sort", vat));
                }
                action.push(Assign { target, value });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Semi)?;
        self.spec.rules.push(Rule { name, binders: scope.binders, distinct, guard, action });
        Ok(())
    }

    fn invariant_decl(&mut self) -> Result<(), ParseError> {
        self.expect_kw("invariant")?;
        let (name, at) = self.ident()?;
        self.declare(&name, at)?;
        let scope = self.binder_list()?;
        let distinct = self.where_clause(&scope)?;
        self.expect(Tok::Colon)?;
        let body = if self.eat_kw("true") {
            None
        } else {
            self.expect(Tok::Bang)?;
            self.expect(Tok::LParen)?;
            let mut lits = Vec::new();
            loop {
                let lat = self.here();
                let lit = self.lit(&scope)?;
                if !lit.positive || !matches!(lit.lhs, Term::Var { .. }) || matches!(lit.rhs, Term::Var { .. }) {
                    return Err(self.err_at(
                        ParseErrorKind::Malformed,
                        "invariant literals must have the form `var = value`",
                        lat,
                    ));
                }
                lits.push(lit);
                if *self.peek() == Tok::And {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
            Some(lits)
        };
        self.expect(Tok::Semi)?;
        self.spec.properties.push(SafetyProperty { name, binders: scope.binders, distinct, body });
        Ok(())
    }
}
