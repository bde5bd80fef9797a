//! Hindley-Milner monotypes and first-order unification.
//!
//! Types are built from base constructors (`Float`, `Bool`, ...), type
//! variables `t0, t1, ...` and right-associative arrows. Unification produces
//! an idempotent [`Subst`]; the occurs check is enforced whenever a variable is
//! bound.

mod infer;

pub use infer::{infer, infer_in, type_at, Inference};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::Error;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Con(Arc<str>),
    Var(u32),
    Arrow(Box<Type>, Box<Type>),
}

impl Type {
    pub fn con(name: &str) -> Type {
        Type::Con(Arc::from(name))
    }

    pub fn float() -> Type {
        Type::con("Float")
    }

    pub fn bool() -> Type {
        Type::con("Bool")
    }

    pub fn arrow(param: Type, result: Type) -> Type {
        Type::Arrow(Box::new(param), Box::new(result))
    }

    /// Builds `a1 -> a2 -> ... -> result`.
    pub fn function(params: impl IntoIterator<Item = Type>, result: Type) -> Type {
        let params: Vec<Type> = params.into_iter().collect();
        params
            .into_iter()
            .rev()
            .fold(result, |acc, p| Type::arrow(p, acc))
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, Type::Arrow(..))
    }

    /// Number of arrows along the result spine.
    pub fn arity(&self) -> usize {
        match self {
            Type::Arrow(_, r) => 1 + r.arity(),
            _ => 0,
        }
    }

    /// The type left after applying every argument.
    pub fn yield_type(&self) -> &Type {
        match self {
            Type::Arrow(_, r) => r.yield_type(),
            t => t,
        }
    }

    /// Parameter types along the result spine, left to right.
    pub fn params(&self) -> Vec<&Type> {
        let mut out = Vec::new();
        let mut t = self;
        while let Type::Arrow(p, r) = t {
            out.push(p.as_ref());
            t = r;
        }
        out
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Type::Con(_) => true,
            Type::Var(_) => false,
            Type::Arrow(a, b) => a.is_ground() && b.is_ground(),
        }
    }

    pub fn occurs(&self, v: u32) -> bool {
        match self {
            Type::Con(_) => false,
            Type::Var(w) => *w == v,
            Type::Arrow(a, b) => a.occurs(v) || b.occurs(v),
        }
    }

    pub fn vars(&self, out: &mut Vec<u32>) {
        match self {
            Type::Con(_) => {}
            Type::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Type::Arrow(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    pub fn max_var(&self) -> Option<u32> {
        match self {
            Type::Con(_) => None,
            Type::Var(v) => Some(*v),
            Type::Arrow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Renames every variable apart using ids drawn from `next`.
    pub fn freshen(&self, next: &mut u32) -> Type {
        let mut vars = Vec::new();
        self.vars(&mut vars);
        if vars.is_empty() {
            return self.clone();
        }
        let mut s = Subst::default();
        for v in vars {
            s.map.insert(v, Type::Var(*next));
            *next += 1;
        }
        s.apply(self)
    }

    /// Renames variables to `t0, t1, ...` in order of first appearance.
    pub fn normalized(&self) -> Type {
        let mut vars = Vec::new();
        self.vars(&mut vars);
        let mut s = Subst::default();
        for (i, v) in vars.into_iter().enumerate() {
            s.map.insert(v, Type::Var(i as u32));
        }
        s.apply(self)
    }

    pub fn size(&self) -> usize {
        match self {
            Type::Arrow(a, b) => 1 + a.size() + b.size(),
            _ => 1,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Con(n) => write!(f, "{n}"),
            Type::Var(v) => write!(f, "t{v}"),
            Type::Arrow(a, b) => {
                if a.is_arrow() {
                    write!(f, "({a}) -> {b}")
                } else {
                    write!(f, "{a} -> {b}")
                }
            }
        }
    }
}

impl fmt::Debug for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Type {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

/// Parses `Float`, `t0`, `Bool -> t0 -> t0`, `(t0 -> t1) -> t1`.
pub fn parse_type(text: &str) -> Result<Type, Error> {
    let tokens = tokenize_type(text)?;
    let mut pos = 0;
    let ty = parse_arrow(&tokens, &mut pos, text)?;
    if pos != tokens.len() {
        return Err(Error::TypeSyntax(text.to_string()));
    }
    Ok(ty)
}

#[derive(Debug, Clone, PartialEq)]
enum TypeToken {
    Ident(String),
    Arrow,
    Open,
    Close,
}

fn tokenize_type(text: &str) -> Result<Vec<TypeToken>, Error> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                out.push(TypeToken::Open)
            }
            ')' => {
                chars.next();
                out.push(TypeToken::Close)
            }
            '-' => {
                chars.next();
                if chars.next() != Some('>') {
                    return Err(Error::TypeSyntax(text.to_string()));
                }
                out.push(TypeToken::Arrow)
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut id = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        id.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(TypeToken::Ident(id))
            }
            _ => return Err(Error::TypeSyntax(text.to_string())),
        }
    }
    Ok(out)
}

fn parse_arrow(tokens: &[TypeToken], pos: &mut usize, text: &str) -> Result<Type, Error> {
    let lhs = parse_atom(tokens, pos, text)?;
    if tokens.get(*pos) == Some(&TypeToken::Arrow) {
        *pos += 1;
        let rhs = parse_arrow(tokens, pos, text)?;
        Ok(Type::arrow(lhs, rhs))
    } else {
        Ok(lhs)
    }
}

fn parse_atom(tokens: &[TypeToken], pos: &mut usize, text: &str) -> Result<Type, Error> {
    match tokens.get(*pos) {
        Some(TypeToken::Open) => {
            *pos += 1;
            let t = parse_arrow(tokens, pos, text)?;
            if tokens.get(*pos) != Some(&TypeToken::Close) {
                return Err(Error::TypeSyntax(text.to_string()));
            }
            *pos += 1;
            Ok(t)
        }
        Some(TypeToken::Ident(id)) => {
            *pos += 1;
            if let Some(rest) = id.strip_prefix('t') {
                if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                    let v = rest
                        .parse()
                        .map_err(|_| Error::TypeSyntax(text.to_string()))?;
                    return Ok(Type::Var(v));
                }
            }
            Ok(Type::con(id))
        }
        _ => Err(Error::TypeSyntax(text.to_string())),
    }
}

/// A finite map from type variables to types.
///
/// Bindings are kept fully resolved: no right-hand side mentions a bound
/// variable, so applying the substitution once is enough.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Subst {
    map: BTreeMap<u32, Type>,
}

impl Subst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn get(&self, v: u32) -> Option<&Type> {
        self.map.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Type)> {
        self.map.iter().map(|(k, v)| (*k, v))
    }

    pub fn apply(&self, t: &Type) -> Type {
        if self.map.is_empty() {
            return t.clone();
        }
        match t {
            Type::Con(_) => t.clone(),
            Type::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Type::Arrow(a, b) => Type::arrow(self.apply(a), self.apply(b)),
        }
    }

    /// Adds `v ↦ t`, keeping the map idempotent. Fails on the occurs check.
    pub fn bind(&mut self, v: u32, t: Type) -> Result<(), UnifyError> {
        let t = self.apply(&t);
        if t == Type::Var(v) {
            return Ok(());
        }
        if t.occurs(v) {
            return Err(UnifyError::Occurs(v, t));
        }
        let single = Subst {
            map: BTreeMap::from([(v, t.clone())]),
        };
        for rhs in self.map.values_mut() {
            if rhs.occurs(v) {
                *rhs = single.apply(rhs);
            }
        }
        self.map.insert(v, t);
        Ok(())
    }

    /// Extends this substitution so that `a` and `b` become equal.
    pub fn unify(&mut self, a: &Type, b: &Type) -> Result<(), UnifyError> {
        let a = self.apply(a);
        let b = self.apply(b);
        self.unify_resolved(&a, &b)
    }

    fn unify_resolved(&mut self, a: &Type, b: &Type) -> Result<(), UnifyError> {
        match (a, b) {
            (Type::Var(x), Type::Var(y)) if x == y => Ok(()),
            (Type::Var(x), t) | (t, Type::Var(x)) => self.bind(*x, t.clone()),
            (Type::Con(x), Type::Con(y)) if x == y => Ok(()),
            (Type::Arrow(a1, r1), Type::Arrow(a2, r2)) => {
                self.unify_resolved(a1, a2)?;
                let r1 = self.apply(r1);
                let r2 = self.apply(r2);
                self.unify_resolved(&r1, &r2)
            }
            _ => Err(UnifyError::Clash(a.clone(), b.clone())),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Subst) -> Subst {
        let mut map: BTreeMap<u32, Type> = other
            .map
            .iter()
            .map(|(k, v)| (*k, self.apply(v)))
            .collect();
        for (k, v) in &self.map {
            map.entry(*k).or_insert_with(|| v.clone());
        }
        map.retain(|k, v| *v != Type::Var(*k));
        Subst { map }
    }
}

impl fmt::Debug for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "t{k} ↦ {v}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(u32, Type)> for Subst {
    fn from_iter<I: IntoIterator<Item = (u32, Type)>>(iter: I) -> Self {
        Subst {
            map: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnifyError {
    Clash(Type, Type),
    Occurs(u32, Type),
}

impl fmt::Display for UnifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnifyError::Clash(a, b) => write!(f, "cannot unify {a} with {b}"),
            UnifyError::Occurs(v, t) => write!(f, "t{v} occurs in {t}"),
        }
    }
}

/// Most general unifier of `a` and `b`, or `None` when they do not unify.
pub fn unify(a: &Type, b: &Type) -> Option<Subst> {
    let mut s = Subst::new();
    s.unify(a, b).ok()?;
    Some(s)
}

/// Every type a value of type `t` can take after applying `k` arguments,
/// for `k = 0..=arity`. The last entry is the yield type.
pub fn arg_suffixes(t: &Type) -> Vec<(usize, Type)> {
    let mut out = Vec::with_capacity(t.arity() + 1);
    let mut cur = t;
    let mut k = 0;
    loop {
        out.push((k, cur.clone()));
        match cur {
            Type::Arrow(_, r) => {
                cur = r;
                k += 1;
            }
            _ => break,
        }
    }
    out
}
