//! Program terms, the textual program format, AST locations and the edit
//! operator.
//!
//! Terms are purely applicative: application is binary and curried, so a call
//! `f a b` is the spine `App(App(f, a), b)`. Paths address nodes of that binary
//! tree with `0` for the function child and `1` for the argument child.

use std::fmt;
use std::sync::Arc;

use crate::dsl::Dsl;
use crate::error::{Error, Result};
use crate::types::Type;

/// A root-to-node path; `0` steps into the function child, `1` into the argument.
pub type Path = Vec<u8>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Prim(Arc<str>),
    /// Zero-based input index; printed as `x1, x2, ...`.
    Input(usize),
    App(Arc<Term>, Arc<Term>),
    Hole(Type),
}

impl Term {
    pub fn prim(name: &str) -> Term {
        Term::Prim(Arc::from(name))
    }

    pub fn input(index: usize) -> Term {
        Term::Input(index)
    }

    pub fn app(func: Term, arg: Term) -> Term {
        Term::App(Arc::new(func), Arc::new(arg))
    }

    /// `head a1 ... ak` as a left-nested spine.
    pub fn call(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    pub fn is_complete(&self) -> bool {
        match self {
            Term::Hole(_) => false,
            Term::App(f, a) => f.is_complete() && a.is_complete(),
            _ => true,
        }
    }

    /// Splits a spine into its head and arguments, left to right.
    pub fn spine(&self) -> (&Term, Vec<&Arc<Term>>) {
        let mut args = Vec::new();
        let mut t = self;
        while let Term::App(f, a) = t {
            args.push(a);
            t = f;
        }
        args.reverse();
        (t, args)
    }

    /// Number of nodes in the binary tree, counting application nodes.
    pub fn node_count(&self) -> usize {
        match self {
            Term::App(f, a) => 1 + f.node_count() + a.node_count(),
            _ => 1,
        }
    }

    pub fn first_hole(&self) -> Option<Path> {
        fn go(t: &Term, path: &mut Path) -> bool {
            match t {
                Term::Hole(_) => true,
                Term::App(f, a) => {
                    path.push(0);
                    if go(f, path) {
                        return true;
                    }
                    path.pop();
                    path.push(1);
                    if go(a, path) {
                        return true;
                    }
                    path.pop();
                    false
                }
                _ => false,
            }
        }
        let mut path = Vec::new();
        go(self, &mut path).then_some(path)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Prim(name) => f.write_str(name),
            Term::Input(i) => write!(f, "x{}", i + 1),
            Term::App(func, arg) => write!(f, "({func} {arg})"),
            Term::Hole(ty) if ty.is_arrow() => write!(f, "?:({ty})"),
            Term::Hole(ty) => write!(f, "?:{ty}"),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Canonical fully parenthesized text of a term.
pub fn print_program(t: &Term) -> String {
    t.to_string()
}

/// Parses a curried S-expression.
///
/// A parenthesized group `(a b c)` and a bare top-level sequence `a b c` both
/// mean `((a b) c)`, so the canonical output of [`print_program`] and the
/// outer-paren-free listings used in write-ups parse to the same term.
pub fn parse_program(text: &str, dsl: &Dsl, input_arity: usize) -> Result<Term> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Malformed("empty program".into()));
    }
    let mut pos = 0;
    let mut items = Vec::new();
    while pos < tokens.len() {
        items.push(parse_expr(&tokens, &mut pos, dsl, input_arity)?);
    }
    Ok(fold_apps(items))
}

fn fold_apps(items: Vec<Term>) -> Term {
    let mut it = items.into_iter();
    let head = it.next().expect("non-empty application");
    it.fold(head, Term::app)
}

fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(&text[s..i]);
            }
            if !c.is_whitespace() {
                out.push(&text[i..i + 1]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

fn parse_expr(tokens: &[&str], pos: &mut usize, dsl: &Dsl, arity: usize) -> Result<Term> {
    let tok = tokens[*pos];
    *pos += 1;
    match tok {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err(Error::Malformed("unclosed `(`".into())),
                    Some(&")") => {
                        *pos += 1;
                        break;
                    }
                    Some(_) => items.push(parse_expr(tokens, pos, dsl, arity)?),
                }
            }
            if items.is_empty() {
                return Err(Error::Malformed("empty application `()`".into()));
            }
            Ok(fold_apps(items))
        }
        ")" => Err(Error::Malformed("unexpected `)`".into())),
        ident => resolve(ident, dsl, arity),
    }
}

fn resolve(ident: &str, dsl: &Dsl, arity: usize) -> Result<Term> {
    if let Some(entry) = dsl.get(ident) {
        return Ok(Term::Prim(entry.name.clone()));
    }
    if let Some(n) = ident.strip_prefix('x') {
        if let Ok(k) = n.parse::<usize>() {
            if k >= 1 && k <= arity {
                return Ok(Term::Input(k - 1));
            }
            if k >= 1 {
                return Err(Error::UnboundInput {
                    name: ident.to_string(),
                    arity,
                });
            }
        }
    }
    Err(Error::UnknownIdentifier(ident.to_string()))
}

/// The subterm at `path`.
pub fn expr_at<'a>(t: &'a Term, path: &[u8]) -> Result<&'a Term> {
    let mut cur = t;
    for (i, step) in path.iter().enumerate() {
        cur = match (cur, step) {
            (Term::App(f, _), 0) => f,
            (Term::App(_, a), 1) => a,
            _ => return Err(Error::InvalidPath(path[..=i].to_vec())),
        };
    }
    Ok(cur)
}

/// Like [`expr_at`] but returns the shared node itself.
pub fn expr_at_arc(root: &Arc<Term>, path: &[u8]) -> Result<Arc<Term>> {
    let mut cur = root;
    for (i, step) in path.iter().enumerate() {
        cur = match (cur.as_ref(), step) {
            (Term::App(f, _), 0) => f,
            (Term::App(_, a), 1) => a,
            _ => return Err(Error::InvalidPath(path[..=i].to_vec())),
        };
    }
    Ok(cur.clone())
}

/// One or more pairwise-disjoint paths that are edited together.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Location {
    pub paths: Vec<Path>,
}

impl Location {
    pub fn single(path: Path) -> Location {
        Location { paths: vec![path] }
    }

    pub fn new(paths: Vec<Path>) -> Location {
        Location { paths }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    fn check_disjoint(&self) -> Result<()> {
        for (i, p) in self.paths.iter().enumerate() {
            for q in &self.paths[i + 1..] {
                if !disjoint(p, q) {
                    return Err(Error::OverlappingPaths(p.clone(), q.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Neither path is a prefix of the other.
pub fn disjoint(p: &[u8], q: &[u8]) -> bool {
    let n = p.len().min(q.len());
    p[..n] != q[..n]
}

/// Replaces the subterm at every path of `l` with the matching replacement.
pub fn edit(t: &Term, l: &Location, replacements: &[Term]) -> Result<Term> {
    let root = Arc::new(t.clone());
    let repl: Vec<Arc<Term>> = replacements.iter().cloned().map(Arc::new).collect();
    let out = edit_arc(&root, l, &repl)?;
    Ok(Arc::try_unwrap(out).unwrap_or_else(|a| (*a).clone()))
}

/// [`edit`] over shared nodes: untouched subtrees keep their identity.
pub fn edit_arc(root: &Arc<Term>, l: &Location, replacements: &[Arc<Term>]) -> Result<Arc<Term>> {
    if l.paths.len() != replacements.len() {
        return Err(Error::ReplacementCount {
            paths: l.paths.len(),
            replacements: replacements.len(),
        });
    }
    l.check_disjoint()?;
    let mut cur = root.clone();
    for (p, q) in l.paths.iter().zip(replacements) {
        cur = replace_at(&cur, p, 0, q)?;
    }
    Ok(cur)
}

fn replace_at(node: &Arc<Term>, path: &[u8], depth: usize, q: &Arc<Term>) -> Result<Arc<Term>> {
    if depth == path.len() {
        return Ok(q.clone());
    }
    match (node.as_ref(), path[depth]) {
        (Term::App(f, a), 0) => Ok(Arc::new(Term::App(replace_at(f, path, depth + 1, q)?, a.clone()))),
        (Term::App(f, a), 1) => Ok(Arc::new(Term::App(f.clone(), replace_at(a, path, depth + 1, q)?))),
        _ => Err(Error::InvalidPath(path[..=depth].to_vec())),
    }
}

/// Tree depth with a call spine counted as one level: leaves are 1 and
/// `f a1 ... ak` is `1 + max(depth(ai))`.
pub fn depth(t: &Term) -> usize {
    let (_, args) = t.spine();
    1 + args.iter().map(|a| depth(a)).max().unwrap_or(0)
}

/// Number of primitive and input occurrences.
pub fn token_count(t: &Term) -> usize {
    match t {
        Term::Prim(_) | Term::Input(_) => 1,
        Term::App(f, a) => token_count(f) + token_count(a),
        Term::Hole(_) => 0,
    }
}

/// Every node path in preorder (node, function child, argument child).
pub fn paths(t: &Term) -> Vec<Path> {
    fn go(t: &Term, cur: &mut Path, out: &mut Vec<Path>) {
        out.push(cur.clone());
        if let Term::App(f, a) = t {
            cur.push(0);
            go(f, cur, out);
            cur.pop();
            cur.push(1);
            go(a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(t, &mut Vec::new(), &mut out);
    out
}

/// Edit locations with up to `n` simultaneous disjoint paths.
///
/// Singletons come first in preorder, followed by pairs, triples, ... each in
/// lexicographic order of their preorder indices.
pub fn locations(t: &Term, n: usize) -> Vec<Location> {
    let all = paths(t);
    let mut out: Vec<Location> = all.iter().cloned().map(Location::single).collect();
    let mut frontier: Vec<Vec<usize>> = (0..all.len()).map(|i| vec![i]).collect();
    for _ in 1..n {
        let mut next = Vec::new();
        for combo in &frontier {
            let last = *combo.last().unwrap();
            for j in last + 1..all.len() {
                if combo.iter().all(|&i| disjoint(&all[i], &all[j])) {
                    let mut c = combo.clone();
                    c.push(j);
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend(
            next.iter()
                .map(|c| Location::new(c.iter().map(|&i| all[i].clone()).collect())),
        );
        frontier = next;
    }
    out
}
