//! Independent reference implementations shared by the integration and
//! acceptance tests. The unification oracle never calls the unifier, and
//! the enumeration oracle filters by types computed with it.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use tnsynth::lang::print_program;
use tnsynth::types::infer;
use tnsynth::{Dsl, Subst, Term, Type};

// ---------------------------------------------------------------- types

/// Node count: constructors and variables are 1, an arrow adds 1.
pub fn size(t: &Type) -> usize {
    match t {
        Type::Arrow(a, b) => 1 + size(a) + size(b),
        _ => 1,
    }
}

/// Random type of at most `max_size` nodes over Float, Bool and `t0..t{vars-1}`.
pub fn random_type<R: Rng>(rng: &mut R, max_size: usize, vars: u32) -> Type {
    if max_size < 3 || rng.gen_bool(0.4) {
        return match rng.gen_range(0..4) {
            0 => Type::float(),
            1 => Type::bool(),
            _ => Type::Var(rng.gen_range(0..vars.max(1))),
        };
    }
    let left = rng.gen_range(1..=max_size - 2);
    let a = random_type(rng, left, vars);
    let b = random_type(rng, max_size - 1 - size(&a), vars);
    Type::arrow(a, b)
}

pub fn vars_of(t: &Type, out: &mut BTreeSet<u32>) {
    match t {
        Type::Var(v) => {
            out.insert(*v);
        }
        Type::Arrow(a, b) => {
            vars_of(a, out);
            vars_of(b, out);
        }
        Type::Con(_) => {}
    }
}

pub fn substitute(map: &BTreeMap<u32, Type>, t: &Type) -> Type {
    match t {
        Type::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
        Type::Arrow(a, b) => Type::arrow(substitute(map, a), substitute(map, b)),
        Type::Con(_) => t.clone(),
    }
}

/// Every ground type over Float and Bool with at most `max_size` nodes.
pub fn ground_types(max_size: usize) -> Vec<Type> {
    let mut by_size: Vec<Vec<Type>> = vec![Vec::new(); max_size + 1];
    if max_size >= 1 {
        by_size[1] = vec![Type::float(), Type::bool()];
    }
    for n in 3..=max_size {
        let mut here = Vec::new();
        for l in 1..n - 1 {
            let r = n - 1 - l;
            for a in &by_size[l] {
                for b in &by_size[r] {
                    here.push(Type::arrow(a.clone(), b.clone()));
                }
            }
        }
        by_size[n] = here;
    }
    by_size.into_iter().flatten().collect()
}

/// Searches ground assignments from `universe` for the variables of `a` and
/// `b` that make them equal.
pub fn brute_unifier(a: &Type, b: &Type, universe: &[Type]) -> Option<BTreeMap<u32, Type>> {
    let mut vs = BTreeSet::new();
    vars_of(a, &mut vs);
    vars_of(b, &mut vs);
    let vs: Vec<u32> = vs.into_iter().collect();
    let slots = vs.iter().max().map_or(0, |v| *v as usize + 1);
    let mut idx = vec![0usize; vs.len()];
    let mut sigma: Vec<Option<&Type>> = vec![None; slots];
    loop {
        for (v, i) in vs.iter().zip(&idx) {
            sigma[*v as usize] = Some(&universe[*i]);
        }
        if equal_under(a, b, &sigma) {
            return Some(vs.iter().map(|v| (*v, sigma[*v as usize].unwrap().clone())).collect());
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return None;
            }
            idx[k] += 1;
            if idx[k] < universe.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Structural equality after replacing variables by the ground types in `sigma`.
fn equal_under<'a>(a: &'a Type, b: &'a Type, sigma: &[Option<&'a Type>]) -> bool {
    let resolve = |t: &'a Type| match t {
        Type::Var(v) => sigma[*v as usize].expect("every variable is assigned"),
        _ => t,
    };
    match (resolve(a), resolve(b)) {
        (Type::Con(x), Type::Con(y)) => x == y,
        (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) => equal_under(a1, b1, sigma) && equal_under(a2, b2, sigma),
        _ => false,
    }
}

/// Whether `specific` is a substitution instance of `general`.
pub fn is_instance(general: &Type, specific: &Type) -> bool {
    fn go(g: &Type, s: &Type, m: &mut BTreeMap<u32, Type>) -> bool {
        match (g, s) {
            (Type::Var(v), _) => match m.get(v) {
                Some(bound) => bound == s,
                None => {
                    m.insert(*v, s.clone());
                    true
                }
            },
            (Type::Con(x), Type::Con(y)) => x == y,
            (Type::Arrow(a1, b1), Type::Arrow(a2, b2)) => go(a1, a2, m) && go(b1, b2, m),
            _ => false,
        }
    }
    go(general, specific, &mut BTreeMap::new())
}

pub fn occurs(v: u32, t: &Type) -> bool {
    match t {
        Type::Var(w) => *w == v,
        Type::Arrow(a, b) => occurs(v, a) || occurs(v, b),
        Type::Con(_) => false,
    }
}

/// Replaces every variable left by `s` with Float.
pub fn ground_with(s: &Subst, t: &Type) -> Type {
    let mut vs = BTreeSet::new();
    let applied = s.apply(t);
    vars_of(&applied, &mut vs);
    let map = vs.into_iter().map(|v| (v, Type::float())).collect();
    substitute(&map, &applied)
}

// ---------------------------------------------------------- enumeration

/// Small DSLs used by the generate-and-filter oracle, each paired with its
/// input types and target types. Every DSL has at most five entries.
pub fn micro_dsls() -> Vec<(&'static str, Dsl, Vec<Type>, Vec<Type>)> {
    let f = Type::float;
    let b = Type::bool;
    let make = |entries: &str| Dsl::from_json(&format!("{{\"entries\":[{entries}]}}")).unwrap();
    let c = |name: &str, ty: &str, imp: &str| format!("{{\"name\":\"{name}\",\"type\":\"{ty}\",\"impl\":\"{imp}\"}}");
    let one = c("1", "Float", "const:1");
    let two = c("2", "Float", "const:2");
    let tru = c("true", "Bool", "const:true");
    let fls = c("false", "Bool", "const:false");
    let not = c("not", "Bool -> Bool", "builtin:not");
    let and = c("and", "Bool -> Bool -> Bool", "builtin:and");
    let add = c("add", "Float -> Float -> Float", "builtin:add");
    let mul = c("mul", "Float -> Float -> Float", "builtin:mul");
    let neg = c("neg", "Float -> Float", "builtin:neg");
    let sqr = c("sqr", "Float -> Float", "builtin:sqr");
    let gt = c("gt", "Float -> Float -> Bool", "builtin:gt");
    let ite = c("if", "Bool -> t0 -> t0 -> t0", "builtin:if");
    let join = |xs: &[&String]| xs.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",");
    vec![
        ("bool-not", make(&join(&[&tru, &not])), vec![], vec![b()]),
        ("bool-and", make(&join(&[&tru, &fls, &and])), vec![], vec![b()]),
        ("bool-full", make(&join(&[&tru, &fls, &not, &and])), vec![], vec![b()]),
        ("float-add", make(&join(&[&one, &add])), vec![f()], vec![f()]),
        ("float-arith", make(&join(&[&one, &two, &add, &neg])), vec![], vec![f()]),
        ("float-mul-sqr", make(&join(&[&one, &mul, &sqr])), vec![f()], vec![f()]),
        ("gt-only", make(&join(&[&one, &gt])), vec![f()], vec![b(), f()]),
        ("gt-not", make(&join(&[&one, &gt, &not])), vec![f()], vec![b()]),
        ("if-float", make(&join(&[&one, &tru, &ite])), vec![], vec![f(), b()]),
        ("if-gt", make(&join(&[&one, &gt, &ite])), vec![f()], vec![f(), b()]),
        ("if-mixed", make(&join(&[&tru, &one, &neg, &ite, &not])), vec![], vec![f(), b()]),
        ("two-inputs", make(&join(&[&add, &sqr])), vec![f(), f()], vec![f()]),
    ]
}

fn arity_of(t: &Type) -> usize {
    match t {
        Type::Arrow(_, r) => 1 + arity_of(r),
        _ => 0,
    }
}

/// Result type of applying a function of type `f` to an argument of type `a`.
fn apply_type(f: &Type, a: &Type) -> Option<Type> {
    let mut next = 0;
    let f = f.freshen(&mut next);
    let a = a.freshen(&mut next);
    let Type::Arrow(param, result) = f else { return None };
    let mut s = Subst::new();
    s.unify(&param, &a).ok()?;
    Some(s.apply(&result).normalized())
}

/// Closed well-typed terms built bottom-up: an atom applied to between zero
/// and its declared number of arguments, each argument itself a smaller
/// closed well-typed term of any type. Indexed by cost under `bound`.
/// Ill-typed partial applications are dropped early, since no further
/// argument can repair them.
fn typed_terms(atoms: &[(Term, Type)], d: usize, bound: Bound) -> Vec<Vec<(Term, Type)>> {
    let mut by_cost: Vec<Vec<(Term, Type)>> = vec![Vec::new(); d + 1];
    for c in 1..=d {
        let mut here = Vec::new();
        for (head, head_ty) in atoms {
            if c == 1 {
                here.push((head.clone(), head_ty.clone()));
            }
            // (partial application, its type, cost so far): deepest argument
            // for the tree bound, argument token total for the token bound
            let mut partial = vec![(head.clone(), head_ty.clone(), 0usize)];
            for _ in 0..arity_of(head_ty) {
                let mut next = Vec::new();
                for (p, p_ty, used) in &partial {
                    for (cost, pool) in by_cost.iter().enumerate().take(c).skip(1) {
                        let joined = match bound {
                            Bound::Tree => (*used).max(cost),
                            Bound::Tokens => used + cost,
                        };
                        if joined > c - 1 {
                            continue;
                        }
                        for (a, a_ty) in pool {
                            if let Some(ty) = apply_type(p_ty, a_ty) {
                                next.push((Term::app(p.clone(), a.clone()), ty, joined));
                            }
                        }
                    }
                }
                here.extend(next.iter().filter(|n| n.2 == c - 1).map(|n| (n.0.clone(), n.1.clone())));
                partial = next;
            }
        }
        by_cost[c] = here;
    }
    by_cost
}

fn tree_depth(t: &Term) -> usize {
    fn spine(t: &Term, args: &mut Vec<Term>) {
        if let Term::App(f, a) = t {
            spine(f, args);
            args.push((**a).clone());
        }
    }
    let mut args = Vec::new();
    spine(t, &mut args);
    1 + args.iter().map(tree_depth).max().unwrap_or(0)
}

fn atoms_in(t: &Term) -> usize {
    match t {
        Term::App(f, a) => atoms_in(f) + atoms_in(a),
        _ => 1,
    }
}

/// Which bound the oracle filters on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bound {
    Tree,
    Tokens,
}

/// Generate-and-filter: all syntactic combinations of well-typed smaller
/// terms, kept when they type-check to the ground `target` and fit the bound.
pub fn oracle_programs(dsl: &Dsl, inputs: &[Type], target: &Type, d: usize, bound: Bound) -> BTreeSet<String> {
    typed_terms(&atoms_of(dsl, inputs), d, bound)
        .into_iter()
        .flatten()
        .filter(|(_, ty)| ty == target)
        .map(|(t, _)| {
            assert_eq!(infer(&t, dsl, inputs).ok().as_ref(), Some(target), "{t}");
            print_program(&t)
        })
        .collect()
}

/// All closed well-typed terms within the bound, of any type.
pub fn all_candidates(dsl: &Dsl, inputs: &[Type], d: usize, bound: Bound) -> Vec<Term> {
    typed_terms(&atoms_of(dsl, inputs), d, bound).into_iter().flatten().map(|(t, _)| t).collect()
}

fn atoms_of(dsl: &Dsl, inputs: &[Type]) -> Vec<(Term, Type)> {
    let mut atoms: Vec<(Term, Type)> = dsl
        .entries()
        .iter()
        .map(|e| (Term::prim(&e.name), e.ty.normalized()))
        .collect();
    for (i, ty) in inputs.iter().enumerate() {
        atoms.push((Term::input(i), ty.clone()));
    }
    atoms
}

/// Every node path of `t`: 0 steps into the function, 1 into the argument.
pub fn node_paths(t: &Term) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    if let Term::App(f, a) = t {
        out.extend(node_paths(f).into_iter().map(|mut p| {
            p.insert(0, 0);
            p
        }));
        out.extend(node_paths(a).into_iter().map(|mut p| {
            p.insert(0, 1);
            p
        }));
    }
    out
}

pub fn subterm<'a>(t: &'a Term, path: &[u8]) -> &'a Term {
    match (t, path.first()) {
        (_, None) => t,
        (Term::App(f, _), Some(0)) => subterm(f, &path[1..]),
        (Term::App(_, a), Some(1)) => subterm(a, &path[1..]),
        _ => panic!("bad path"),
    }
}

pub fn replace(t: &Term, path: &[u8], r: &Term) -> Term {
    match (t, path.first()) {
        (_, None) => r.clone(),
        (Term::App(f, a), Some(0)) => Term::app(replace(f, &path[1..], r), (**a).clone()),
        (Term::App(f, a), Some(1)) => Term::app((**f).clone(), replace(a, &path[1..], r)),
        _ => panic!("bad path"),
    }
}

const REUSE: &str = "__reuse__";

/// `dsl` plus a placeholder entry standing for the subterm being replaced.
fn with_placeholder(dsl: &Dsl, ty: &Type) -> Dsl {
    use tnsynth::dsl::{Builtin, Semantics};
    let sem = match arity_of(ty) {
        0 if *ty == Type::bool() => Semantics::Bool(true),
        0 => Semantics::Float(0.0),
        1 => Semantics::Builtin(Builtin::Neg),
        2 => Semantics::Builtin(Builtin::Add),
        _ => Semantics::Builtin(Builtin::If),
    };
    let mut entries = dsl.entries().to_vec();
    entries.push(tnsynth::Entry::new(REUSE, ty.clone(), sem));
    Dsl::new(entries).unwrap()
}

/// Single-edit neighborhood by generate-and-filter: at every path, every
/// candidate built from the DSL plus the current subterm as one more unit
/// cost atom, kept when the edited program still has the original type.
pub fn oracle_neighborhood(dsl: &Dsl, inputs: &[Type], p: &Term, d: usize, bound: Bound) -> BTreeSet<String> {
    let top = infer(p, dsl, inputs).expect("start program type-checks");
    let mut out = BTreeSet::new();
    for path in node_paths(p) {
        let here = subterm(p, &path).clone();
        let here_text = print_program(&here);
        let augmented = with_placeholder(dsl, &infer(&here, dsl, inputs).unwrap());
        for r in all_candidates(&augmented, inputs, d, bound) {
            let text = print_program(&r).replace(REUSE, &here_text);
            let r = tnsynth::lang::parse_program(&text, dsl, inputs.len()).unwrap();
            let q = replace(p, &path, &r);
            if infer(&q, dsl, inputs).is_ok_and(|t| t == top) {
                out.insert(print_program(&q));
            }
        }
    }
    out
}

/// Independent best-improvement step: scalar loss over the oracle
/// neighborhood, ties to fewer tokens. Returns (loss, tokens).
pub fn oracle_step(
    dsl: &Dsl,
    inputs: &[Type],
    p: &Term,
    data: &tnsynth::eval::Dataset,
    d: usize,
    bound: Bound,
    kind: tnsynth::eval::LossKind,
) -> (f64, usize) {
    oracle_neighborhood(dsl, inputs, p, d, bound)
        .iter()
        .map(|s| {
            let t = tnsynth::lang::parse_program(s, dsl, inputs.len()).unwrap();
            (tnsynth::eval::loss(kind, &t, data, dsl), atoms_in(&t))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("the start program is its own neighbor")
}

/// DSL for randomized search instances.
pub fn search_dsl() -> Dsl {
    Dsl::from_json(
        r#"{"entries":[
            {"name":"0","type":"Float","impl":"const:0"},
            {"name":"1","type":"Float","impl":"const:1"},
            {"name":"3","type":"Float","impl":"const:3"},
            {"name":"if","type":"Bool -> t0 -> t0 -> t0","impl":"builtin:if"},
            {"name":"gt","type":"Float -> Float -> Bool","impl":"builtin:gt"},
            {"name":"sub","type":"Float -> Float -> Float","impl":"builtin:sub"},
            {"name":"mul","type":"Float -> Float -> Float","impl":"builtin:mul"},
            {"name":"sqr","type":"Float -> Float","impl":"builtin:sqr"}]}"#,
    )
    .unwrap()
}

/// A random start program and a random six-row dataset over two inputs.
pub fn random_search_instance<R: Rng>(rng: &mut R, dsl: &Dsl) -> (Term, tnsynth::eval::Dataset) {
    let cfg = tnsynth::pbe::PbeConfig {
        input_arity: 2,
        max_sample_depth: 3,
        ..Default::default()
    };
    let sampler = tnsynth::pbe::Sampler::new(dsl, &cfg);
    let p = loop {
        if let Some(t) = sampler.sample(&Type::float(), rng) {
            if atoms_in(&t) <= 9 {
                break t;
            }
        }
    };
    let mut data = tnsynth::eval::Dataset::new(2);
    for _ in 0..6 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y = (x[0] * x[1]).round() + rng.gen_range(-1i32..=1) as f64;
        data.push(x, y).unwrap();
    }
    (p, data)
}
