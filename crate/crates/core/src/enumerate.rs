//! Depth-limited type-directed enumeration of complete programs.
//!
//! Programs are grown top-down from a single typed hole. At each hole every
//! candidate (DSL entries in declaration order, then inputs, then any extra
//! reuse entries) is tried at every arity `k` whose result type unifies with
//! the hole; the spine gets `k` new holes and the substitution flows on to the
//! remaining holes. Holes are filled left to right, depth first.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsl::Dsl;
use crate::eval::{evaluate, Value};
use crate::lang::Term;
use crate::types::{arg_suffixes, infer, Subst, Type};

/// How the depth bound `d` is charged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthMetric {
    /// Tree depth with a call spine as one level: an atom costs 1 and a
    /// call costs one more than its deepest argument.
    #[default]
    Tree,
    /// Total number of candidate insertions (tokens) in the generated term.
    Insertions,
}

impl std::str::FromStr for DepthMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(DepthMetric::Tree),
            "insertions" => Ok(DepthMetric::Insertions),
            _ => Err(format!("unknown depth metric `{s}` (expected tree or insertions)")),
        }
    }
}

impl std::fmt::Display for DepthMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DepthMetric::Tree => "tree",
            DepthMetric::Insertions => "insertions",
        })
    }
}

/// Cost of a term under `metric`: `lang::depth` or `lang::token_count`.
pub fn measure(t: &Term, metric: DepthMetric) -> usize {
    match metric {
        DepthMetric::Tree => crate::lang::depth(t),
        DepthMetric::Insertions => crate::lang::token_count(t),
    }
}

struct Candidate {
    term: Arc<Term>,
    ty: Type,
    // (k, result type after k args, the k parameter types); only for ground types
    shapes: Option<Vec<(usize, Type, Vec<Type>)>>,
}

impl Candidate {
    fn new(term: Arc<Term>, ty: Type) -> Candidate {
        let shapes = ty.is_ground().then(|| shapes_of(&ty));
        Candidate { term, ty, shapes }
    }
}

fn shapes_of(ty: &Type) -> Vec<(usize, Type, Vec<Type>)> {
    let params: Vec<Type> = ty.params().into_iter().cloned().collect();
    arg_suffixes(ty)
        .into_iter()
        .map(|(k, suffix)| (k, suffix, params[..k].to_vec()))
        .collect()
}

#[derive(Clone)]
struct Hole {
    ty: Type,
    // remaining depth for the subtree (tree metric only)
    budget: usize,
}

/// A reusable enumerator over a fixed candidate set.
pub struct Enumerator {
    candidates: Vec<Candidate>,
    metric: DepthMetric,
    next_var: u32,
}

impl Enumerator {
    pub fn new(dsl: &Dsl, inputs: &[Type], metric: DepthMetric) -> Enumerator {
        let mut candidates: Vec<Candidate> = dsl
            .entries()
            .iter()
            .map(|e| Candidate::new(Arc::new(Term::Prim(e.name.clone())), e.ty.clone()))
            .collect();
        candidates.extend(
            inputs
                .iter()
                .enumerate()
                .map(|(i, ty)| Candidate::new(Arc::new(Term::Input(i)), ty.clone())),
        );
        let mut e = Enumerator {
            candidates,
            metric,
            next_var: 0,
        };
        e.refresh_vars();
        e
    }

    /// Adds an extra candidate after the DSL entries and inputs. Its uses cost
    /// 1 regardless of its size.
    pub fn with_extra(mut self, term: Arc<Term>, ty: Type) -> Enumerator {
        self.candidates.push(Candidate::new(term, ty));
        self.refresh_vars();
        self
    }

    pub fn metric(&self) -> DepthMetric {
        self.metric
    }

    fn refresh_vars(&mut self) {
        let max = self.candidates.iter().filter_map(|c| c.ty.max_var()).max();
        self.next_var = self.next_var.max(max.map_or(0, |m| m + 1));
    }

    /// Visits every complete term of type `target` within bound `d`, in
    /// enumeration order, until the visitor breaks.
    pub fn for_each<F>(&self, target: &Type, d: usize, mut visit: F) -> ControlFlow<()>
    where
        F: FnMut(Arc<Term>) -> ControlFlow<()>,
    {
        if d == 0 {
            return ControlFlow::Continue(());
        }
        let next = self.next_var.max(target.max_var().map_or(0, |m| m + 1));
        let mut pending = vec![Hole {
            ty: target.clone(),
            budget: d,
        }];
        let mut choices = Vec::new();
        let tokens = match self.metric {
            DepthMetric::Tree => usize::MAX,
            DepthMetric::Insertions => d,
        };
        self.dfs(&mut pending, &Subst::new(), next, tokens, &mut choices, &mut visit)
    }

    pub fn collect(&self, target: &Type, d: usize) -> Vec<Arc<Term>> {
        let mut out = Vec::new();
        let _ = self.for_each(target, d, |t| {
            out.push(t);
            ControlFlow::Continue(())
        });
        out
    }

    fn dfs<F>(
        &self,
        pending: &mut Vec<Hole>,
        subst: &Subst,
        next: u32,
        tokens_left: usize,
        choices: &mut Vec<(usize, usize)>,
        visit: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(Arc<Term>) -> ControlFlow<()>,
    {
        let Some(hole) = pending.pop() else {
            let mut i = 0;
            return visit(self.build(choices, &mut i));
        };
        let want = subst.apply(&hole.ty);
        let want_ground = want.is_ground();
        let base = pending.len();
        let mut result = ControlFlow::Continue(());
        'cands: for (ci, cand) in self.candidates.iter().enumerate() {
            let mut nx = next;
            let owned_shapes;
            let shapes = match &cand.shapes {
                Some(s) => s,
                None => {
                    owned_shapes = shapes_of(&cand.ty.freshen(&mut nx));
                    &owned_shapes
                }
            };
            for (k, suffix, params) in shapes {
                let k = *k;
                let child_budget = match self.metric {
                    DepthMetric::Tree => {
                        if hole.budget < 1 + usize::from(k > 0) {
                            continue;
                        }
                        hole.budget - 1
                    }
                    DepthMetric::Insertions => {
                        if tokens_left < 1 + base + k {
                            continue;
                        }
                        0
                    }
                };
                let owned_subst;
                let s = if want_ground && cand.shapes.is_some() {
                    if *suffix != want {
                        continue;
                    }
                    subst
                } else {
                    let mut s = subst.clone();
                    if s.unify(suffix, &want).is_err() {
                        continue;
                    }
                    owned_subst = s;
                    &owned_subst
                };
                for p in params.iter().rev() {
                    pending.push(Hole {
                        ty: p.clone(),
                        budget: child_budget,
                    });
                }
                choices.push((ci, k));
                result = self.dfs(pending, s, nx, tokens_left.saturating_sub(1), choices, visit);
                choices.pop();
                pending.truncate(base);
                if result.is_break() {
                    break 'cands;
                }
            }
        }
        pending.push(hole);
        result
    }

    fn build(&self, choices: &[(usize, usize)], i: &mut usize) -> Arc<Term> {
        let (ci, k) = choices[*i];
        *i += 1;
        let mut t = self.candidates[ci].term.clone();
        for _ in 0..k {
            let arg = self.build(choices, i);
            t = Arc::new(Term::App(t, arg));
        }
        t
    }

    /// Number of terms [`Enumerator::for_each`] would visit, saturating at
    /// `u128::MAX`. Counted by dynamic programming over types when every
    /// hole type stays ground, otherwise by walking the enumeration.
    pub fn count(&self, target: &Type, d: usize) -> u128 {
        if d == 0 {
            return 0;
        }
        let mut counter = Counter {
            e: self,
            tree: HashMap::new(),
            exact: HashMap::new(),
        };
        let fast = match self.metric {
            DepthMetric::Tree => counter.upto(target, d),
            DepthMetric::Insertions => (1..=d)
                .map(|b| counter.exactly(target, b))
                .try_fold(0u128, |acc, x| Some(acc.saturating_add(x?))),
        };
        fast.unwrap_or_else(|| {
            let mut n = 0u128;
            let _ = self.for_each(target, d, |_| {
                n += 1;
                ControlFlow::Continue(())
            });
            n
        })
    }
}

struct Counter<'a> {
    e: &'a Enumerator,
    tree: HashMap<(Type, usize), Option<u128>>,
    exact: HashMap<(Type, usize), Option<u128>>,
}

impl Counter<'_> {
    /// Ground parameter lists of every (candidate, k) whose result is `ty`,
    /// or `None` when some instantiation leaves a parameter non-ground.
    fn expansions(&self, ty: &Type) -> Option<Vec<Vec<Type>>> {
        if !ty.is_ground() {
            return None;
        }
        let mut out = Vec::new();
        for cand in &self.e.candidates {
            let mut next = self.e.next_var;
            for (_, suffix, params) in shapes_of(&cand.ty.freshen(&mut next)) {
                let mut s = Subst::new();
                if s.unify(&suffix, ty).is_err() {
                    continue;
                }
                let params: Vec<Type> = params.iter().map(|p| s.apply(p)).collect();
                if !params.iter().all(Type::is_ground) {
                    return None;
                }
                out.push(params);
            }
        }
        Some(out)
    }

    fn upto(&mut self, ty: &Type, d: usize) -> Option<u128> {
        if d == 0 {
            return Some(0);
        }
        if let Some(v) = self.tree.get(&(ty.clone(), d)) {
            return *v;
        }
        let r = self.expansions(ty).and_then(|exps| {
            let mut total = 0u128;
            for params in exps {
                if params.is_empty() {
                    total = total.saturating_add(1);
                } else if d >= 2 {
                    let mut prod = 1u128;
                    for p in &params {
                        prod = prod.saturating_mul(self.upto(p, d - 1)?);
                    }
                    total = total.saturating_add(prod);
                }
            }
            Some(total)
        });
        self.tree.insert((ty.clone(), d), r);
        r
    }

    fn exactly(&mut self, ty: &Type, b: usize) -> Option<u128> {
        if b == 0 {
            return Some(0);
        }
        if let Some(v) = self.exact.get(&(ty.clone(), b)) {
            return *v;
        }
        let r = self.expansions(ty).and_then(|exps| {
            let mut total = 0u128;
            for params in exps {
                total = total.saturating_add(self.sequence(&params, b - 1)?);
            }
            Some(total)
        });
        self.exact.insert((ty.clone(), b), r);
        r
    }

    /// Ways to fill `params` left to right with exactly `b` tokens in total.
    fn sequence(&mut self, params: &[Type], b: usize) -> Option<u128> {
        match params.split_first() {
            None => Some(u128::from(b == 0)),
            Some((first, rest)) => {
                let mut total = 0u128;
                for b1 in 1..=b.saturating_sub(rest.len()) {
                    let head = self.exactly(first, b1)?;
                    if head == 0 {
                        continue;
                    }
                    total = total.saturating_add(head.saturating_mul(self.sequence(rest, b - b1)?));
                }
                Some(total)
            }
        }
    }
}

/// Every complete term of type `target` with tree depth at most `d`.
pub fn enumerate_programs(dsl: &Dsl, target: &Type, d: usize, input_types: &[Type]) -> Vec<Term> {
    Enumerator::new(dsl, input_types, DepthMetric::Tree)
        .collect(target, d)
        .into_iter()
        .map(|t| Arc::try_unwrap(t).unwrap_or_else(|a| (*a).clone()))
        .collect()
}

/// Length of [`enumerate_programs`].
pub fn count_programs(dsl: &Dsl, target: &Type, d: usize, input_types: &[Type]) -> u128 {
    Enumerator::new(dsl, input_types, DepthMetric::Tree).count(target, d)
}

/// Result of evaluating a program on one probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    F(f64),
    B(bool),
    NonFinite,
    /// Not a first-order value (a partial application).
    Opaque,
}

pub type Signature = Vec<Outcome>;

pub fn observational_signature(t: &Term, probes: &[Vec<f64>], dsl: &Dsl) -> Signature {
    probes
        .iter()
        .map(|obs| match evaluate(t, dsl, obs) {
            Ok(Value::F(x)) => Outcome::F(x),
            Ok(Value::B(b)) => Outcome::B(b),
            Ok(Value::Closure { .. }) => Outcome::Opaque,
            Err(_) => Outcome::NonFinite,
        })
        .collect()
}

/// Relative tolerance used when comparing float outcomes of signatures.
pub const SIGNATURE_TOLERANCE: f64 = 1e-9;

pub fn outcomes_match(a: &Outcome, b: &Outcome) -> bool {
    match (a, b) {
        (Outcome::F(x), Outcome::F(y)) => {
            (x - y).abs() <= SIGNATURE_TOLERANCE * x.abs().max(y.abs()).max(1.0)
        }
        (Outcome::B(x), Outcome::B(y)) => x == y,
        (Outcome::NonFinite, Outcome::NonFinite) => true,
        _ => false,
    }
}

pub fn signatures_match(a: &[Outcome], b: &[Outcome]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| outcomes_match(x, y))
}

/// Signatures of every program within a depth bound, for repeated lookups.
pub struct EquivalenceIndex {
    by_type: HashMap<Type, Vec<Signature>>,
    enumerator: Enumerator,
    d: usize,
    probes: Vec<Vec<f64>>,
}

impl EquivalenceIndex {
    pub fn new(dsl: &Dsl, inputs: &[Type], d: usize, metric: DepthMetric, probes: Vec<Vec<f64>>) -> Self {
        EquivalenceIndex {
            by_type: HashMap::new(),
            enumerator: Enumerator::new(dsl, inputs, metric),
            d,
            probes,
        }
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    /// Whether some program of type `ty` within the bound matches `sig`.
    pub fn contains(&mut self, dsl: &Dsl, ty: &Type, sig: &[Outcome]) -> bool {
        let (enumerator, d, probes) = (&self.enumerator, self.d, &self.probes);
        let sigs = self.by_type.entry(ty.clone()).or_insert_with(|| {
            let mut out = Vec::new();
            let _ = enumerator.for_each(ty, d, |t| {
                out.push(observational_signature(&t, probes, dsl));
                ControlFlow::Continue(())
            });
            out
        });
        sigs.iter().any(|s| signatures_match(s, sig))
    }
}

/// Whether a program of `t`'s type within depth `d` agrees with `t` on every
/// probe.
pub fn has_equivalent_within_depth(
    t: &Term,
    dsl: &Dsl,
    inputs: &[Type],
    d: usize,
    metric: DepthMetric,
    probes: &[Vec<f64>],
) -> bool {
    let Ok(ty) = infer(t, dsl, inputs) else {
        return false;
    };
    let target = observational_signature(t, probes, dsl);
    Enumerator::new(dsl, inputs, metric)
        .for_each(&ty, d, |c| {
            if signatures_match(&observational_signature(&c, probes, dsl), &target) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .is_break()
}
