//! Column-at-a-time evaluation over a whole dataset.
//!
//! Each node evaluates to a column of `f64`, one entry per row, with booleans
//! as 0/1 and NaN marking a row that went non-finite. Builtins share their
//! kernels with the scalar interpreter, so both routes agree bit-for-bit.
//!
//! Neighbors of a program share every untouched subtree with it by pointer.
//! [`BatchEval::prime`] caches the columns of those shared nodes, so scoring a
//! neighbor only recomputes the nodes along the edited paths.

use std::collections::HashMap;
use std::sync::Arc;

use super::{apply_strict, Dataset, LossKind};
use crate::dsl::{Builtin, Dsl, Semantics};
use crate::lang::Term;

/// A dataset transposed into input columns plus the target column.
#[derive(Clone, Debug)]
pub struct Columns {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Columns {
    pub fn from_dataset(data: &Dataset) -> Columns {
        let inputs = (0..data.arity())
            .map(|i| data.rows.iter().map(|r| r.obs[i]).collect())
            .collect();
        Columns {
            inputs,
            targets: data.actions(),
        }
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }
}

enum Col<'a> {
    Shared(&'a [f64]),
    Owned(Vec<f64>),
}

impl Col<'_> {
    fn as_slice(&self) -> &[f64] {
        match self {
            Col::Shared(s) => s,
            Col::Owned(v) => v,
        }
    }

    fn into_vec(self) -> Vec<f64> {
        match self {
            Col::Shared(s) => s.to_vec(),
            Col::Owned(v) => v,
        }
    }
}

pub struct BatchEval<'a> {
    dsl: &'a Dsl,
    cols: &'a Columns,
    constants: HashMap<Arc<str>, Vec<f64>>,
    // keyed by node address; the Arc keeps the address from being reused
    cache: HashMap<usize, (Arc<Term>, Vec<f64>)>,
}

impl<'a> BatchEval<'a> {
    pub fn new(dsl: &'a Dsl, cols: &'a Columns) -> BatchEval<'a> {
        let n = cols.rows();
        let constants = dsl
            .entries()
            .iter()
            .filter_map(|e| match e.semantics {
                Semantics::Float(x) => Some((e.name.clone(), vec![x; n])),
                Semantics::Bool(b) => Some((e.name.clone(), vec![super::to_num(b); n])),
                Semantics::Builtin(_) => None,
            })
            .collect();
        BatchEval {
            dsl,
            cols,
            constants,
            cache: HashMap::new(),
        }
    }

    /// Caches the column of every fully applied node reachable from `root`.
    pub fn prime(&mut self, root: &Arc<Term>) {
        if let Term::App(f, a) = root.as_ref() {
            self.prime(f);
            self.prime(a);
            if let Some(col) = self.node(root).map(Col::into_vec) {
                self.cache
                    .insert(Arc::as_ptr(root) as usize, (root.clone(), col));
            }
        }
    }

    pub fn targets(&self) -> &[f64] {
        &self.cols.targets
    }

    pub fn clear(&mut self) {
        self.cache.clear();
    }

    /// Output column of a complete, fully applied term; `None` if the term is
    /// not a first-order value.
    pub fn eval(&self, t: &Term) -> Option<Vec<f64>> {
        self.node(t).map(Col::into_vec)
    }

    /// Eval an `Arc` node, taking the cached column when there is one.
    pub fn eval_arc(&self, t: &Arc<Term>) -> Option<Vec<f64>> {
        self.arg(t).map(Col::into_vec)
    }

    /// Loss of `t` against the target column; `+∞` when `t` is not a value.
    pub fn loss(&self, kind: LossKind, t: &Arc<Term>) -> f64 {
        match self.arg(t) {
            Some(col) => kind.score(col.as_slice(), &self.cols.targets),
            None => f64::INFINITY,
        }
    }

    fn arg(&self, t: &Arc<Term>) -> Option<Col<'_>> {
        match self.cache.get(&(Arc::as_ptr(t) as usize)) {
            Some((_, col)) => Some(Col::Shared(col)),
            None => self.node(t),
        }
    }

    fn node(&self, t: &Term) -> Option<Col<'_>> {
        let (head, args) = t.spine();
        match head {
            Term::Input(i) if args.is_empty() => self.cols.inputs.get(*i).map(|c| Col::Shared(c)),
            Term::Prim(name) => {
                let entry = self.dsl.get(name)?;
                match entry.semantics {
                    Semantics::Builtin(b) if b.arity() == args.len() => self.apply(b, &args),
                    Semantics::Float(_) | Semantics::Bool(_) if args.is_empty() => {
                        self.constants.get(name).map(|c| Col::Shared(c))
                    }
                    _ => None,
                }
            }
            _ => None,
        }
    }

    fn apply(&self, b: Builtin, args: &[&Arc<Term>]) -> Option<Col<'_>> {
        let n = self.cols.rows();
        let x = self.arg(args[0])?;
        let x = x.as_slice();
        let out = match b {
            Builtin::If => {
                let then = self.arg(args[1])?;
                let other = self.arg(args[2])?;
                let (then, other) = (then.as_slice(), other.as_slice());
                (0..n)
                    .map(|i| {
                        if !x[i].is_finite() {
                            f64::NAN
                        } else if x[i] != 0.0 {
                            then[i]
                        } else {
                            other[i]
                        }
                    })
                    .collect()
            }
            _ if b.arity() == 2 => {
                let y = self.arg(args[1])?;
                let y = y.as_slice();
                x.iter().zip(y).map(|(&p, &q)| apply_strict(b, p, q)).collect()
            }
            _ => x.iter().map(|&p| apply_strict(b, p, 0.0)).collect(),
        };
        Some(Col::Owned(out))
    }
}
