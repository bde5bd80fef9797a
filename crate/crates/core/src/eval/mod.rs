//! Interpreter for complete terms, datasets, and the losses that score
//! candidates against data.
//!
//! All arithmetic is IEEE double. Booleans are carried as `0.0`/`1.0` inside
//! the numeric kernels so that the scalar interpreter here and the columnar
//! evaluator in [`batch`] share one implementation of every builtin. A
//! non-finite argument to any builtin poisons its result, which is how an
//! intermediate overflow surfaces as the `NonFinite` outcome.

pub mod batch;
mod dataset;

pub use batch::{BatchEval, Columns};
pub use dataset::{Dataset, Row};

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Builtin, Dsl, Semantics};
use crate::lang::Term;

#[derive(Clone, PartialEq)]
pub enum Value {
    F(f64),
    B(bool),
    /// A primitive applied to fewer arguments than it takes.
    Closure { prim: Arc<str>, args: Vec<Value> },
}

impl Value {
    /// Numeric view used by losses: booleans compare as 0/1.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::F(x) => Some(*x),
            Value::B(b) => Some(if *b { 1.0 } else { 0.0 }),
            Value::Closure { .. } => None,
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::F(x) => write!(f, "F({x})"),
            Value::B(b) => write!(f, "B({b})"),
            Value::Closure { prim, args } => write!(f, "Closure({prim}, {args:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    /// NaN or ±∞ appeared in an evaluated position; the candidate is discarded.
    #[error("non-finite value")]
    NonFinite,
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("input x{} missing from observation", .0 + 1)]
    MissingInput(usize),
    #[error("program contains a hole")]
    Hole,
    #[error("applied a non-function")]
    NotAFunction,
}

pub(crate) fn to_num(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Applies a strict builtin to encoded arguments. A non-finite argument or
/// result yields NaN.
#[inline]
pub(crate) fn apply_strict(b: Builtin, x: f64, y: f64) -> f64 {
    if !x.is_finite() || !y.is_finite() {
        return f64::NAN;
    }
    let r = match b {
        Builtin::Gt => to_num(x > y),
        Builtin::Add => x + y,
        Builtin::Sub => x - y,
        Builtin::Mul => x * y,
        Builtin::Sqr => x * x,
        Builtin::Sign => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        Builtin::Cos => x.cos(),
        Builtin::Exp => x.exp(),
        Builtin::Neg => -x,
        Builtin::And => to_num(x != 0.0 && y != 0.0),
        Builtin::Xor => to_num((x != 0.0) != (y != 0.0)),
        Builtin::Not => to_num(x == 0.0),
        Builtin::If => unreachable!("`if` is lazy"),
    };
    if r.is_finite() {
        r
    } else {
        f64::NAN
    }
}

pub(crate) fn returns_bool(b: Builtin) -> bool {
    matches!(b, Builtin::Gt | Builtin::And | Builtin::Xor | Builtin::Not)
}

/// Evaluates a complete term on one observation.
///
/// Evaluation is strict except for `if`, which only evaluates the branch it
/// takes.
pub fn evaluate(t: &Term, dsl: &Dsl, obs: &[f64]) -> Result<Value, EvalError> {
    let (head, args) = t.spine();
    match head {
        Term::Input(i) => {
            if !args.is_empty() {
                return Err(EvalError::NotAFunction);
            }
            let x = *obs.get(*i).ok_or(EvalError::MissingInput(*i))?;
            if x.is_finite() {
                Ok(Value::F(x))
            } else {
                Err(EvalError::NonFinite)
            }
        }
        Term::Hole(_) => Err(EvalError::Hole),
        Term::App(..) => unreachable!("spine head is never an application"),
        Term::Prim(name) => {
            let entry = dsl
                .get(name)
                .ok_or_else(|| EvalError::UnknownPrimitive(name.to_string()))?;
            match entry.semantics {
                Semantics::Float(x) if args.is_empty() => Ok(Value::F(x)),
                Semantics::Bool(b) if args.is_empty() => Ok(Value::B(b)),
                Semantics::Float(_) | Semantics::Bool(_) => Err(EvalError::NotAFunction),
                Semantics::Builtin(b) => apply_builtin(name, b, &args, dsl, obs),
            }
        }
    }
}

fn apply_builtin(
    name: &Arc<str>,
    b: Builtin,
    args: &[&Arc<Term>],
    dsl: &Dsl,
    obs: &[f64],
) -> Result<Value, EvalError> {
    let arity = b.arity();
    if args.len() < arity {
        let args = args
            .iter()
            .map(|a| evaluate(a, dsl, obs))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Value::Closure {
            prim: name.clone(),
            args,
        });
    }
    if args.len() > arity {
        return Err(EvalError::NotAFunction);
    }
    if b == Builtin::If {
        let cond = match evaluate(args[0], dsl, obs)? {
            Value::B(c) => c,
            _ => return Err(EvalError::NotAFunction),
        };
        return evaluate(if cond { args[1] } else { args[2] }, dsl, obs);
    }
    let mut xs = [0.0; 2];
    for (slot, a) in xs.iter_mut().zip(args) {
        *slot = evaluate(a, dsl, obs)?
            .as_number()
            .ok_or(EvalError::NotAFunction)?;
    }
    let r = apply_strict(b, xs[0], xs[1]);
    if !r.is_finite() {
        return Err(EvalError::NonFinite);
    }
    Ok(if returns_bool(b) {
        Value::B(r != 0.0)
    } else {
        Value::F(r)
    })
}

/// How candidate outputs are compared with targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Mean squared error, for continuous-action imitation.
    #[default]
    Mse,
    /// Sum of absolute errors, for programming by example.
    AbsSum,
    /// Mean squared error after clipping outputs to the action interval.
    ClippedMse,
}

impl LossKind {
    /// Scores an output column; any non-finite output scores `+∞`.
    pub fn score(self, outputs: &[f64], targets: &[f64]) -> f64 {
        debug_assert_eq!(outputs.len(), targets.len());
        let mut acc = 0.0;
        for (o, t) in outputs.iter().zip(targets) {
            if !o.is_finite() {
                return f64::INFINITY;
            }
            let d = o - t;
            acc += match self {
                LossKind::Mse => d * d,
                LossKind::AbsSum => d.abs(),
                LossKind::ClippedMse => {
                    let c = o.clamp(-1.0, 1.0) - t;
                    c * c
                }
            };
        }
        match self {
            LossKind::Mse | LossKind::ClippedMse if !outputs.is_empty() => acc / outputs.len() as f64,
            _ => acc,
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "abs-sum" | "abs" => Ok(LossKind::AbsSum),
            "clipped-mse" => Ok(LossKind::ClippedMse),
            _ => Err(format!("unknown loss `{s}` (expected mse, clipped-mse or abs-sum)")),
        }
    }
}

fn outputs(t: &Term, data: &Dataset, dsl: &Dsl, allow_bool: bool) -> Option<Vec<f64>> {
    data.rows
        .iter()
        .map(|row| match evaluate(t, dsl, &row.obs) {
            Ok(Value::F(x)) => Some(x),
            Ok(Value::B(b)) if allow_bool => Some(to_num(b)),
            _ => None,
        })
        .collect()
}

/// Mean squared error of `t` on `data`; `+∞` if any row fails or is not a Float.
pub fn imitation_loss(t: &Term, data: &Dataset, dsl: &Dsl) -> f64 {
    match outputs(t, data, dsl, false) {
        Some(out) => LossKind::Mse.score(&out, &data.actions()),
        None => f64::INFINITY,
    }
}

/// Sum of absolute errors over the examples, booleans compared as 0/1.
pub fn pbe_error(t: &Term, examples: &Dataset, dsl: &Dsl) -> f64 {
    match outputs(t, examples, dsl, true) {
        Some(out) => LossKind::AbsSum.score(&out, &examples.actions()),
        None => f64::INFINITY,
    }
}

/// `loss(t)` under the selected loss, through the scalar interpreter.
pub fn loss(kind: LossKind, t: &Term, data: &Dataset, dsl: &Dsl) -> f64 {
    match kind {
        LossKind::Mse => imitation_loss(t, data, dsl),
        LossKind::AbsSum => pbe_error(t, data, dsl),
        LossKind::ClippedMse => match outputs(t, data, dsl, false) {
            Some(out) => kind.score(&out, &data.actions()),
            None => f64::INFINITY,
        },
    }
}

/// Error series divided by its first entry; an exact first fit stays at 0.
pub fn normalize_errors(errors: &[f64]) -> Vec<f64> {
    match errors.first() {
        Some(&e0) if e0 > 0.0 && e0.is_finite() => errors.iter().map(|e| e / e0).collect(),
        Some(&e0) if e0 == 0.0 => vec![0.0; errors.len()],
        _ => errors.to_vec(),
    }
}
