//! DSL registry: named, typed primitives with their semantics and sampling
//! weights.

use std::collections::HashMap;
use std::fmt;
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{parse_type, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    If,
    Gt,
    Add,
    Sub,
    Mul,
    Sqr,
    Sign,
    Cos,
    Exp,
    Neg,
    And,
    Xor,
    Not,
}

impl Builtin {
    pub fn arity(self) -> usize {
        match self {
            Builtin::If => 3,
            Builtin::Gt | Builtin::Add | Builtin::Sub | Builtin::Mul | Builtin::And | Builtin::Xor => 2,
            Builtin::Sqr | Builtin::Sign | Builtin::Cos | Builtin::Exp | Builtin::Neg | Builtin::Not => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Builtin::If => "if",
            Builtin::Gt => "gt",
            Builtin::Add => "add",
            Builtin::Sub => "sub",
            Builtin::Mul => "mul",
            Builtin::Sqr => "sqr",
            Builtin::Sign => "sign",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
            Builtin::Neg => "neg",
            Builtin::And => "and",
            Builtin::Xor => "xor",
            Builtin::Not => "not",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Builtin> {
        Some(match tag {
            "if" => Builtin::If,
            "gt" => Builtin::Gt,
            "add" => Builtin::Add,
            "sub" => Builtin::Sub,
            "mul" => Builtin::Mul,
            "sqr" => Builtin::Sqr,
            "sign" => Builtin::Sign,
            "cos" => Builtin::Cos,
            "exp" => Builtin::Exp,
            "neg" => Builtin::Neg,
            "and" => Builtin::And,
            "xor" => Builtin::Xor,
            "not" => Builtin::Not,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Semantics {
    Builtin(Builtin),
    Float(f64),
    Bool(bool),
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semantics::Builtin(b) => write!(f, "builtin:{}", b.tag()),
            Semantics::Float(x) => write!(f, "const:{x}"),
            Semantics::Bool(b) => write!(f, "const:{b}"),
        }
    }
}

impl std::str::FromStr for Semantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(tag) = s.strip_prefix("builtin:") {
            return Builtin::from_tag(tag)
                .map(Semantics::Builtin)
                .ok_or_else(|| Error::Dsl(format!("unknown builtin `{tag}`")));
        }
        if let Some(value) = s.strip_prefix("const:") {
            return match value {
                "true" => Ok(Semantics::Bool(true)),
                "false" => Ok(Semantics::Bool(false)),
                v => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(Semantics::Float)
                    .ok_or_else(|| Error::Dsl(format!("bad constant `{v}`"))),
            };
        }
        Err(Error::Dsl(format!("unknown impl `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub name: Arc<str>,
    pub ty: Type,
    pub semantics: Semantics,
    pub weight: f64,
}

impl Entry {
    pub fn new(name: &str, ty: Type, semantics: Semantics) -> Entry {
        Entry {
            name: Arc::from(name),
            ty,
            semantics,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Entry {
        self.weight = weight;
        self
    }

    pub fn arity(&self) -> usize {
        self.ty.arity()
    }
}

/// An ordered set of typed primitives. Declaration order drives enumeration
/// order.
#[derive(Clone, Debug)]
pub struct Dsl {
    entries: Vec<Entry>,
    index: HashMap<Arc<str>, usize>,
    /// Input signature declared alongside the entries, if any.
    pub inputs: Vec<Type>,
}

#[derive(Serialize, Deserialize)]
struct DslFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<String>,
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(rename = "impl")]
    imp: String,
    #[serde(default = "default_weight")]
    weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl Dsl {
    pub fn new(entries: Vec<Entry>) -> Result<Dsl> {
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            validate_entry(e)?;
            if index.insert(e.name.clone(), i).is_some() {
                return Err(Error::Dsl(format!("duplicate name `{}`", e.name)));
            }
        }
        Ok(Dsl {
            entries,
            index,
            inputs: Vec::new(),
        })
    }

    pub fn with_inputs(mut self, inputs: Vec<Type>) -> Dsl {
        self.inputs = inputs;
        self
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Dsl> {
        let file: DslFile = serde_json::from_str(text)?;
        let entries = file
            .entries
            .into_iter()
            .map(|e| {
                Ok(Entry {
                    name: Arc::from(e.name.as_str()),
                    ty: parse_type(&e.ty)?,
                    semantics: e.imp.parse()?,
                    weight: e.weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let inputs = file
            .inputs
            .iter()
            .map(|s| parse_type(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dsl::new(entries)?.with_inputs(inputs))
    }

    pub fn to_json(&self) -> String {
        let file = DslFile {
            inputs: self.inputs.iter().map(|t| t.to_string()).collect(),
            entries: self
                .entries
                .iter()
                .map(|e| EntryFile {
                    name: e.name.to_string(),
                    ty: e.ty.to_string(),
                    imp: e.semantics.to_string(),
                    weight: e.weight,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("DSL serializes")
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Dsl> {
        Dsl::from_json(&std::fs::read_to_string(path)?)
    }

    /// Constants `{-1, 0, 0.5, 0.8, 1, 3, 5, 6, true}` with
    /// `if, gt, and, xor, sub, mul, sqr` over three Float inputs.
    pub fn pbe() -> Dsl {
        Dsl::from_json(include_str!("../fixtures/pbe_dsl.json")).expect("bundled DSL")
    }

    /// Constants `{-6, -1, 1, 0.5, 0.6, 8, ten}` with
    /// `if, gt, sub, add, mul, sign, sqr` over `(cos θ, sin θ, θ̇)`.
    pub fn pendulum() -> Dsl {
        Dsl::from_json(include_str!("../fixtures/pendulum_dsl.json")).expect("bundled DSL")
    }

    /// [`Dsl::pendulum`] plus `cos` and `exp`.
    pub fn pendulum_extended() -> Dsl {
        Dsl::from_json(include_str!("../fixtures/pendulum_dsl_extended.json")).expect("bundled DSL")
    }

    /// Resolves `builtin:<name>` to a bundled DSL, anything else as a file path.
    pub fn resolve(spec: &str) -> Result<Dsl> {
        match spec {
            "builtin:pbe" => Ok(Dsl::pbe()),
            "builtin:pendulum" => Ok(Dsl::pendulum()),
            "builtin:pendulum-extended" => Ok(Dsl::pendulum_extended()),
            s if s.starts_with("builtin:") => Err(Error::Dsl(format!("no bundled DSL `{s}`"))),
            path => Dsl::load(path),
        }
    }
}

fn validate_entry(e: &Entry) -> Result<()> {
    if !(e.weight > 0.0 && e.weight.is_finite()) {
        return Err(Error::Dsl(format!("`{}` needs a positive weight", e.name)));
    }
    if e.name.is_empty() || e.name.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
        return Err(Error::Dsl(format!("bad name `{}`", e.name)));
    }
    match e.semantics {
        Semantics::Builtin(b) if b.arity() != e.ty.arity() => Err(Error::Dsl(format!(
            "`{}` has type {} but builtin `{}` takes {} arguments",
            e.name,
            e.ty,
            b.tag(),
            b.arity()
        ))),
        Semantics::Float(_) if e.ty != Type::float() => {
            Err(Error::Dsl(format!("constant `{}` must have type Float", e.name)))
        }
        Semantics::Bool(_) if e.ty != Type::bool() => {
            Err(Error::Dsl(format!("constant `{}` must have type Bool", e.name)))
        }
        _ => Ok(()),
    }
}
