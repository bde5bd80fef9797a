//! Type-directed program synthesis with typed-neighborhood local search.

pub mod dsl;
pub mod enumerate;
pub mod error;
pub mod eval;
pub mod imitate;
pub mod lang;
pub mod mlp;
pub mod neighborhood;
pub mod pbe;
pub mod pendulum;
pub mod types;

pub use dsl::{Builtin, Dsl, Entry, Semantics};
pub use error::{Error, Result};
pub use lang::{Location, Path, Term};
pub use types::{Subst, Type};
