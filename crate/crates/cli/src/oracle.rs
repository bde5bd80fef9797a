use tnsynth::lang::parse_program;
use tnsynth::mlp::{distilled_expert, MlpPolicy};
use tnsynth::pendulum::{expert_program, Policy, ProgramPolicy};
use tnsynth::{Dsl, Term};

use crate::Failure;

pub enum Oracle {
    Program { program: Term, dsl: Dsl },
    Mlp(MlpPolicy),
}

impl Policy for Oracle {
    fn act(&self, obs: &[f64]) -> f64 {
        match self {
            Oracle::Program { program, dsl } => ProgramPolicy { program, dsl }.act(obs),
            Oracle::Mlp(m) => m.act(obs),
        }
    }
}

pub fn load_dsl(flag: &str, spec: &str) -> Result<Dsl, Failure> {
    Dsl::resolve(spec).map_err(|e| Failure::config(flag, e))
}

pub fn load_program(flag: &str, path: &std::path::Path, dsl: &Dsl, arity: usize) -> Result<Term, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(flag, format!("{}: {e}", path.display())))?;
    parse_program(&text, dsl, arity).map_err(|e| Failure::config(flag, e))
}

/// Resolves an `--oracle` value; program oracles are parsed with `dsl_spec`.
pub fn load_oracle(spec: &str, dsl_spec: &str) -> Result<Oracle, Failure> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Failure::config("--oracle", format!("expected program:<path> or mlp:<path>, got `{spec}`")))?;
    match (kind, rest) {
        ("builtin", "expert") => Ok(Oracle::Program {
            program: expert_program(),
            dsl: Dsl::pendulum(),
        }),
        ("builtin", "distilled") => Ok(Oracle::Mlp(distilled_expert())),
        ("program", path) => {
            let dsl = load_dsl("--oracle-dsl", dsl_spec)?;
            let program = load_program("--oracle", path.as_ref(), &dsl, 3)?;
            Ok(Oracle::Program { program, dsl })
        }
        ("mlp", path) => MlpPolicy::load(path)
            .map(Oracle::Mlp)
            .map_err(|e| Failure::config("--oracle", format!("{path}: {e}"))),
        _ => Err(Failure::config("--oracle", format!("unknown oracle `{spec}`"))),
    }
}
