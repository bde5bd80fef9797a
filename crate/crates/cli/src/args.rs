use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tnsynth::enumerate::DepthMetric;
use tnsynth::eval::LossKind;
use tnsynth::imitate::Aggregate;
use tnsynth::Type;

#[derive(Parser, Debug)]
#[command(name = "synth", version, about = "Typed neighborhood search for program synthesis")]
pub struct Cli {
    /// Worker threads. Outputs do not depend on this value.
    #[arg(long, global = true, env = "SYNTH_JOBS", default_value_t = 1,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List or count every program of a type within a depth bound.
    Enumerate(EnumerateArgs),
    /// Fit a program to a CSV dataset by iterated neighborhood search.
    Search(SearchArgs),
    /// Programming-by-example benchmark on sampled ground-truth programs.
    Pbe(PbeArgs),
    /// Imitate an oracle policy on the pendulum with dataset aggregation.
    Imitate(ImitateArgs),
    /// Evaluate a policy over seeded pendulum rollouts.
    EvalPolicy(EvalPolicyArgs),
    /// Tabulate a policy's actions over a grid of states.
    Heatmap(HeatmapArgs),
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    /// DSL file, or builtin:pbe, builtin:pendulum, builtin:pendulum-extended.
    #[arg(long)]
    pub dsl: String,
    #[arg(long = "type", default_value = "Float")]
    pub ty: Type,
    #[arg(long)]
    pub depth: usize,
    /// Number of Float input variables.
    #[arg(long, default_value_t = 0)]
    pub inputs: usize,
    #[arg(long, default_value_t = DepthMetric::Tree)]
    pub metric: DepthMetric,
    #[arg(long)]
    pub count_only: bool,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SearchFlags {
    /// Depth bound for each synthesized replacement.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Simultaneous edits per step.
    #[arg(long)]
    pub edits: Option<usize>,
    /// Iteration cap.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub metric: Option<DepthMetric>,
    /// Drop candidates that behave like an earlier one on the data.
    #[arg(long)]
    pub dedup: bool,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub dsl: String,
    /// CSV with header x1,...,xN,action.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "type", default_value = "Float")]
    pub ty: Type,
    /// Starting program; omitted means the first iteration enumerates.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchFlags,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Best program as an S-expression.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PbeArgs {
    /// Run configuration, or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dsl: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub programs: Option<usize>,
    #[command(flatten)]
    pub search: SearchFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ImitateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// program:<file.sexp>, mlp:<weights.json>, builtin:expert or builtin:distilled.
    #[arg(long)]
    pub oracle: Option<String>,
    /// DSL the imitating programs are drawn from.
    #[arg(long)]
    pub dsl: Option<String>,
    /// DSL used to parse a program oracle.
    #[arg(long)]
    pub oracle_dsl: Option<String>,
    #[arg(long = "N")]
    pub n_expert: Option<usize>,
    #[arg(long = "M")]
    pub m_policy: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Iteration cap for the initial fit.
    #[arg(long)]
    pub initial_iters: Option<usize>,
    #[arg(long)]
    pub aggregate: Option<Aggregate>,
    #[arg(long)]
    pub eval_rollouts: Option<usize>,
    /// Starting program for round 0.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub search: SearchFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalPolicyArgs {
    #[arg(long)]
    pub oracle: String,
    #[arg(long, default_value = "builtin:pendulum-extended")]
    pub oracle_dsl: String,
    #[arg(long, default_value_t = 100)]
    pub rollouts: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub oracle: String,
    #[arg(long, default_value = "builtin:pendulum-extended")]
    pub oracle_dsl: String,
    /// Angles x velocities, e.g. 101x101.
    #[arg(long, default_value = "101x101", value_parser = parse_grid)]
    pub grid: (usize, usize),
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('x').ok_or_else(|| format!("expected AxB, got `{s}`"))?;
    let n = |t: &str| match t.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("bad grid size `{t}`")),
    };
    Ok((n(a)?, n(b)?))
}
