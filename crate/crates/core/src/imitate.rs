//! Iterative programmatic imitation of an oracle policy with dataset
//! aggregation.
//!
//! Round 0 fits a program to expert rollouts. Each later round rolls out the
//! current program, labels the visited states with the oracle, grows the
//! dataset and continues the local search from the previous program.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::Dsl;
use crate::error::{Error, Result};
use crate::eval::Dataset;
use crate::lang::Term;
use crate::neighborhood::{iterate_search, Problem, SearchConfig, SearchTrace};
use crate::pendulum::{
    clip_action, collect_trajectories, evaluate_policy, EvalStats, PendulumParams, Policy, ProgramPolicy,
    Trajectory,
};
use crate::types::Type;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregate {
    /// Keep every labeled state seen so far.
    #[default]
    Full,
    /// Expert states plus only the latest on-policy states.
    Initial,
}

impl std::str::FromStr for Aggregate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(Aggregate::Full),
            "initial" => Ok(Aggregate::Initial),
            _ => Err(format!("unknown aggregation `{s}` (expected full or initial)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImitationConfig {
    /// Expert trajectories in the initial dataset.
    pub n_expert: usize,
    /// Policy trajectories added per round.
    pub m_policy: usize,
    /// Rounds after the initial fit.
    pub rounds: usize,
    pub aggregate: Aggregate,
    /// Search settings; `max_iterations` caps each round's search.
    pub search: SearchConfig,
    /// Iteration cap for the initial fit.
    pub initial_iterations: usize,
    pub seed: u64,
    pub eval_rollouts: usize,
    pub eval_seed: u64,
    pub env: PendulumParams,
}

impl Default for ImitationConfig {
    fn default() -> Self {
        ImitationConfig {
            n_expert: 5,
            m_policy: 2,
            rounds: 10,
            aggregate: Aggregate::Full,
            search: SearchConfig {
                max_iterations: 3,
                ..SearchConfig::default()
            },
            initial_iterations: 3,
            seed: 0,
            eval_rollouts: 100,
            eval_seed: 3,
            env: PendulumParams::default(),
        }
    }
}

impl ImitationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_expert == 0 {
            return Err(Error::Config("n_expert must be at least 1".into()));
        }
        if self.initial_iterations == 0 {
            return Err(Error::Config("initial_iterations must be at least 1".into()));
        }
        self.search.validate()
    }
}

/// Oracle actions on `states`, clipped to the action interval.
pub fn label_with_expert<'a>(states: impl IntoIterator<Item = &'a [f64]>, oracle: &dyn Policy) -> Dataset {
    let mut data = Dataset::new(3);
    for s in states {
        data.push(s.to_vec(), clip_action(oracle.act(s)))
            .expect("observations have three entries and clipped actions are finite");
    }
    data
}

fn label_trajectories(trajs: &[Trajectory], oracle: &dyn Policy) -> Dataset {
    label_with_expert(trajs.iter().flat_map(|t| t.observations().map(|o| o.as_slice())), oracle)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub start: Option<Term>,
    pub program: Term,
    /// Loss of `program` on this round's dataset.
    pub loss: f64,
    pub dataset_size: usize,
    pub trace: SearchTrace,
    pub stats: EvalStats,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImitationReport {
    pub rounds: Vec<RoundRecord>,
}

impl ImitationReport {
    /// Loss of the first program the search scored: the baseline for "loss
    /// reduced from round 0".
    pub fn baseline_loss(&self) -> Option<f64> {
        let r0 = self.rounds.first()?;
        r0.trace
            .initial
            .as_ref()
            .map(|(_, l)| *l)
            .or_else(|| r0.trace.records.first().map(|r| r.loss))
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.loss)
    }

    /// Round with the highest mean evaluation return; earliest on ties.
    pub fn best_round(&self) -> Option<&RoundRecord> {
        self.rounds
            .iter()
            .reduce(|best, r| if r.stats.mean > best.stats.mean { r } else { best })
    }

    /// CSV with columns `round,iter,loss,evaluated,tokens,program`.
    pub fn write_trace_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["round", "iter", "loss", "evaluated", "tokens", "program"])?;
        for round in &self.rounds {
            for r in &round.trace.records {
                w.write_record([
                    round.round.to_string(),
                    r.iter.to_string(),
                    r.loss.to_string(),
                    r.evaluated.to_string(),
                    r.tokens.to_string(),
                    r.program.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `round,mean,max,min,balanced`.
    pub fn write_rewards_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["round", "mean", "max", "min", "balanced"])?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                r.stats.mean.to_string(),
                r.stats.max.to_string(),
                r.stats.min.to_string(),
                r.stats.balanced.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the full imitation loop against `oracle`. `on_round` sees each round
/// as soon as it finishes.
pub fn run_imitation(
    oracle: &dyn Policy,
    dsl: &Dsl,
    cfg: &ImitationConfig,
    p_init: Option<&Term>,
    mut on_round: impl FnMut(&RoundRecord),
) -> Result<ImitationReport> {
    cfg.validate()?;
    let inputs = vec![Type::float(); 3];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let expert_trajs = collect_trajectories(oracle, &cfg.env, cfg.n_expert, &mut rng);
    let initial = label_trajectories(&expert_trajs, oracle);
    let mut data = initial.clone();
    let mut report = ImitationReport::default();

    let mut program: Option<Term> = p_init.cloned();
    for round in 0..=cfg.rounds {
        if round > 0 {
            let current = program.as_ref().expect("set after round 0");
            let policy = ProgramPolicy { program: current, dsl };
            let trajs = collect_trajectories(&policy, &cfg.env, cfg.m_policy, &mut rng);
            let fresh = label_trajectories(&trajs, oracle);
            match cfg.aggregate {
                Aggregate::Full => data.extend(&fresh)?,
                Aggregate::Initial => {
                    data = initial.clone();
                    data.extend(&fresh)?;
                }
            }
        }
        let search = SearchConfig {
            max_iterations: if round == 0 {
                cfg.initial_iterations
            } else {
                cfg.search.max_iterations
            },
            ..cfg.search.clone()
        };
        let problem = Problem::new(dsl, &inputs, Type::float(), &data);
        let start = program.clone();
        let trace = iterate_search(&problem, start.as_ref(), &search)?;
        let (best, loss) = match trace.best() {
            Some(r) => (r.program.clone(), r.loss),
            None => trace.initial.clone().expect("a warm start with no iterations keeps its program"),
        };
        let stats = evaluate_policy(
            &ProgramPolicy { program: &best, dsl },
            cfg.eval_rollouts,
            cfg.eval_seed,
            &cfg.env,
        );
        let record = RoundRecord {
            round,
            start,
            program: best.clone(),
            loss,
            dataset_size: data.len(),
            trace,
            stats,
        };
        on_round(&record);
        report.rounds.push(record);
        program = Some(best);
    }
    Ok(report)
}
