//! Typed neighborhoods and the best-improvement local search over them.
//!
//! The neighborhood of `P` at location `l` is every program obtained by
//! replacing the subterms at `l` with freshly enumerated terms of the types
//! the context demands. The replaced expression itself is offered as one more
//! candidate of cost 1, so a neighbor can keep it, wrap it, or drop it.

use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use std::ops::ControlFlow;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::Dsl;
use crate::enumerate::{DepthMetric, Enumerator};
use crate::error::{Error, Result};
use crate::eval::{BatchEval, Columns, Dataset, LossKind};
use crate::lang::{edit_arc, expr_at_arc, locations, print_program, token_count, Location, Term};
use crate::types::{infer, type_at, Type};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Depth bound `d` for every synthesized replacement.
    pub depth: usize,
    /// Maximum number of simultaneous edits `n`.
    pub edits: usize,
    pub max_iterations: usize,
    pub loss: LossKind,
    pub metric: DepthMetric,
    /// Skip candidates whose outputs on the data repeat an earlier candidate's.
    pub observational_dedup: bool,
    /// Report raw neighborhood yields instead of unique scored programs.
    pub count_raw: bool,
    /// Worker threads for scoring; never affects results.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            depth: 4,
            edits: 1,
            max_iterations: 20,
            loss: LossKind::Mse,
            metric: DepthMetric::Insertions,
            observational_dedup: false,
            count_raw: false,
            jobs: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be at least 1")))
            }
        };
        check(self.depth >= 1, "depth")?;
        check(self.edits >= 1, "edits")?;
        check(self.max_iterations >= 1, "max_iterations")?;
        check(self.jobs >= 1, "jobs")
    }
}

/// One search iteration: the best program found and its loss.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub program: Term,
    pub loss: f64,
    pub evaluated: u64,
    pub tokens: usize,
    pub wall: Duration,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchTrace {
    /// Starting program and its loss, when the search was warm-started.
    pub initial: Option<(Term, f64)>,
    pub records: Vec<IterationRecord>,
}

impl SearchTrace {
    pub fn best(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn total_evaluated(&self) -> u64 {
        self.records.iter().map(|r| r.evaluated).sum()
    }

    /// CSV with columns `iter,loss,evaluated,tokens,program`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["iter", "loss", "evaluated", "tokens", "program"])?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                r.loss.to_string(),
                r.evaluated.to_string(),
                r.tokens.to_string(),
                print_program(&r.program),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-path replacement sets for one location.
struct Slots {
    location: Location,
    replacements: Vec<Vec<Arc<Term>>>,
    // types the slots must have jointly; only checked when there are several
    joint: bool,
}

fn slots_for(
    dsl: &Dsl,
    inputs: &[Type],
    root: &Arc<Term>,
    location: Location,
    d: usize,
    metric: DepthMetric,
) -> Result<Slots> {
    let types = type_at(root, &location, dsl, inputs)?;
    let mut replacements = Vec::with_capacity(types.len());
    for (path, ty) in location.paths.iter().zip(&types) {
        let reuse = expr_at_arc(root, path)?;
        let reuse_ty = infer(&reuse, dsl, inputs)?;
        let e = Enumerator::new(dsl, inputs, metric).with_extra(reuse, reuse_ty);
        replacements.push(e.collect(ty, d));
    }
    Ok(Slots {
        joint: location.len() > 1,
        location,
        replacements,
    })
}

/// Calls `visit` on every member of `N(P, l)` in enumeration order.
fn for_each_at<F>(
    dsl: &Dsl,
    inputs: &[Type],
    root: &Arc<Term>,
    slots: &Slots,
    visit: &mut F,
) -> Result<ControlFlow<()>>
where
    F: FnMut(Arc<Term>) -> ControlFlow<()>,
{
    if slots.replacements.iter().any(Vec::is_empty) {
        return Ok(ControlFlow::Continue(()));
    }
    let top = if slots.joint {
        Some(infer(root, dsl, inputs)?)
    } else {
        None
    };
    let mut idx = vec![0usize; slots.replacements.len()];
    loop {
        let chosen: Vec<Arc<Term>> = idx
            .iter()
            .zip(&slots.replacements)
            .map(|(&i, r)| r[i].clone())
            .collect();
        let candidate = edit_arc(root, &slots.location, &chosen)?;
        let keep = match &top {
            None => true,
            Some(top) => infer(&candidate, dsl, inputs).is_ok_and(|t| t == *top),
        };
        if keep && visit(candidate).is_break() {
            return Ok(ControlFlow::Break(()));
        }
        // odometer, last slot fastest
        let mut k = idx.len();
        loop {
            if k == 0 {
                return Ok(ControlFlow::Continue(()));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < slots.replacements[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Every member of the neighborhood of `p` at `l`, in enumeration order.
pub fn neighborhood_at(
    dsl: &Dsl,
    inputs: &[Type],
    p: &Term,
    l: &Location,
    d: usize,
    metric: DepthMetric,
) -> Result<Vec<Term>> {
    let root = Arc::new(p.clone());
    let slots = slots_for(dsl, inputs, &root, l.clone(), d, metric)?;
    let mut out = Vec::new();
    let _ = for_each_at(dsl, inputs, &root, &slots, &mut |t| {
        out.push((*t).clone());
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Streams the union of the neighborhoods over `locations(P, n)`,
/// location-major. Repeats across locations are yielded again.
pub fn for_each_neighbor<F>(
    dsl: &Dsl,
    inputs: &[Type],
    p: &Arc<Term>,
    cfg: &SearchConfig,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(Arc<Term>) -> ControlFlow<()>,
{
    for l in locations(p, cfg.edits) {
        let slots = slots_for(dsl, inputs, p, l, cfg.depth, cfg.metric)?;
        if for_each_at(dsl, inputs, p, &slots, &mut visit)?.is_break() {
            break;
        }
    }
    Ok(())
}

/// The full neighborhood with structural repeats removed, first occurrence kept.
pub fn full_neighborhood(dsl: &Dsl, inputs: &[Type], p: &Term, cfg: &SearchConfig) -> Result<Vec<Term>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for_each_neighbor(dsl, inputs, &Arc::new(p.clone()), cfg, |t| {
        if seen.insert(t.clone()) {
            out.push((*t).clone());
        }
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Outcome of scanning one neighborhood.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub program: Term,
    pub loss: f64,
    pub evaluated: u64,
}

#[derive(Clone, Copy, PartialEq)]
struct Score {
    loss: f64,
    tokens: usize,
    index: u64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.loss
            .total_cmp(&other.loss)
            .then(self.tokens.cmp(&other.tokens))
            .then(self.index.cmp(&other.index))
            .is_lt()
    }
}

const CHUNK: usize = 4096;

/// Scores candidate streams in parallel while keeping the selection a pure
/// function of the stream.
struct Scorer<'a> {
    eval: BatchEval<'a>,
    cfg: &'a SearchConfig,
    pool: &'a rayon::ThreadPool,
    seen: HashSet<Arc<Term>>,
    behaviors: HashSet<u64>,
    pending: Vec<(u64, Arc<Term>)>,
    raw: u64,
    evaluated: u64,
    best: Option<(Score, Arc<Term>)>,
}

impl<'a> Scorer<'a> {
    fn new(dsl: &'a Dsl, cols: &'a Columns, cfg: &'a SearchConfig, pool: &'a rayon::ThreadPool) -> Self {
        Scorer {
            eval: BatchEval::new(dsl, cols),
            cfg,
            pool,
            seen: HashSet::new(),
            behaviors: HashSet::new(),
            pending: Vec::with_capacity(CHUNK),
            raw: 0,
            evaluated: 0,
            best: None,
        }
    }

    fn push(&mut self, t: Arc<Term>) {
        let index = self.raw;
        self.raw += 1;
        if self.seen.insert(t.clone()) {
            self.pending.push((index, t));
            if self.pending.len() >= CHUNK {
                self.flush();
            }
        }
    }

    fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let batch = std::mem::take(&mut self.pending);
        let eval = &self.eval;
        let kind = self.cfg.loss;
        let dedup = self.cfg.observational_dedup;
        let scored: Vec<(Score, Option<u64>)> = self.pool.install(|| {
            batch
                .par_iter()
                .map(|(index, t)| {
                    let col = eval.eval_arc(t);
                    let loss = col
                        .as_deref()
                        .map_or(f64::INFINITY, |c| kind.score(c, eval.targets()));
                    let behavior = dedup.then(|| behavior_hash(col.as_deref()));
                    (
                        Score {
                            loss,
                            tokens: token_count(t),
                            index: *index,
                        },
                        behavior,
                    )
                })
                .collect()
        });
        for ((score, behavior), (_, t)) in scored.into_iter().zip(batch) {
            if let Some(h) = behavior {
                if !self.behaviors.insert(h) {
                    continue;
                }
            }
            self.evaluated += 1;
            if self.best.as_ref().is_none_or(|(b, _)| score.better_than(b)) {
                self.best = Some((score, t));
            }
        }
    }

    fn finish(mut self) -> Option<StepResult> {
        self.flush();
        let evaluated = if self.cfg.count_raw { self.raw } else { self.evaluated };
        self.best.map(|(s, t)| StepResult {
            program: (*t).clone(),
            loss: s.loss,
            evaluated,
        })
    }
}

fn behavior_hash(col: Option<&[f64]>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    match col {
        Some(c) => c.iter().for_each(|x| x.to_bits().hash(&mut h)),
        None => u64::MAX.hash(&mut h),
    }
    h.finish()
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Inputs and data shared by every step of one search.
pub struct Problem<'a> {
    pub dsl: &'a Dsl,
    pub inputs: &'a [Type],
    pub target: Type,
    pub data: &'a Dataset,
}

impl<'a> Problem<'a> {
    pub fn new(dsl: &'a Dsl, inputs: &'a [Type], target: Type, data: &'a Dataset) -> Self {
        Problem {
            dsl,
            inputs,
            target,
            data,
        }
    }
}

/// Best member of the full neighborhood of `p`. Ties go to fewer tokens,
/// then to the earlier position in the neighborhood stream.
pub fn local_search_step(problem: &Problem, p: &Term, cfg: &SearchConfig) -> Result<StepResult> {
    cfg.validate()?;
    let cols = Columns::from_dataset(problem.data);
    let pool = pool(cfg.jobs)?;
    step(problem, &cols, &pool, &Arc::new(p.clone()), cfg)
}

fn step(
    problem: &Problem,
    cols: &Columns,
    pool: &rayon::ThreadPool,
    p: &Arc<Term>,
    cfg: &SearchConfig,
) -> Result<StepResult> {
    let mut scorer = Scorer::new(problem.dsl, cols, cfg, pool);
    scorer.eval.prime(p);
    for_each_neighbor(problem.dsl, problem.inputs, p, cfg, |t| {
        scorer.push(t);
        ControlFlow::Continue(())
    })?;
    scorer
        .finish()
        .ok_or_else(|| Error::Config("empty neighborhood".into()))
}

fn enumerate_step(
    problem: &Problem,
    cols: &Columns,
    pool: &rayon::ThreadPool,
    cfg: &SearchConfig,
) -> Result<StepResult> {
    let mut scorer = Scorer::new(problem.dsl, cols, cfg, pool);
    let _ = Enumerator::new(problem.dsl, problem.inputs, cfg.metric).for_each(&problem.target, cfg.depth, |t| {
        scorer.push(t);
        ControlFlow::Continue(())
    });
    scorer.finish().ok_or_else(|| {
        Error::Config(format!(
            "no program of type {} within depth {}",
            problem.target, cfg.depth
        ))
    })
}

/// Repeated best-improvement steps from `p0`, or from a plain enumeration
/// when `p0` is `None`. Stops after `max_iterations`, at zero loss, or as
/// soon as an iteration fails to strictly improve.
pub fn iterate_search(problem: &Problem, p0: Option<&Term>, cfg: &SearchConfig) -> Result<SearchTrace> {
    cfg.validate()?;
    let cols = Columns::from_dataset(problem.data);
    let pool = pool(cfg.jobs)?;
    let mut trace = SearchTrace::default();
    let (mut current, mut loss) = match p0 {
        Some(p) => {
            let p = Arc::new(p.clone());
            let mut eval = BatchEval::new(problem.dsl, &cols);
            eval.prime(&p);
            let l = eval.loss(cfg.loss, &p);
            trace.initial = Some(((*p).clone(), l));
            (Some(p), l)
        }
        None => (None, f64::INFINITY),
    };
    for iter in 0..cfg.max_iterations {
        if loss == 0.0 {
            break;
        }
        let start = Instant::now();
        let res = match &current {
            None => enumerate_step(problem, &cols, &pool, cfg)?,
            Some(p) => step(problem, &cols, &pool, p, cfg)?,
        };
        let improved = res.loss < loss;
        // a step never returns worse than its start: the start is its own neighbor
        let (program, new_loss) = if improved || current.is_none() {
            (res.program, res.loss)
        } else {
            ((**current.as_ref().unwrap()).clone(), loss)
        };
        trace.records.push(IterationRecord {
            iter,
            tokens: token_count(&program),
            program: program.clone(),
            loss: new_loss,
            evaluated: res.evaluated,
            wall: start.elapsed(),
        });
        let stop = current.is_some() && !improved;
        current = Some(Arc::new(program));
        loss = new_loss;
        if stop {
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate;
    use crate::lang::parse_program;

    fn floats() -> Vec<Type> {
        vec![Type::float(); 3]
    }

    fn small_dsl() -> Dsl {
        Dsl::from_json(
            r#"{"entries":[{"name":"mul","type":"Float -> Float -> Float","impl":"builtin:mul"},
                           {"name":"1","type":"Float","impl":"const:1"},
                           {"name":"sign","type":"Float -> Float","impl":"builtin:sign"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn neighborhood_at_leaf_depth_one() {
        let dsl = small_dsl();
        let inputs = floats();
        let p = parse_program("((mul x1) x3)", &dsl, 3).unwrap();
        let got = neighborhood_at(&dsl, &inputs, &p, &Location::single(vec![1]), 1, DepthMetric::Tree).unwrap();
        let texts: Vec<String> = got.iter().map(print_program).collect();
        assert_eq!(
            texts,
            ["((mul x1) 1)", "((mul x1) x1)", "((mul x1) x2)", "((mul x1) x3)", "((mul x1) x3)"]
        );
    }

    #[test]
    fn reuse_can_be_wrapped() {
        let dsl = small_dsl();
        let p = Term::input(2);
        for metric in [DepthMetric::Tree, DepthMetric::Insertions] {
            let got = neighborhood_at(&dsl, &floats(), &p, &Location::single(vec![]), 2, metric).unwrap();
            let want = parse_program("(sign x3)", &dsl, 3).unwrap();
            assert!(got.contains(&want));
            assert!(got.contains(&p));
        }
    }

    #[test]
    fn neighbors_keep_the_top_type() {
        let dsl = Dsl::pendulum();
        let p = parse_program(include_str!("../fixtures/expert.sexp"), &dsl, 3).unwrap();
        let cfg = SearchConfig {
            depth: 2,
            ..SearchConfig::default()
        };
        let all = full_neighborhood(&dsl, &floats(), &p, &cfg).unwrap();
        assert!(all.contains(&p));
        for t in all.iter().step_by(97) {
            assert_eq!(infer(t, &dsl, &floats()).unwrap(), Type::float());
        }
    }

    #[test]
    fn one_edit_away_is_found() {
        let dsl = Dsl::pendulum();
        let inputs = floats();
        let p = parse_program("((mul x2) -6)", &dsl, 3).unwrap();
        let q = parse_program("((sub ((mul x2) -6)) x3)", &dsl, 3).unwrap();
        let mut data = Dataset::new(3);
        for i in 0..20 {
            let obs = vec![(i as f64 * 0.37).cos(), (i as f64 * 0.37).sin(), i as f64 * 0.1 - 1.0];
            let a = evaluate(&q, &dsl, &obs).unwrap().as_number().unwrap();
            data.push(obs, a).unwrap();
        }
        let problem = Problem::new(&dsl, &inputs, Type::float(), &data);
        let res = local_search_step(&problem, &p, &SearchConfig::default()).unwrap();
        assert_eq!(res.loss, 0.0);
        for jobs in [2, 4] {
            let again = local_search_step(&problem, &p, &SearchConfig { jobs, ..SearchConfig::default() }).unwrap();
            assert_eq!(again, res);
        }
    }

    #[test]
    fn empty_start_enumerates() {
        let dsl = Dsl::pbe();
        let inputs = floats();
        let truth = parse_program("((sub x1) (sqr x2))", &dsl, 3).unwrap();
        let mut data = Dataset::new(3);
        for i in 0..10 {
            let obs = vec![i as f64 - 4.5, 0.5 * i as f64, 1.0];
            let a = evaluate(&truth, &dsl, &obs).unwrap().as_number().unwrap();
            data.push(obs, a).unwrap();
        }
        let problem = Problem::new(&dsl, &inputs, Type::float(), &data);
        let cfg = SearchConfig {
            loss: LossKind::AbsSum,
            ..SearchConfig::default()
        };
        let trace = iterate_search(&problem, None, &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].loss, 0.0);
    }
}
