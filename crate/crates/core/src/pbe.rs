//! Programming-by-example benchmark: sampled ground-truth programs, their
//! rejection filters, and the iterative-search driver that fits them.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::Dsl;
use crate::enumerate::{observational_signature, DepthMetric, EquivalenceIndex};
use crate::error::{Error, Result};
use crate::eval::{evaluate, normalize_errors, Dataset, LossKind, Value};
use crate::lang::{token_count, Term};
use crate::neighborhood::{iterate_search, Problem, SearchConfig, SearchTrace};
use crate::types::{Subst, Type};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbeConfig {
    pub num_programs: usize,
    /// Input sets per program.
    pub num_inputs: usize,
    pub input_arity: usize,
    pub input_low: f64,
    pub input_high: f64,
    /// Sampling weight of every input variable; DSL entries carry their own.
    pub input_weight: f64,
    pub min_tokens: usize,
    /// Reject programs with an observational equivalent within this bound.
    pub reject_depth: usize,
    pub reject_metric: DepthMetric,
    pub num_probes: usize,
    /// Tree depth beyond which sampling only picks constants and inputs.
    pub max_sample_depth: usize,
    /// Attempts per program before giving up.
    pub resample_budget: usize,
    /// Error below which a fit counts as exact.
    pub exact_tolerance: f64,
    pub seed: u64,
}

impl Default for PbeConfig {
    fn default() -> Self {
        PbeConfig {
            num_programs: 20,
            num_inputs: 10,
            input_arity: 3,
            input_low: -5.0,
            input_high: 5.0,
            input_weight: 3.0,
            min_tokens: 8,
            reject_depth: 4,
            reject_metric: DepthMetric::Insertions,
            num_probes: 16,
            max_sample_depth: 4,
            resample_budget: 100_000,
            exact_tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl PbeConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.min_tokens == 0 {
            return fail("min_tokens must be at least 1");
        }
        if self.reject_depth == 0 {
            return fail("reject_depth must be at least 1");
        }
        if self.max_sample_depth == 0 {
            return fail("max_sample_depth must be at least 1");
        }
        if self.num_inputs == 0 || self.input_arity == 0 {
            return fail("num_inputs and input_arity must be at least 1");
        }
        if !(self.input_low < self.input_high) {
            return fail("input_low must be below input_high");
        }
        if !(self.input_weight > 0.0) {
            return fail("input_weight must be positive");
        }
        Ok(())
    }

    pub fn input_types(&self) -> Vec<Type> {
        vec![Type::float(); self.input_arity]
    }

    pub fn sample_inputs<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..self.input_arity)
                    .map(|_| rng.gen_range(self.input_low..self.input_high))
                    .collect()
            })
            .collect()
    }
}

/// Why a sampled program was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    TooShort,
    NonFinite,
    Constant,
    Equivalent,
}

/// Counts of rejected samples by reason.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RejectionStats {
    pub too_short: usize,
    pub non_finite: usize,
    pub constant: usize,
    pub equivalent: usize,
}

impl RejectionStats {
    fn add(&mut self, r: Rejection) {
        match r {
            Rejection::TooShort => self.too_short += 1,
            Rejection::NonFinite => self.non_finite += 1,
            Rejection::Constant => self.constant += 1,
            Rejection::Equivalent => self.equivalent += 1,
        }
    }
}

/// Weighted top-down sampler over fully applied DSL entries and inputs.
pub struct Sampler<'a> {
    dsl: &'a Dsl,
    cfg: &'a PbeConfig,
}

impl<'a> Sampler<'a> {
    pub fn new(dsl: &'a Dsl, cfg: &'a PbeConfig) -> Self {
        Sampler { dsl, cfg }
    }

    pub fn sample<R: Rng>(&self, target: &Type, rng: &mut R) -> Option<Term> {
        let mut next = target.max_var().map_or(0, |m| m + 1);
        let mut subst = Subst::new();
        self.go(target, 1, &mut subst, &mut next, rng)
    }

    fn go<R: Rng>(&self, want: &Type, depth: usize, subst: &mut Subst, next: &mut u32, rng: &mut R) -> Option<Term> {
        let want = subst.apply(want);
        let at_cap = depth >= self.cfg.max_sample_depth;
        // (term, weight, parameter types, substitution after matching)
        let mut options: Vec<(Term, f64, Vec<Type>, Subst)> = Vec::new();
        for e in self.dsl.entries() {
            if at_cap && e.arity() > 0 {
                continue;
            }
            let ty = e.ty.freshen(next);
            let mut s = subst.clone();
            if s.unify(ty.yield_type(), &want).is_ok() {
                let params = ty.params().into_iter().cloned().collect();
                options.push((Term::Prim(e.name.clone()), e.weight, params, s));
            }
        }
        for i in 0..self.cfg.input_arity {
            let mut s = subst.clone();
            if s.unify(&Type::float(), &want).is_ok() {
                options.push((Term::Input(i), self.cfg.input_weight, Vec::new(), s));
            }
        }
        let total: f64 = options.iter().map(|o| o.1).sum();
        if options.is_empty() || total <= 0.0 {
            return None;
        }
        let mut x = rng.gen_range(0.0..total);
        let pick = options
            .iter()
            .position(|o| {
                x -= o.1;
                x < 0.0
            })
            .unwrap_or(options.len() - 1);
        let (head, _, params, s) = options.swap_remove(pick);
        *subst = s;
        let mut t = head;
        for p in params {
            let arg = self.go(&p, depth + 1, subst, next, rng)?;
            t = Term::app(t, arg);
        }
        Some(t)
    }
}

/// Outputs of `t` on `inputs` as numbers, or `None` if any is non-finite.
pub fn outputs_on(t: &Term, dsl: &Dsl, inputs: &[Vec<f64>]) -> Option<Vec<f64>> {
    inputs
        .iter()
        .map(|x| match evaluate(t, dsl, x) {
            Ok(v @ (Value::F(_) | Value::B(_))) => v.as_number(),
            _ => None,
        })
        .collect()
}

/// Applies the length and constancy filters; the equivalence filter needs an
/// index and is checked by [`check_filters`].
pub fn cheap_filters(t: &Term, dsl: &Dsl, inputs: &[Vec<f64>], min_tokens: usize) -> Result<Vec<f64>, Rejection> {
    if token_count(t) < min_tokens {
        return Err(Rejection::TooShort);
    }
    let out = outputs_on(t, dsl, inputs).ok_or(Rejection::NonFinite)?;
    if out.windows(2).all(|w| w[0] == w[1]) {
        return Err(Rejection::Constant);
    }
    Ok(out)
}

pub fn check_filters(
    t: &Term,
    ty: &Type,
    dsl: &Dsl,
    inputs: &[Vec<f64>],
    min_tokens: usize,
    index: &mut EquivalenceIndex,
) -> Result<Vec<f64>, Rejection> {
    let out = cheap_filters(t, dsl, inputs, min_tokens)?;
    let sig = observational_signature(t, index.probes(), dsl);
    if index.contains(dsl, ty, &sig) {
        return Err(Rejection::Equivalent);
    }
    Ok(out)
}

/// One benchmark task: a ground-truth program and its labeled examples.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: usize,
    pub truth: Term,
    pub examples: Dataset,
}

/// Draws `cfg.num_programs` instances that pass every filter.
pub fn sample_instances(dsl: &Dsl, cfg: &PbeConfig) -> Result<(Vec<Instance>, RejectionStats)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inputs = cfg.input_types();
    let probes = cfg.sample_inputs(cfg.num_probes, &mut rng);
    let mut index = EquivalenceIndex::new(dsl, &inputs, cfg.reject_depth, cfg.reject_metric, probes);
    let sampler = Sampler::new(dsl, cfg);
    let target = Type::float();
    let mut stats = RejectionStats::default();
    let mut out = Vec::with_capacity(cfg.num_programs);
    for id in 0..cfg.num_programs {
        let xs = cfg.sample_inputs(cfg.num_inputs, &mut rng);
        let mut accepted = None;
        for _ in 0..cfg.resample_budget {
            let Some(t) = sampler.sample(&target, &mut rng) else {
                continue;
            };
            match check_filters(&t, &target, dsl, &xs, cfg.min_tokens, &mut index) {
                Ok(ys) => {
                    accepted = Some((t, ys));
                    break;
                }
                Err(r) => stats.add(r),
            }
        }
        let (truth, ys) = accepted.ok_or(Error::SamplingBudget(cfg.resample_budget))?;
        let mut examples = Dataset::new(cfg.input_arity);
        for (x, y) in xs.into_iter().zip(ys) {
            examples.push(x, y)?;
        }
        out.push(Instance { id, truth, examples });
    }
    Ok((out, stats))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceResult {
    pub instance: Instance,
    pub trace: SearchTrace,
    pub errors: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Programs evaluated up to and including each iteration.
    pub cumulative_evaluated: Vec<u64>,
}

impl InstanceResult {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().unwrap_or(&f64::INFINITY)
    }

    pub fn improved(&self) -> bool {
        match (self.errors.first(), self.errors.last()) {
            (Some(first), Some(last)) => last < first,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationSummary {
    pub iter: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub exact: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PbeReport {
    pub results: Vec<InstanceResult>,
    pub rejections: RejectionStats,
    pub exact_tolerance: f64,
}

impl PbeReport {
    pub fn exact_fits(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.final_error() < self.exact_tolerance)
            .count()
    }

    pub fn improved(&self) -> usize {
        self.results.iter().filter(|r| r.improved()).count()
    }

    /// Mean, median and standard deviation of the normalized error by
    /// iteration. Instances that stopped early carry their last value.
    pub fn summary(&self) -> Vec<IterationSummary> {
        let len = self.results.iter().map(|r| r.normalized.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                let mut vals: Vec<f64> = self
                    .results
                    .iter()
                    .filter_map(|r| r.normalized.get(i).or(r.normalized.last()).copied())
                    .collect();
                let exact = self
                    .results
                    .iter()
                    .filter(|r| {
                        r.errors
                            .get(i)
                            .or(r.errors.last())
                            .is_some_and(|e| *e < self.exact_tolerance)
                    })
                    .count();
                vals.sort_by(f64::total_cmp);
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let median = if vals.len() % 2 == 1 {
                    vals[vals.len() / 2]
                } else {
                    (vals[vals.len() / 2 - 1] + vals[vals.len() / 2]) / 2.0
                };
                let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
                IterationSummary {
                    iter: i,
                    mean,
                    median,
                    std,
                    exact,
                }
            })
            .collect()
    }

    /// Columns `program_id,iter,evaluated,norm_error`.
    pub fn write_series_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["program_id", "iter", "evaluated", "norm_error"])?;
        for r in &self.results {
            for (i, (e, n)) in r.cumulative_evaluated.iter().zip(&r.normalized).enumerate() {
                w.write_record([r.instance.id.to_string(), i.to_string(), e.to_string(), n.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `iter,mean,median,std,exact`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        for s in self.summary() {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `program_id,tokens,truth,found,final_error`.
    pub fn write_programs_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["program_id", "tokens", "truth", "found", "final_error"])?;
        for r in &self.results {
            let found = r.trace.best().map(|b| b.program.to_string()).unwrap_or_default();
            w.write_record([
                r.instance.id.to_string(),
                token_count(&r.instance.truth).to_string(),
                r.instance.truth.to_string(),
                found,
                r.final_error().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits every instance by iterated local search from the empty program.
pub fn run_instances(
    dsl: &Dsl,
    cfg: &PbeConfig,
    instances: Vec<Instance>,
    search: &SearchConfig,
    mut on_result: impl FnMut(&InstanceResult),
) -> Result<Vec<InstanceResult>> {
    let search = SearchConfig {
        loss: LossKind::AbsSum,
        ..search.clone()
    };
    let inputs = cfg.input_types();
    let mut out = Vec::with_capacity(instances.len());
    for instance in instances {
        let problem = Problem::new(dsl, &inputs, Type::float(), &instance.examples);
        let trace = iterate_search(&problem, None, &search)?;
        let errors = trace.losses();
        let normalized = normalize_errors(&errors);
        let cumulative_evaluated = trace
            .records
            .iter()
            .scan(0u64, |acc, r| {
                *acc += r.evaluated;
                Some(*acc)
            })
            .collect();
        let result = InstanceResult {
            instance,
            trace,
            errors,
            normalized,
            cumulative_evaluated,
        };
        on_result(&result);
        out.push(result);
    }
    Ok(out)
}

pub fn run_pbe(
    dsl: &Dsl,
    cfg: &PbeConfig,
    search: &SearchConfig,
    on_result: impl FnMut(&InstanceResult),
) -> Result<PbeReport> {
    let (instances, rejections) = sample_instances(dsl, cfg)?;
    let results = run_instances(dsl, cfg, instances, search, on_result)?;
    Ok(PbeReport {
        results,
        rejections,
        exact_tolerance: cfg.exact_tolerance,
    })
}
