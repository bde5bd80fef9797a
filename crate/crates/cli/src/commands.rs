use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use tnsynth::enumerate::Enumerator;
use tnsynth::eval::{loss, Dataset};
use tnsynth::imitate::{run_imitation, ImitationConfig};
use tnsynth::lang::print_program;
use tnsynth::neighborhood::{iterate_search, Problem, SearchConfig};
use tnsynth::pbe::{run_pbe, PbeConfig};
use tnsynth::pendulum::{evaluate_policy, heatmap as grid_actions, write_heatmap_csv, PendulumParams};
use tnsynth::Type;

use crate::args::{EnumerateArgs, EvalPolicyArgs, HeatmapArgs, ImitateArgs, PbeArgs, SearchArgs, SearchFlags};
use crate::oracle::{load_dsl, load_oracle, load_program};
use crate::output::{create, manifest, manifest_beside, read_config, write_json, write_text};
use crate::Failure;

fn apply_flags(cfg: &mut SearchConfig, flags: &SearchFlags, jobs: usize) -> Result<(), Failure> {
    if let Some(d) = flags.depth {
        cfg.depth = d;
    }
    if let Some(e) = flags.edits {
        cfg.edits = e;
    }
    if let Some(i) = flags.iters {
        cfg.max_iterations = i;
    }
    if let Some(l) = flags.loss {
        cfg.loss = l;
    }
    if let Some(m) = flags.metric {
        cfg.metric = m;
    }
    if flags.dedup {
        cfg.observational_dedup = true;
    }
    cfg.jobs = jobs;
    cfg.validate().map_err(|e| Failure::config("--depth/--edits/--iters", e))
}

fn float_inputs(n: usize) -> Vec<Type> {
    vec![Type::float(); n]
}

#[derive(Serialize)]
struct EnumerateManifest<'a> {
    dsl: &'a str,
    #[serde(rename = "type")]
    ty: String,
    depth: usize,
    inputs: usize,
    metric: String,
    count_only: bool,
}

pub fn enumerate(a: &EnumerateArgs) -> Result<(), Failure> {
    let dsl = load_dsl("--dsl", &a.dsl)?;
    let inputs = float_inputs(a.inputs);
    let e = Enumerator::new(&dsl, &inputs, a.metric);
    let mut text = String::new();
    if a.count_only {
        text = format!("{}\n", e.count(&a.ty, a.depth));
    } else {
        let _ = e.for_each(&a.ty, a.depth, |t| {
            text.push_str(&print_program(&t));
            text.push('\n');
            std::ops::ControlFlow::Continue(())
        });
    }
    match &a.out {
        Some(out) => {
            write_text(out, &text)?;
            let cfg = EnumerateManifest {
                dsl: &a.dsl,
                ty: a.ty.to_string(),
                depth: a.depth,
                inputs: a.inputs,
                metric: a.metric.to_string(),
                count_only: a.count_only,
            };
            write_json(&manifest_beside(out), &manifest("enumerate", &cfg))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SearchManifest<'a> {
    dsl: &'a str,
    data: &'a Path,
    #[serde(rename = "type")]
    ty: String,
    init: Option<&'a Path>,
    search: &'a SearchConfig,
}

pub fn search(a: &SearchArgs, jobs: usize) -> Result<(), Failure> {
    let dsl = load_dsl("--dsl", &a.dsl)?;
    let data = Dataset::load(&a.data).map_err(|e| Failure::config("--data", e))?;
    let inputs = float_inputs(data.arity());
    let init = match &a.init {
        Some(p) => Some(load_program("--init", p, &dsl, data.arity())?),
        None => None,
    };
    let mut cfg = SearchConfig::default();
    apply_flags(&mut cfg, &a.search, jobs)?;
    let problem = Problem::new(&dsl, &inputs, a.ty.clone(), &data);
    let trace = iterate_search(&problem, init.as_ref(), &cfg)?;
    let (best, best_loss) = match trace.best() {
        Some(r) => (r.program.clone(), r.loss),
        None => {
            let p = init.clone().expect("an empty trace comes from a warm start");
            let l = loss(cfg.loss, &p, &data, &dsl);
            (p, l)
        }
    };
    println!("{}\t{}", best_loss, print_program(&best));
    if let Some(path) = &a.trace {
        let w = create(path)?;
        trace.write_csv(w)?;
    }
    if let Some(out) = &a.out {
        write_text(out, &format!("{}\n", print_program(&best)))?;
    }
    if let Some(anchor) = a.out.as_ref().or(a.trace.as_ref()) {
        let m = SearchManifest {
            dsl: &a.dsl,
            data: &a.data,
            ty: a.ty.to_string(),
            init: a.init.as_deref(),
            search: &cfg,
        };
        write_json(&manifest_beside(anchor), &manifest("search", &m))?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PbeRun {
    dsl: String,
    pbe: PbeConfig,
    search: SearchConfig,
}

impl Default for PbeRun {
    fn default() -> Self {
        PbeRun {
            dsl: "builtin:pbe".into(),
            pbe: PbeConfig::default(),
            search: SearchConfig {
                max_iterations: 10,
                ..SearchConfig::default()
            },
        }
    }
}

fn load_run<T: for<'de> Deserialize<'de> + Default>(path: Option<&PathBuf>, command: &str) -> Result<(T, bool), Failure> {
    match path {
        Some(p) => {
            let value = read_config(p, command).map_err(|e| Failure::config("--config", e))?;
            let has_seed = value.pointer(seed_pointer(command)).is_some();
            let run = serde_json::from_value(value).map_err(|e| Failure::config("--config", e))?;
            Ok((run, has_seed))
        }
        None => Ok((T::default(), false)),
    }
}

fn seed_pointer(command: &str) -> &'static str {
    if command == "pbe" {
        "/pbe/seed"
    } else {
        "/imitation/seed"
    }
}

pub fn pbe(a: &PbeArgs, jobs: usize) -> Result<(), Failure> {
    let (mut run, has_seed) = load_run::<PbeRun>(a.config.as_ref(), "pbe")?;
    match a.seed {
        Some(s) => run.pbe.seed = s,
        None if !has_seed => return Err(Failure::Config("--seed is required unless the config sets one".into())),
        None => {}
    }
    if let Some(d) = &a.dsl {
        run.dsl = d.clone();
    }
    if let Some(n) = a.programs {
        run.pbe.num_programs = n;
    }
    apply_flags(&mut run.search, &a.search, jobs)?;
    run.pbe.validate().map_err(|e| Failure::config("--config", e))?;
    let dsl = load_dsl("--dsl", &run.dsl)?;

    let report = run_pbe(&dsl, &run.pbe, &run.search, |r| {
        eprintln!(
            "program {}: error {:.6} after {} iterations",
            r.instance.id,
            r.final_error(),
            r.trace.records.len()
        );
    })?;
    let out = &a.out;
    report.write_series_csv(create(&out.join("series.csv"))?)?;
    report.write_summary_csv(create(&out.join("summary.csv"))?)?;
    report.write_programs_csv(create(&out.join("programs.csv"))?)?;
    let stats = json!({
        "programs": report.results.len(),
        "exact_fits": report.exact_fits(),
        "improved": report.improved(),
        "rejections": report.rejections,
    });
    write_json(&out.join("stats.json"), &stats)?;
    write_json(&out.join("manifest.json"), &manifest("pbe", &run))?;
    eprintln!(
        "{} of {} exact, {} improved",
        report.exact_fits(),
        report.results.len(),
        report.improved()
    );
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ImitateRun {
    oracle: String,
    oracle_dsl: String,
    dsl: String,
    init: Option<PathBuf>,
    imitation: ImitationConfig,
}

impl Default for ImitateRun {
    fn default() -> Self {
        ImitateRun {
            oracle: "builtin:expert".into(),
            oracle_dsl: "builtin:pendulum-extended".into(),
            dsl: "builtin:pendulum".into(),
            init: None,
            imitation: ImitationConfig::default(),
        }
    }
}

pub fn imitate(a: &ImitateArgs, jobs: usize) -> Result<(), Failure> {
    let (mut run, has_seed) = load_run::<ImitateRun>(a.config.as_ref(), "imitate")?;
    match a.seed {
        Some(s) => run.imitation.seed = s,
        None if !has_seed => return Err(Failure::Config("--seed is required unless the config sets one".into())),
        None => {}
    }
    let cfg = &mut run.imitation;
    if let Some(v) = a.n_expert {
        cfg.n_expert = v;
    }
    if let Some(v) = a.m_policy {
        cfg.m_policy = v;
    }
    if let Some(v) = a.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = a.initial_iters {
        cfg.initial_iterations = v;
    }
    if let Some(v) = a.aggregate {
        cfg.aggregate = v;
    }
    if let Some(v) = a.eval_rollouts {
        cfg.eval_rollouts = v;
    }
    apply_flags(&mut cfg.search, &a.search, jobs)?;
    cfg.validate().map_err(|e| Failure::config("--N/--initial-iters", e))?;
    if let Some(v) = &a.oracle {
        run.oracle = v.clone();
    }
    if let Some(v) = &a.oracle_dsl {
        run.oracle_dsl = v.clone();
    }
    if let Some(v) = &a.dsl {
        run.dsl = v.clone();
    }
    if let Some(v) = &a.init {
        run.init = Some(v.clone());
    }

    let oracle = load_oracle(&run.oracle, &run.oracle_dsl)?;
    let dsl = load_dsl("--dsl", &run.dsl)?;
    let init = match &run.init {
        Some(p) => Some(load_program("--init", p, &dsl, 3)?),
        None => None,
    };
    let out = &a.out;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("manifest.json"), &manifest("imitate", &run))?;
    // policies land as soon as each round ends so long runs leave partial results
    let mut write_err = None;
    let report = run_imitation(&oracle, &dsl, &run.imitation, init.as_ref(), |r| {
        eprintln!(
            "round {}: loss {:.6} on {} states, mean return {:.2}, balanced {}/{}",
            r.round, r.loss, r.dataset_size, r.stats.mean, r.stats.balanced, r.stats.rollouts
        );
        let path = out.join(format!("policy_{}.sexp", r.round));
        if let Err(e) = write_text(&path, &format!("{}\n", print_program(&r.program))) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    report.write_trace_csv(create(&out.join("trace.csv"))?)?;
    report.write_rewards_csv(create(&out.join("rewards.csv"))?)?;
    let best = report.best_round().expect("at least one round");
    let summary = json!({
        "baseline_loss": report.baseline_loss(),
        "final_loss": report.final_loss(),
        "best_round": best.round,
        "best_program": print_program(&best.program),
        "best_stats": best.stats,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct PolicyManifest<'a> {
    oracle: &'a str,
    oracle_dsl: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    rollouts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<String>,
    env: PendulumParams,
}

pub fn eval_policy(a: &EvalPolicyArgs) -> Result<(), Failure> {
    let oracle = load_oracle(&a.oracle, &a.oracle_dsl)?;
    let env = PendulumParams::default();
    let stats = evaluate_policy(&oracle, a.rollouts, a.seed, &env);
    write_json(&a.out, &stats)?;
    let m = PolicyManifest {
        oracle: &a.oracle,
        oracle_dsl: &a.oracle_dsl,
        rollouts: Some(a.rollouts),
        seed: Some(a.seed),
        grid: None,
        env,
    };
    write_json(&manifest_beside(&a.out), &manifest("eval-policy", &m))?;
    println!(
        "mean {:.2}, max {:.2}, min {:.2}, balanced {}/{}",
        stats.mean, stats.max, stats.min, stats.balanced, stats.rollouts
    );
    Ok(())
}

pub fn heatmap(a: &HeatmapArgs) -> Result<(), Failure> {
    let oracle = load_oracle(&a.oracle, &a.oracle_dsl)?;
    let cells = grid_actions(&oracle, a.grid.0, a.grid.1);
    write_heatmap_csv(&cells, create(&a.out)?)?;
    let m = PolicyManifest {
        oracle: &a.oracle,
        oracle_dsl: &a.oracle_dsl,
        rollouts: None,
        seed: None,
        grid: Some(format!("{}x{}", a.grid.0, a.grid.1)),
        env: PendulumParams::default(),
    };
    write_json(&manifest_beside(&a.out), &manifest("heatmap", &m))?;
    Ok(())
}
