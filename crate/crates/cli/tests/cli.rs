use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn synth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synth"))
        .env_remove("SYNTH_JOBS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = synth(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn micro_dsl_count() {
    let dsl = fixture("micro_bool.json");
    let out = ok(&["enumerate", "--dsl", dsl.to_str().unwrap(), "--type", "Bool", "--depth", "3", "--count-only"]);
    assert_eq!(out, "3\n");
    let listed = ok(&["enumerate", "--dsl", dsl.to_str().unwrap(), "--type", "Bool", "--depth", "3"]);
    assert_eq!(listed, "true\n(not true)\n(not (not true))\n");
}

#[test]
fn missing_dsl_is_a_config_error() {
    let out = synth(&["enumerate", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--dsl"));
}

#[test]
fn bad_values_name_their_flag() {
    let out = synth(&["enumerate", "--dsl", "builtin:nope", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--dsl"));

    let out = synth(&["--jobs", "0", "enumerate", "--dsl", "builtin:pbe", "--depth", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--jobs"));

    let dir = tempfile::tempdir().unwrap();
    let out = synth(&["pbe", "--programs", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));

    let missing = dir.path().join("none.json");
    let out = synth(&["eval-policy", "--oracle", &format!("mlp:{}", missing.display()), "--seed", "1", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--oracle"));
}

#[test]
fn expert_evaluation_from_a_program_file() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    let oracle = format!("program:{}", fixture("expert.sexp").display());
    ok(&["eval-policy", "--oracle", &oracle, "--seed", "3", "--out", stats.to_str().unwrap()]);
    let s = json(&stats);
    let mean = s["mean"].as_f64().unwrap();
    assert!((-260.0..=-170.0).contains(&mean), "mean {mean}");
    assert_eq!(s["rollouts"], 100);
    for key in ["max", "min", "balanced"] {
        assert!(s.get(key).is_some(), "stats.json lacks {key}");
    }
    let m = json(&dir.path().join("stats.json.manifest.json"));
    assert_eq!(m["tool"], "synth");
    assert_eq!(m["command"], "eval-policy");
}

#[test]
fn output_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    let pbe = root.join("pbe");
    ok(&["pbe", "--seed", "3", "--programs", "2", "--depth", "3", "--iters", "2", "--out", pbe.to_str().unwrap()]);
    assert_eq!(csv_header(&pbe.join("series.csv")), "program_id,iter,evaluated,norm_error");
    assert_eq!(csv_header(&pbe.join("summary.csv")), "iter,mean,median,std,exact");
    assert_eq!(csv_header(&pbe.join("programs.csv")), "program_id,tokens,truth,found,final_error");
    let stats = json(&pbe.join("stats.json"));
    assert_eq!(stats["programs"], 2);
    assert!(stats["exact_fits"].as_u64().unwrap() <= 2);
    let manifest = json(&pbe.join("manifest.json"));
    assert_eq!(manifest["command"], "pbe");
    assert_eq!(manifest["config"]["pbe"]["seed"], 3);
    assert_eq!(manifest["config"]["search"]["depth"], 3);

    let imitate = root.join("imitate");
    ok(&["imitate", "--seed", "2", "--rounds", "1", "--depth", "2", "--eval-rollouts", "3", "--out", imitate.to_str().unwrap()]);
    assert_eq!(csv_header(&imitate.join("trace.csv")), "round,iter,loss,evaluated,tokens,program");
    assert_eq!(csv_header(&imitate.join("rewards.csv")), "round,mean,max,min,balanced");
    for k in 0..=1 {
        let text = std::fs::read_to_string(imitate.join(format!("policy_{k}.sexp"))).unwrap();
        assert!(text.ends_with('\n') && text.trim().len() > 0);
    }
    let summary = json(&imitate.join("summary.json"));
    for key in ["baseline_loss", "final_loss", "best_round", "best_program", "best_stats"] {
        assert!(summary.get(key).is_some(), "summary.json lacks {key}");
    }

    let heat = root.join("heat.csv");
    ok(&["heatmap", "--oracle", "builtin:expert", "--grid", "5x3", "--out", heat.to_str().unwrap()]);
    let text = std::fs::read_to_string(&heat).unwrap();
    assert_eq!(text.lines().next().unwrap(), "theta,theta_dot,action");
    assert_eq!(text.lines().count(), 1 + 15);
}

#[test]
fn search_prints_and_writes_best_program() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut rows = String::from("x1,x2,action\n");
    for i in 0..8 {
        let x = i as f64 - 3.0;
        rows.push_str(&format!("{x},{},{}\n", 2.0 * x, x * 3.0));
    }
    std::fs::write(&data, rows).unwrap();
    let best = dir.path().join("best.sexp");
    let out = ok(&[
        "search", "--dsl", "builtin:pbe", "--data", data.to_str().unwrap(), "--depth", "3", "--iters", "2", "--out",
        best.to_str().unwrap(),
    ]);
    let (loss, program) = out.trim_end().split_once('\t').unwrap();
    assert_eq!(loss.parse::<f64>().unwrap(), 0.0);
    assert_eq!(std::fs::read_to_string(&best).unwrap().trim_end(), program);
    assert!(dir.path().join("best.sexp.manifest.json").exists());
}

#[test]
fn jobs_from_environment() {
    let a = Command::new(env!("CARGO_BIN_EXE_synth"))
        .env("SYNTH_JOBS", "3")
        .args(["enumerate", "--dsl", "builtin:pbe", "--depth", "2", "--inputs", "1", "--count-only"])
        .output()
        .unwrap();
    assert!(a.status.success());
    let b = Command::new(env!("CARGO_BIN_EXE_synth"))
        .env("SYNTH_JOBS", "zero")
        .args(["enumerate", "--dsl", "builtin:pbe", "--depth", "2", "--count-only"])
        .output()
        .unwrap();
    assert_eq!(b.status.code(), Some(2));
}
