mod support;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{node_paths, oracle_neighborhood, oracle_step, random_search_instance, search_dsl, subterm, Bound};
use tnsynth::enumerate::DepthMetric;
use tnsynth::eval::{loss, LossKind};
use tnsynth::lang::{disjoint, edit, parse_program, print_program, Location};
use tnsynth::mlp::distilled_expert;
use tnsynth::neighborhood::{full_neighborhood, iterate_search, local_search_step, Problem, SearchConfig};
use tnsynth::pbe::{PbeConfig, Sampler};
use tnsynth::pendulum::{wrap, PendulumParams, PendulumState, Policy};
use tnsynth::{Dsl, Type};

fn sampled_program(seed: u64) -> tnsynth::Term {
    let dsl = Dsl::pbe();
    let cfg = PbeConfig {
        max_sample_depth: 4,
        ..PbeConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(t) = Sampler::new(&dsl, &cfg).sample(&Type::float(), &mut rng) {
            return t;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let dsl = Dsl::pbe();
        let t = sampled_program(seed);
        let text = print_program(&t);
        prop_assert_eq!(parse_program(&text, &dsl, 3).unwrap(), t);
    }

    #[test]
    fn edits_are_local(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let t = sampled_program(seed);
        let paths = node_paths(&t);
        let p = paths[pick.index(paths.len())].clone();
        let r = tnsynth::Term::prim("0.5");
        let e = edit(&t, &Location::single(p.clone()), &[r.clone()]).unwrap();
        prop_assert_eq!(subterm(&e, &p), &r);
        for q in paths.iter().filter(|q| disjoint(q, &p)) {
            prop_assert_eq!(subterm(&e, q), subterm(&t, q));
        }
    }

    #[test]
    fn wrap_is_periodic(theta in -50.0f64..50.0, k in -5i32..5) {
        let w = wrap(theta);
        prop_assert!((-PI..PI).contains(&w));
        prop_assert!((wrap(theta + 2.0 * PI * k as f64) - w).abs() < 1e-9);
        prop_assert!(((theta - w) / (2.0 * PI) - ((theta - w) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn velocity_stays_clipped(theta in -10.0f64..10.0, dot in -8.0f64..8.0, a in -5.0f64..5.0) {
        let p = PendulumParams::default();
        let (s, r) = p.step(&PendulumState::new(theta, dot), a);
        prop_assert!(s.theta_dot.abs() <= 8.0);
        prop_assert!(r <= 0.0);
        prop_assert_eq!(s.theta, theta + s.theta_dot * p.dt);
    }
}

#[test]
fn mlp_range_and_lipschitz() {
    let net = distilled_expert();
    let bound = net.lipschitz_bound();
    assert!(bound.is_finite() && bound > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let a = net.act(&x);
        assert!((-1.0..=1.0).contains(&a));
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect();
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!((net.act(&y) - a).abs() <= bound * dist + 1e-12);
        assert_eq!(net.act(&x), a);
    }
}

#[test]
fn neighborhood_matches_generate_and_filter() {
    let dsl = search_dsl();
    let inputs = vec![Type::float(); 2];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..30 {
        let (p, _) = random_search_instance(&mut rng, &dsl);
        let (metric, bound, d) = if i % 2 == 0 {
            (DepthMetric::Insertions, Bound::Tokens, 3)
        } else {
            (DepthMetric::Tree, Bound::Tree, 2)
        };
        let cfg = SearchConfig {
            depth: d,
            metric,
            ..SearchConfig::default()
        };
        let got: BTreeSet<String> = full_neighborhood(&dsl, &inputs, &p, &cfg)
            .unwrap()
            .iter()
            .map(print_program)
            .collect();
        assert_eq!(got, oracle_neighborhood(&dsl, &inputs, &p, d, bound), "{p}");
    }
}

#[test]
fn step_matches_scalar_oracle_and_never_worsens() {
    let dsl = search_dsl();
    let inputs = vec![Type::float(); 2];
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..40 {
        let (p, data) = random_search_instance(&mut rng, &dsl);
        let cfg = SearchConfig {
            depth: 3,
            loss: LossKind::AbsSum,
            ..SearchConfig::default()
        };
        let problem = Problem::new(&dsl, &inputs, Type::float(), &data);
        let res = local_search_step(&problem, &p, &cfg).unwrap();
        let start = loss(LossKind::AbsSum, &p, &data, &dsl);
        assert!(res.loss <= start || !start.is_finite());
        let (want_loss, want_tokens) = oracle_step(&dsl, &inputs, &p, &data, 3, Bound::Tokens, LossKind::AbsSum);
        assert_eq!(res.loss, want_loss);
        assert_eq!(tnsynth::lang::token_count(&res.program), want_tokens);
        assert_eq!(loss(LossKind::AbsSum, &res.program, &data, &dsl), res.loss);
    }
}

#[test]
fn iterated_losses_never_increase() {
    let dsl = search_dsl();
    let inputs = vec![Type::float(); 2];
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let (p, data) = random_search_instance(&mut rng, &dsl);
        let cfg = SearchConfig {
            depth: 3,
            max_iterations: 6,
            ..SearchConfig::default()
        };
        let problem = Problem::new(&dsl, &inputs, Type::float(), &data);
        let trace = iterate_search(&problem, Some(&p), &cfg).unwrap();
        let mut prev = trace.initial.as_ref().unwrap().1;
        for r in &trace.records {
            assert!(r.loss <= prev);
            prev = r.loss;
        }
        // halts on the first non-improving iteration
        let n = trace.records.len();
        if n >= 2 {
            assert!(trace.records[..n - 1].windows(2).all(|w| w[1].loss < w[0].loss));
        }
    }
}
