//! Pendulum swing-up environment, rollouts, the evaluation protocol and
//! policy heatmaps.
//!
//! `θ = 0` is upright. Observations are `(cos θ, sin θ, θ̇)`; actions are
//! normalized torques in `[-1, 1]`, scaled by the maximum torque.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::Dsl;
use crate::error::Result;
use crate::eval::{evaluate, Value};
use crate::lang::{parse_program, Term};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    pub episode_len: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            max_speed: 8.0,
            episode_len: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    pub fn new(theta: f64, theta_dot: f64) -> Self {
        PendulumState { theta, theta_dot }
    }
}

/// Angle folded into `[-π, π)`.
pub fn wrap(theta: f64) -> f64 {
    let tau = 2.0 * PI;
    let mut r = (theta + PI).rem_euclid(tau);
    if r >= tau {
        r -= tau;
    }
    r - PI
}

pub fn observe(s: &PendulumState) -> [f64; 3] {
    [s.theta.cos(), s.theta.sin(), s.theta_dot]
}

/// Reward for applied torque `u`: zero only upright, still, and unforced.
pub fn reward(theta: f64, theta_dot: f64, u: f64) -> f64 {
    let w = wrap(theta);
    -(w * w + 0.1 * theta_dot * theta_dot + 0.001 * u * u)
}

/// Clips to `[-1, 1]`; non-finite actions become 0.
pub fn clip_action(a: f64) -> f64 {
    if a.is_finite() {
        a.clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

impl PendulumParams {
    /// Semi-implicit Euler step; the reward is taken on the pre-step state.
    pub fn step(&self, s: &PendulumState, action: f64) -> (PendulumState, f64) {
        let u = self.max_torque * clip_action(action);
        let r = reward(s.theta, s.theta_dot, u);
        let acc = 3.0 * self.g / (2.0 * self.l) * s.theta.sin() + 3.0 / (self.m * self.l * self.l) * u;
        let theta_dot = (s.theta_dot + acc * self.dt).clamp(-self.max_speed, self.max_speed);
        let theta = s.theta + theta_dot * self.dt;
        (PendulumState { theta, theta_dot }, r)
    }
}

/// Anything that maps an observation to an action.
pub trait Policy: Sync {
    fn act(&self, obs: &[f64]) -> f64;
}

/// A synthesized program used as a policy; failed evaluations act as 0.
pub struct ProgramPolicy<'a> {
    pub program: &'a Term,
    pub dsl: &'a Dsl,
}

impl Policy for ProgramPolicy<'_> {
    fn act(&self, obs: &[f64]) -> f64 {
        match evaluate(self.program, self.dsl, obs) {
            Ok(Value::F(x)) => x,
            _ => 0.0,
        }
    }
}

pub struct FnPolicy<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Policy for FnPolicy<F> {
    fn act(&self, obs: &[f64]) -> f64 {
        (self.0)(obs)
    }
}

impl<P: Policy + ?Sized + Send> Policy for Box<P> {
    fn act(&self, obs: &[f64]) -> f64 {
        (**self).act(obs)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: PendulumState,
    pub obs: [f64; 3],
    /// Clipped action actually applied.
    pub action: f64,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn observations(&self) -> impl Iterator<Item = &[f64; 3]> {
        self.steps.iter().map(|s| &s.obs)
    }

    /// Over the final 50 steps the pendulum stays within 0.2 rad of upright
    /// and slower than 1 rad/s.
    pub fn balanced(&self) -> bool {
        let tail = self.steps.len().saturating_sub(50);
        self.steps.len() >= 50
            && self.steps[tail..]
                .iter()
                .all(|s| wrap(s.state.theta).abs() < 0.2 && s.state.theta_dot.abs() < 1.0)
    }
}

pub fn rollout(policy: &dyn Policy, init: PendulumState, params: &PendulumParams) -> Trajectory {
    let mut s = init;
    let mut steps = Vec::with_capacity(params.episode_len);
    for _ in 0..params.episode_len {
        let obs = observe(&s);
        let action = clip_action(policy.act(&obs));
        let (next, r) = params.step(&s, action);
        steps.push(Step {
            state: s,
            obs,
            action,
            reward: r,
        });
        s = next;
    }
    Trajectory { steps }
}

/// θ uniform on `[π/2, 3π/2]`, θ̇ uniform on `[-1, 1]`.
pub fn sample_initial<R: Rng>(rng: &mut R) -> PendulumState {
    PendulumState {
        theta: rng.gen_range(PI / 2.0..=3.0 * PI / 2.0),
        theta_dot: rng.gen_range(-1.0..=1.0),
    }
}

/// `count` rollouts from sampled initial states. The states are drawn in order
/// before any rollout runs, so the result does not depend on scheduling.
pub fn collect_trajectories<R: Rng>(
    policy: &dyn Policy,
    params: &PendulumParams,
    count: usize,
    rng: &mut R,
) -> Vec<Trajectory> {
    let inits: Vec<PendulumState> = (0..count).map(|_| sample_initial(rng)).collect();
    inits
        .into_par_iter()
        .map(|s| rollout(policy, s, params))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub rollouts: usize,
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub balanced: usize,
}

/// Returns of `n` rollouts from the evaluation distribution seeded by `seed`.
pub fn evaluate_policy(policy: &dyn Policy, n: usize, seed: u64, params: &PendulumParams) -> EvalStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajs = collect_trajectories(policy, params, n, &mut rng);
    let returns: Vec<f64> = trajs.iter().map(Trajectory::total_reward).collect();
    EvalStats {
        rollouts: n,
        mean: if n == 0 { 0.0 } else { returns.iter().sum::<f64>() / n as f64 },
        max: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: returns.iter().copied().fold(f64::INFINITY, f64::min),
        balanced: trajs.iter().filter(|t| t.balanced()).count(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatCell {
    pub theta: f64,
    pub theta_dot: f64,
    pub action: f64,
}

/// Clipped actions on a grid: `n_theta` angles evenly over `[-π, π)` and
/// `n_dot` velocities evenly over `[-8, 8]` inclusive. Rows are θ-major.
pub fn heatmap(policy: &dyn Policy, n_theta: usize, n_dot: usize) -> Vec<HeatCell> {
    let mut out = Vec::with_capacity(n_theta * n_dot);
    for i in 0..n_theta {
        let theta = -PI + 2.0 * PI * i as f64 / n_theta as f64;
        for j in 0..n_dot {
            let theta_dot = if n_dot == 1 {
                0.0
            } else {
                -8.0 + 16.0 * j as f64 / (n_dot - 1) as f64
            };
            let obs = observe(&PendulumState { theta, theta_dot });
            out.push(HeatCell {
                theta,
                theta_dot,
                action: clip_action(policy.act(&obs)),
            });
        }
    }
    out
}

pub fn write_heatmap_csv<W: Write>(cells: &[HeatCell], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["theta", "theta_dot", "action"])?;
    for c in cells {
        w.write_record([c.theta.to_string(), c.theta_dot.to_string(), c.action.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// The handcrafted swing-up and balance controller.
pub const EXPERT_TEXT: &str = include_str!("../fixtures/expert.sexp");

pub fn expert_program() -> Term {
    parse_program(EXPERT_TEXT, &Dsl::pendulum(), 3).expect("bundled expert parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{infer, Type};

    #[test]
    fn observation_and_wrap() {
        assert_eq!(observe(&PendulumState::new(0.0, 0.0)), [1.0, 0.0, 0.0]);
        let down = observe(&PendulumState::new(PI, 0.0));
        assert_eq!(down[0], -1.0);
        assert!(down[1].abs() < 1e-15);
        assert_eq!(wrap(PI), -PI);
        assert_eq!(wrap(-PI), -PI);
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn reward_anchors() {
        assert_eq!(reward(0.0, 0.0, 0.0), 0.0);
        assert_eq!(reward(PI, 0.0, 0.0), -PI * PI);
        let r = reward(PI / 2.0, 1.0, 2.0);
        assert!((r + (PI * PI / 4.0 + 0.1 + 0.004)).abs() < 1e-12);
        assert!((r + 2.5714).abs() < 1e-4);
    }

    #[test]
    fn upright_is_a_fixed_point() {
        let p = PendulumParams::default();
        let (s, r) = p.step(&PendulumState::new(0.0, 0.0), 0.0);
        assert_eq!(s, PendulumState::new(0.0, 0.0));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn gravity_pulls_toward_hanging() {
        let p = PendulumParams::default();
        let mut s = PendulumState::new(PI - 0.01, 0.0);
        for _ in 0..10 {
            s = p.step(&s, 0.0).0;
        }
        assert!(s.theta > PI - 0.01);
    }

    #[test]
    fn expert_program_fixture() {
        let dsl = Dsl::pendulum();
        let t = expert_program();
        assert_eq!(infer(&t, &dsl, &vec![Type::float(); 3]).unwrap(), Type::float());
        let pol = ProgramPolicy { program: &t, dsl: &dsl };
        assert_eq!(pol.act(&[1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn zero_policy_never_balances() {
        let stats = evaluate_policy(&FnPolicy(|_: &[f64]| 0.0), 100, 3, &PendulumParams::default());
        assert_eq!(stats.balanced, 0);
        assert_eq!(stats.rollouts, 100);
        assert!(stats.max <= 0.0);
    }

    #[test]
    fn heatmap_shape() {
        let cells = heatmap(&FnPolicy(|_: &[f64]| 0.0), 3, 3);
        assert_eq!(cells.len(), 9);
        assert!(cells.iter().all(|c| c.action == 0.0));
        assert_eq!(cells[0].theta, -PI);
        assert_eq!(cells[2].theta_dot, 8.0);
    }
}
