//! Runtime numerical self-checks: V-trace against its defining sum and the
//! RL loss gradient against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::NUM_ACTIONS;
use crate::error::Result;
use crate::nn::{init_params, GradCheck, NetworkSpec};
use crate::rl::{chunked_vtrace_targets, vtrace_double_sum, vtrace_targets, ChunkMode, VTraceConfig};
use crate::train::{trajectory_gradient, trajectory_loss, trajectory_targets, TrainConfig, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    /// Passing needs `max_error <= tolerance`.
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Random unroll with one episode boundary, for exercising the learner
/// outside the environment.
pub fn random_trajectory(spec: &NetworkSpec, steps: usize, rng: &mut impl Rng) -> Trajectory<f64> {
    let obs_len = spec.obs_len();
    let params = init_params::<f64>(spec, 0);
    let boundary = rng.random_range(0..steps);
    Trajectory {
        observations: (0..(steps + 1) * obs_len).map(|_| rng.random::<f64>()).collect(),
        actions: (0..steps).map(|_| rng.random_range(0..NUM_ACTIONS)).collect(),
        rewards: (0..steps).map(|_| if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 }).collect(),
        behavior_log_probs: (0..steps).map(|_| rng.random_range(0.05f64..0.9).ln()).collect(),
        initial_hidden: params.initial_hidden(),
        discount_mask: (0..steps).map(|t| if t == boundary { 0.0 } else { 1.0 }).collect(),
        actor_id: 0,
        param_version: 0,
        trials: Vec::new(),
    }
}

/// Full RL loss gradient of a freshly initialised agent against 64-bit
/// central differences, with value targets held fixed.
pub fn rl_gradient_check(spec: &NetworkSpec, steps: usize, seed: u64, tolerance: f64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_params::<f64>(spec, seed);
    // Nonzero heads so every loss term carries gradient.
    for t in [&mut params.policy.b, &mut params.value.b] {
        for v in t.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let traj = random_trajectory(spec, steps, &mut rng);
    let cfg = TrainConfig::default();
    let targets = trajectory_targets(&params, &traj, &cfg)?.vtrace;
    let analytic = trajectory_gradient(&params, &traj, &cfg)?.grads;
    let check = GradCheck {
        seed,
        ..GradCheck::default()
    };
    let report = check.run_agent(&params, |p| {
        let loss = trajectory_loss(p, &traj, &cfg, &targets).map(|l| l.total).unwrap_or(f64::NAN);
        (loss, analytic.clone())
    });
    Ok(CheckOutcome {
        name: format!("{:?} gradient", spec.controller.kind),
        cases: report.checked,
        max_error: report.max_relative_error,
        tolerance,
    })
}

struct Case {
    values: Vec<f64>,
    rewards: Vec<f64>,
    target: Vec<f64>,
    behavior: Vec<f64>,
    mask: Vec<f64>,
}

fn random_case(rng: &mut impl Rng, t_len: usize) -> Case {
    Case {
        values: (0..=t_len).map(|_| rng.random_range(-2.0..2.0)).collect(),
        rewards: (0..t_len).map(|_| rng.random_range(-1.0..1.0)).collect(),
        target: (0..t_len).map(|_| rng.random_range(-3.0..0.0)).collect(),
        behavior: (0..t_len).map(|_| rng.random_range(-3.0..0.0)).collect(),
        mask: (0..t_len).map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { 1.0 }).collect(),
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Recursive and chunked V-trace against direct evaluation.
pub fn vtrace_checks(cases: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut recursive, mut whole_chunk, mut zero_discount, mut halves) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..cases {
        let t_len = rng.random_range(1..=20);
        let c = random_case(&mut rng, t_len);
        let cfg = VTraceConfig {
            rho_bar: [1.0, 0.5, 2.0][i % 3],
            c_bar: [1.0, 1.0, 0.7][i % 3],
            ..VTraceConfig::default()
        };
        let fast = vtrace_targets(&c.values, &c.rewards, &c.target, &c.behavior, &c.mask, &cfg)?;
        let direct = vtrace_double_sum(&c.values, &c.rewards, &c.target, &c.behavior, &c.mask, &cfg)?;
        recursive = recursive.max(max_diff(&fast.v_targets, &direct));

        let one = chunked_vtrace_targets(&c.values, &c.rewards, &c.target, &c.behavior, &c.mask, &cfg, t_len, ChunkMode::PerChunk)?;
        whole_chunk = whole_chunk.max(max_diff(&one.v_targets, &fast.v_targets));

        let myopic = VTraceConfig { discount: 0.0, ..cfg };
        let full = vtrace_targets(&c.values, &c.rewards, &c.target, &c.behavior, &c.mask, &myopic)?;
        for n in (1..=t_len).filter(|n| t_len % n == 0) {
            let chunked = chunked_vtrace_targets(&c.values, &c.rewards, &c.target, &c.behavior, &c.mask, &myopic, n, ChunkMode::PerChunk)?;
            zero_discount = zero_discount.max(max_diff(&chunked.v_targets, &full.v_targets));
        }

        let c20 = random_case(&mut rng, 20);
        let chunked = chunked_vtrace_targets(&c20.values, &c20.rewards, &c20.target, &c20.behavior, &c20.mask, &cfg, 10, ChunkMode::PerChunk)?;
        let mut oracle = vtrace_double_sum(&c20.values[..=10], &c20.rewards[..10], &c20.target[..10], &c20.behavior[..10], &c20.mask[..10], &cfg)?;
        oracle.extend(vtrace_double_sum(&c20.values[10..], &c20.rewards[10..], &c20.target[10..], &c20.behavior[10..], &c20.mask[10..], &cfg)?);
        halves = halves.max(max_diff(&chunked.v_targets, &oracle));
    }
    let outcome = |name: &str, max_error: f64, tolerance: f64| CheckOutcome {
        name: name.to_string(),
        cases,
        max_error,
        tolerance,
    };
    Ok(vec![
        outcome("v-trace recursion vs double sum", recursive, 1e-10),
        outcome("v-trace single chunk is identity", whole_chunk, 0.0),
        outcome("v-trace zero discount ignores chunking", zero_discount, 0.0),
        outcome("v-trace halves vs per-half sum", halves, 1e-10),
    ])
}
