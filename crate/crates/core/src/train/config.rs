use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::nn::AdamConfig;
use crate::rl::{ChunkMode, LossCoefs, VTraceConfig};

/// How actors and the learner are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// Actors and learner on one thread in a fixed schedule; actors always
    /// act with the learner's current parameters. Bitwise reproducible.
    #[default]
    Deterministic,
    /// One thread per actor feeding a bounded queue.
    Threaded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Trials per evaluation.
    pub trials: usize,
    /// Frame cap per evaluation in case the policy never starts trials.
    pub max_frames: u64,
    pub greedy: bool,
    /// Sample intervals to evaluate; the training set when absent.
    pub intervals: Option<Vec<u32>>,
    /// Fixed tolerance multiplier; the environment's curriculum when absent.
    pub gamma: Option<f64>,
    pub record_hidden: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            max_frames: 100_000,
            greedy: true,
            intervals: None,
            gamma: Some(1.5),
            record_hidden: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("eval.trials must be >= 1"));
        }
        if self.max_frames == 0 {
            return Err(config_err("eval.max_frames must be >= 1"));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g >= 0.0) {
                return Err(config_err("eval.gamma must be finite and >= 0"));
            }
        }
        if self.intervals.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0)) {
            return Err(config_err("eval.intervals must be non-empty and positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub num_actors: usize,
    pub unroll_length: usize,
    pub batch_size: usize,
    /// Defaults to twice the batch size.
    pub queue_capacity: Option<usize>,
    pub total_env_frames: u64,
    /// Horizon used for the value targets; the full unroll when absent.
    pub chunk_length: Option<usize>,
    pub chunk_mode: ChunkMode,
    /// Frames between evaluations; 0 disables periodic evaluation.
    pub eval_every: u64,
    pub eval: EvalConfig,
    pub seed: u64,
    pub mode: ExecutionMode,
    pub adam: AdamConfig,
    pub vtrace: VTraceConfig,
    pub loss: LossCoefs,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_actors: 4,
            unroll_length: 100,
            batch_size: 8,
            queue_capacity: None,
            total_env_frames: 2_000_000,
            chunk_length: None,
            chunk_mode: ChunkMode::PerChunk,
            eval_every: 100_000,
            eval: EvalConfig::default(),
            seed: 0,
            mode: ExecutionMode::Deterministic,
            adam: AdamConfig::default(),
            vtrace: VTraceConfig::default(),
            loss: LossCoefs::default(),
        }
    }
}

impl TrainConfig {
    pub fn queue_capacity(&self) -> usize {
        self.queue_capacity.unwrap_or(2 * self.batch_size)
    }

    pub fn frames_per_step(&self) -> u64 {
        (self.batch_size * self.unroll_length) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_actors == 0 {
            return Err(config_err("train.num_actors must be >= 1"));
        }
        if self.unroll_length == 0 {
            return Err(config_err("train.unroll_length must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("train.batch_size must be >= 1"));
        }
        if self.queue_capacity() == 0 {
            return Err(config_err("train.queue_capacity must be >= 1"));
        }
        if let Some(n) = self.chunk_length {
            if n == 0 || !self.unroll_length.is_multiple_of(n) {
                return Err(config_err(format!(
                    "train.unroll_length {} must be divisible by train.chunk_length {n}",
                    self.unroll_length
                )));
            }
        }
        let a = &self.adam;
        if !(a.learning_rate >= 0.0 && a.learning_rate.is_finite()) {
            return Err(config_err("train.adam.learning_rate must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.epsilon <= 0.0 {
            return Err(config_err("train.adam betas must be in [0, 1) and epsilon > 0"));
        }
        if !(0.0..1.0).contains(&self.vtrace.discount) {
            return Err(config_err("train.vtrace.discount must be in [0, 1)"));
        }
        if self.vtrace.rho_bar <= 0.0 || self.vtrace.c_bar <= 0.0 {
            return Err(config_err("train.vtrace truncation levels must be > 0"));
        }
        self.eval.validate()
    }
}
