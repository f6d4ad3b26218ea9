use serde::{Deserialize, Serialize};

use super::trajectory::Trajectory;
use super::TrainConfig;
use crate::env::NUM_ACTIONS;
use crate::error::{numeric_err, usage_err, Error, Result};
use crate::nn::{AdamState, AgentParams, Scalar};
use crate::par;
use crate::rl::{chunked_vtrace_targets, log_softmax, rl_losses, vtrace_targets, LossBundle, VTraceResult};

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub frames: u64,
    /// Mean reward collected per trajectory.
    pub reward_rate: f64,
    pub pg_loss: f64,
    pub baseline_loss: f64,
    pub entropy: f64,
    pub policy_lag: f64,
    pub version: u64,
}

pub const METRICS_CSV_HEADER: &str = "step,frames,reward_rate,pg_loss,baseline_loss,entropy,policy_lag,version";

impl StepMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.frames,
            self.reward_rate,
            self.pg_loss,
            self.baseline_loss,
            self.entropy,
            self.policy_lag,
            self.version
        )
    }
}

/// Loss terms and gradient for one trajectory.
pub struct TrajectoryGrad<F> {
    pub losses: LossBundle,
    pub grads: AgentParams<F>,
    pub mean_rho: f64,
}

/// Unroll of a trajectory under the current parameters with its value
/// targets.
pub struct TrajectoryTargets<F> {
    pub record: crate::nn::UnrollRecord<F>,
    pub values: Vec<f64>,
    pub logits: Vec<f64>,
    pub vtrace: VTraceResult,
}

fn unroll_outputs<F: Scalar>(params: &AgentParams<F>, traj: &Trajectory<F>) -> Result<(crate::nn::UnrollRecord<F>, Vec<f64>, Vec<f64>)> {
    let t_len = traj.len();
    if t_len == 0 || traj.rewards.len() != t_len || traj.discount_mask.len() != t_len {
        return Err(usage_err("malformed trajectory"));
    }
    let record = params.unroll_with_resets(&traj.initial_hidden, &traj.observations, t_len + 1, &traj.reset_flags())?;
    let values: Vec<f64> = record.values.iter().map(|v| v.as_f64()).collect();
    let logits: Vec<f64> = record.logits[..t_len * NUM_ACTIONS].iter().map(|v| v.as_f64()).collect();
    Ok((record, values, logits))
}

/// Re-unrolls `traj` under `params` and computes V-trace targets, chunked
/// when the configured chunk is shorter than the unroll.
pub fn trajectory_targets<F: Scalar>(params: &AgentParams<F>, traj: &Trajectory<F>, cfg: &TrainConfig) -> Result<TrajectoryTargets<F>> {
    let (record, values, logits) = unroll_outputs(params, traj)?;
    let t_len = traj.len();
    let target_log_probs: Vec<f64> = (0..t_len)
        .map(|s| log_softmax(&logits[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS])[traj.actions[s]])
        .collect();
    let vtrace = match cfg.chunk_length {
        Some(n) if n < t_len => chunked_vtrace_targets(
            &values,
            &traj.rewards,
            &target_log_probs,
            &traj.behavior_log_probs,
            &traj.discount_mask,
            &cfg.vtrace,
            n,
            cfg.chunk_mode,
        )?,
        _ => vtrace_targets(
            &values,
            &traj.rewards,
            &target_log_probs,
            &traj.behavior_log_probs,
            &traj.discount_mask,
            &cfg.vtrace,
        )?,
    };
    Ok(TrajectoryTargets {
        record,
        values,
        logits,
        vtrace,
    })
}

/// Loss of `traj` under `params` with the value targets and advantages held
/// fixed at `vtrace`.
pub fn trajectory_loss<F: Scalar>(
    params: &AgentParams<F>,
    traj: &Trajectory<F>,
    cfg: &TrainConfig,
    vtrace: &VTraceResult,
) -> Result<LossBundle> {
    let (_, values, logits) = unroll_outputs(params, traj)?;
    rl_losses(&logits, &traj.actions, vtrace, &values[..traj.len()], &cfg.loss)
}

/// Loss terms and parameter gradient for one trajectory, backpropagated
/// through the whole unroll. Value targets are constants.
pub fn trajectory_gradient<F: Scalar>(
    params: &AgentParams<F>,
    traj: &Trajectory<F>,
    cfg: &TrainConfig,
) -> Result<TrajectoryGrad<F>> {
    let t_len = traj.len();
    let TrajectoryTargets {
        record, values, logits, vtrace: vt,
    } = trajectory_targets(params, traj, cfg)?;
    let losses = rl_losses(&logits, &traj.actions, &vt, &values[..t_len], &cfg.loss)?;
    let mut d_logits: Vec<F> = losses.d_logits.iter().map(|&v| F::of(v)).collect();
    d_logits.extend(std::iter::repeat_n(F::zero(), NUM_ACTIONS));
    let mut d_values: Vec<F> = losses.d_values.iter().map(|&v| F::of(v)).collect();
    d_values.push(F::zero());
    let grads = params.backward(&record, &d_logits, &d_values)?;
    if !grads.all_finite() {
        return Err(numeric_err("non-finite gradient"));
    }
    let mean_rho = vt.rho.iter().sum::<f64>() / t_len as f64;
    Ok(TrajectoryGrad {
        losses,
        grads,
        mean_rho,
    })
}

/// Batch update: per-trajectory gradients (data-parallel), summed in batch
/// order and divided by the batch size, then one Adam step.
pub fn learner_step<F: Scalar>(
    batch: &[Trajectory<F>],
    params: &mut AgentParams<F>,
    adam: &mut AdamState<F>,
    cfg: &TrainConfig,
    step: u64,
    frames_before: u64,
) -> Result<StepMetrics> {
    if batch.is_empty() {
        return Err(usage_err("learner step needs at least one trajectory"));
    }
    let current = &*params;
    let results = par::map(batch, |traj| trajectory_gradient(current, traj, cfg));
    let mut total: Option<AgentParams<F>> = None;
    let mut metrics = StepMetrics {
        step,
        frames: frames_before,
        reward_rate: 0.0,
        pg_loss: 0.0,
        baseline_loss: 0.0,
        entropy: 0.0,
        policy_lag: 0.0,
        version: 0,
    };
    let n = batch.len() as f64;
    for (i, (res, traj)) in results.into_iter().zip(batch).enumerate() {
        let tg = res.map_err(|e| match e {
            Error::Numeric(msg) => numeric_err(format!(
                "trajectory {i} from actor {} (version {}): {msg}",
                traj.actor_id, traj.param_version
            )),
            other => other,
        })?;
        match total.as_mut() {
            Some(t) => t.add_assign(&tg.grads),
            None => total = Some(tg.grads),
        }
        metrics.pg_loss += tg.losses.pg_loss / n;
        metrics.baseline_loss += tg.losses.baseline_loss / n;
        metrics.entropy += tg.losses.entropy / n;
        metrics.reward_rate += traj.total_reward() / n;
        metrics.policy_lag += params.version.saturating_sub(traj.param_version) as f64 / n;
        metrics.frames += traj.len() as u64;
    }
    let mut grads = total.expect("non-empty batch");
    grads.scale(F::of(1.0 / n));
    adam.update(params, &grads, &cfg.adam)?;
    metrics.version = params.version;
    Ok(metrics)
}
