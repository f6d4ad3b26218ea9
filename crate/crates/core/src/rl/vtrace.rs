use serde::{Deserialize, Serialize};

use crate::error::{numeric_err, usage_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VTraceConfig {
    pub discount: f64,
    /// Truncation level for the importance weights on the temporal
    /// differences (and the policy-gradient advantage).
    pub rho_bar: f64,
    /// Truncation level for the trace-cutting weights.
    pub c_bar: f64,
}

impl Default for VTraceConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            rho_bar: 1.0,
            c_bar: 1.0,
        }
    }
}

/// How a chunk length is applied to the targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkMode {
    /// Independent V-trace per chunk, bootstrapping at the chunk boundary.
    #[default]
    PerChunk,
    /// The printed chunked formula, which reduces to the full-horizon
    /// correction divided by the number of chunks.
    LiteralAverage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VTraceResult {
    pub v_targets: Vec<f64>,
    pub pg_advantages: Vec<f64>,
    pub rho: Vec<f64>,
    pub c: Vec<f64>,
}

fn check_inputs(
    values: &[f64],
    rewards: &[f64],
    target_log_probs: &[f64],
    behavior_log_probs: &[f64],
    discount_mask: &[f64],
    cfg: &VTraceConfig,
) -> Result<usize> {
    let t = rewards.len();
    if values.len() != t + 1
        || target_log_probs.len() != t
        || behavior_log_probs.len() != t
        || discount_mask.len() != t
    {
        return Err(usage_err(format!(
            "v-trace length mismatch: values {}, rewards {t}, target {}, behavior {}, mask {}",
            values.len(),
            target_log_probs.len(),
            behavior_log_probs.len(),
            discount_mask.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.discount) {
        return Err(usage_err(format!("discount {} outside [0, 1)", cfg.discount)));
    }
    let all = values
        .iter()
        .chain(rewards)
        .chain(target_log_probs)
        .chain(behavior_log_probs)
        .chain(discount_mask);
    if all.into_iter().any(|v| !v.is_finite()) {
        return Err(numeric_err("non-finite v-trace input"));
    }
    Ok(t)
}

/// V-trace targets by the backward recursion
/// `v_s - V(x_s) = rho_s delta_s + g_s c_s (v_{s+1} - V(x_{s+1}))` where
/// `g_s = discount * mask_s` and `values[T]` bootstraps the tail.
pub fn vtrace_targets(
    values: &[f64],
    rewards: &[f64],
    target_log_probs: &[f64],
    behavior_log_probs: &[f64],
    discount_mask: &[f64],
    cfg: &VTraceConfig,
) -> Result<VTraceResult> {
    let t_len = check_inputs(values, rewards, target_log_probs, behavior_log_probs, discount_mask, cfg)?;
    let mut rho = Vec::with_capacity(t_len);
    let mut c = Vec::with_capacity(t_len);
    for (tl, bl) in target_log_probs.iter().zip(behavior_log_probs) {
        let ratio = (tl - bl).exp();
        rho.push(ratio.min(cfg.rho_bar));
        c.push(ratio.min(cfg.c_bar));
    }
    let mut v_targets = vec![0.0; t_len];
    let mut acc = 0.0;
    for s in (0..t_len).rev() {
        let g = cfg.discount * discount_mask[s];
        let delta = rho[s] * (rewards[s] + g * values[s + 1] - values[s]);
        acc = delta + g * c[s] * acc;
        v_targets[s] = values[s] + acc;
    }
    let pg_advantages = (0..t_len)
        .map(|s| {
            let next = if s + 1 < t_len { v_targets[s + 1] } else { values[t_len] };
            rho[s] * (rewards[s] + cfg.discount * discount_mask[s] * next - values[s])
        })
        .collect();
    if v_targets.iter().any(|v| !v.is_finite()) {
        return Err(numeric_err("non-finite v-trace target"));
    }
    Ok(VTraceResult {
        v_targets,
        pg_advantages,
        rho,
        c,
    })
}

/// Value targets by direct evaluation of the defining double sum,
/// `v_s = V(x_s) + sum_t (prod_{i<t} g_i c_i) rho_t delta_t`. Quadratic in
/// `T`; a reference for the recursive form.
pub fn vtrace_double_sum(
    values: &[f64],
    rewards: &[f64],
    target_log_probs: &[f64],
    behavior_log_probs: &[f64],
    discount_mask: &[f64],
    cfg: &VTraceConfig,
) -> Result<Vec<f64>> {
    let t_len = check_inputs(values, rewards, target_log_probs, behavior_log_probs, discount_mask, cfg)?;
    let ratio: Vec<f64> = target_log_probs.iter().zip(behavior_log_probs).map(|(a, b)| (a - b).exp()).collect();
    Ok((0..t_len)
        .map(|s| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for t in s..t_len {
                let g = cfg.discount * discount_mask[t];
                let delta = rewards[t] + g * values[t + 1] - values[t];
                sum += weight * ratio[t].min(cfg.rho_bar) * delta;
                weight *= g * ratio[t].min(cfg.c_bar);
            }
            values[s] + sum
        })
        .collect())
}

/// V-trace with the horizon cut into `T / chunk_length` pieces.
#[allow(clippy::too_many_arguments)]
pub fn chunked_vtrace_targets(
    values: &[f64],
    rewards: &[f64],
    target_log_probs: &[f64],
    behavior_log_probs: &[f64],
    discount_mask: &[f64],
    cfg: &VTraceConfig,
    chunk_length: usize,
    mode: ChunkMode,
) -> Result<VTraceResult> {
    let t_len = check_inputs(values, rewards, target_log_probs, behavior_log_probs, discount_mask, cfg)?;
    if chunk_length == 0 || t_len % chunk_length != 0 {
        return Err(usage_err(format!(
            "trajectory length {t_len} is not divisible by chunk length {chunk_length}"
        )));
    }
    let chunks = t_len / chunk_length;
    match mode {
        ChunkMode::PerChunk => {
            let mut out = VTraceResult {
                v_targets: Vec::with_capacity(t_len),
                pg_advantages: Vec::with_capacity(t_len),
                rho: Vec::with_capacity(t_len),
                c: Vec::with_capacity(t_len),
            };
            for k in 0..chunks {
                let (a, b) = (k * chunk_length, (k + 1) * chunk_length);
                let part = vtrace_targets(
                    &values[a..=b],
                    &rewards[a..b],
                    &target_log_probs[a..b],
                    &behavior_log_probs[a..b],
                    &discount_mask[a..b],
                    cfg,
                )?;
                out.v_targets.extend(part.v_targets);
                out.pg_advantages.extend(part.pg_advantages);
                out.rho.extend(part.rho);
                out.c.extend(part.c);
            }
            Ok(out)
        }
        ChunkMode::LiteralAverage => {
            let mut full = vtrace_targets(values, rewards, target_log_probs, behavior_log_probs, discount_mask, cfg)?;
            let scale = 1.0 / chunks as f64;
            for (v, base) in full.v_targets.iter_mut().zip(values) {
                *v = base + scale * (*v - base);
            }
            for s in 0..t_len {
                let next = if s + 1 < t_len { full.v_targets[s + 1] } else { values[t_len] };
                full.pg_advantages[s] =
                    full.rho[s] * (rewards[s] + cfg.discount * discount_mask[s] * next - values[s]);
            }
            Ok(full)
        }
    }
}
