use serde::{Deserialize, Serialize};

use super::VTraceResult;
use crate::env::NUM_ACTIONS;
use crate::error::{usage_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossCoefs {
    pub baseline: f64,
    pub entropy: f64,
}

impl Default for LossCoefs {
    fn default() -> Self {
        Self {
            baseline: 0.5,
            entropy: 0.01,
        }
    }
}

/// Loss values with gradients of `total` with respect to the logits
/// (`T x NUM_ACTIONS`) and values (`T`).
#[derive(Clone, Debug, PartialEq)]
pub struct LossBundle {
    pub pg_loss: f64,
    pub baseline_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub d_logits: Vec<f64>,
    pub d_values: Vec<f64>,
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn entropy(logits: &[f64]) -> f64 {
    -log_softmax(logits).iter().map(|lp| lp.exp() * lp).sum::<f64>()
}

/// `pg = -sum A_s log pi(a_s)`, `baseline = sum (v_s - V_s)^2`,
/// `entropy = sum H_s`, `total = pg + b * baseline - e * entropy`.
/// Targets and advantages are constants for the gradient.
pub fn rl_losses(
    logits: &[f64],
    actions: &[usize],
    vtrace: &VTraceResult,
    values: &[f64],
    coefs: &LossCoefs,
) -> Result<LossBundle> {
    let t_len = actions.len();
    if logits.len() != t_len * NUM_ACTIONS
        || values.len() != t_len
        || vtrace.v_targets.len() != t_len
        || vtrace.pg_advantages.len() != t_len
    {
        return Err(usage_err(format!(
            "loss inputs disagree on length: {t_len} actions, {} logits, {} values, {} targets",
            logits.len(),
            values.len(),
            vtrace.v_targets.len()
        )));
    }
    let mut out = LossBundle {
        pg_loss: 0.0,
        baseline_loss: 0.0,
        entropy: 0.0,
        total: 0.0,
        d_logits: vec![0.0; logits.len()],
        d_values: vec![0.0; t_len],
    };
    for s in 0..t_len {
        let a = actions[s];
        if a >= NUM_ACTIONS {
            return Err(usage_err(format!("action {a} out of range")));
        }
        let lp = log_softmax(&logits[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS]);
        let adv = vtrace.pg_advantages[s];
        let h = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
        out.pg_loss -= adv * lp[a];
        out.entropy += h;
        let diff = vtrace.v_targets[s] - values[s];
        out.baseline_loss += diff * diff;
        out.d_values[s] = -2.0 * coefs.baseline * diff;
        let d = &mut out.d_logits[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS];
        for j in 0..NUM_ACTIONS {
            let p = lp[j].exp();
            let onehot = if j == a { 1.0 } else { 0.0 };
            d[j] = adv * (p - onehot) + coefs.entropy * p * (lp[j] + h);
        }
    }
    out.total = out.pg_loss + coefs.baseline * out.baseline_loss - coefs.entropy * out.entropy;
    Ok(out)
}
