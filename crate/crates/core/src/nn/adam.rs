use serde::{Deserialize, Serialize};

use super::agent::{AgentParams, ParamGroup};
use super::Scalar;
use crate::error::{usage_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-4,
        }
    }
}

/// Moment accumulators, one flat buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct AdamState<F> {
    pub first: Vec<Vec<F>>,
    pub second: Vec<Vec<F>>,
    pub step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &AgentParams<F>) -> Self {
        let zeros: Vec<Vec<F>> = params
            .named_tensors()
            .iter()
            .map(|(_, _, t)| vec![F::zero(); t.len()])
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    /// One bias-corrected Adam step. Frozen controller tensors are left
    /// untouched, moments included.
    pub fn update(&mut self, params: &mut AgentParams<F>, grads: &AgentParams<F>, cfg: &AdamConfig) -> Result<()> {
        let frozen = params.spec.controller.frozen;
        let gs: Vec<_> = grads.named_tensors().into_iter().map(|(_, _, t)| t).collect();
        if gs.len() != self.first.len() {
            return Err(usage_err("gradient does not match optimizer state"));
        }
        self.step += 1;
        let t = self.step as i32;
        let corr1 = 1.0 - cfg.beta1.powi(t);
        let corr2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2) = (F::of(cfg.beta1), F::of(cfg.beta2));
        let (c1, c2) = (F::of(corr1), F::of(corr2));
        let lr = F::of(cfg.learning_rate);
        let eps = F::of(cfg.epsilon);
        let mut idx = 0;
        let mut mismatch = false;
        let (first, second) = (&mut self.first, &mut self.second);
        params.for_each_tensor_mut(|group, p| {
            let i = idx;
            idx += 1;
            if frozen && group == ParamGroup::Controller {
                return;
            }
            let g = gs[i].data();
            if g.len() != p.len() || first[i].len() != p.len() {
                mismatch = true;
                return;
            }
            for (((w, &gj), m), v) in p.data_mut().iter_mut().zip(g).zip(first[i].iter_mut()).zip(second[i].iter_mut()) {
                *m = b1 * *m + (F::one() - b1) * gj;
                *v = b2 * *v + (F::one() - b2) * gj * gj;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
        if mismatch {
            return Err(usage_err("gradient tensor shape mismatch"));
        }
        params.version += 1;
        Ok(())
    }
}
