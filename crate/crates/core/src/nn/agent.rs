//! The full agent: observation embedding, controller, policy and value heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::controller::{ControllerCache, ControllerKind, ControllerParams, ControllerSpec, HiddenState};
use super::conv::{PixelCache, PixelEncoder};
use super::linear::{relu_backward_inplace, relu_inplace, Linear};
use super::tensor::check_finite;
use super::{Scalar, Tensor};
use crate::env::{ObsMode, NUM_ACTIONS, SYMBOLIC_OBS_LEN};
use crate::error::{usage_err, Result};

/// Architecture of an agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub controller: ControllerSpec,
    pub obs_mode: ObsMode,
    /// Edge length of pixel observations.
    pub pixel_size: usize,
    pub embedding_width: usize,
    /// Feature maps of the three convolutional blocks (pixel mode).
    pub conv_channels: Vec<usize>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            controller: ControllerSpec::default(),
            obs_mode: ObsMode::Symbolic,
            pixel_size: 16,
            embedding_width: 256,
            conv_channels: vec![8, 16, 16],
        }
    }
}

impl NetworkSpec {
    pub fn new(controller: ControllerSpec, obs_mode: ObsMode) -> Self {
        Self {
            controller,
            obs_mode,
            ..Self::default()
        }
    }

    pub fn obs_len(&self) -> usize {
        match self.obs_mode {
            ObsMode::Symbolic => SYMBOLIC_OBS_LEN,
            ObsMode::Pixel => 3 * self.pixel_size * self.pixel_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.controller.hidden_size == 0 {
            return Err(crate::error::config_err("controller.hidden_size must be >= 1"));
        }
        if self.embedding_width == 0 {
            return Err(crate::error::config_err("embedding_width must be >= 1"));
        }
        if self.obs_mode == ObsMode::Pixel && (self.conv_channels.is_empty() || self.conv_channels.contains(&0)) {
            return Err(crate::error::config_err("conv_channels must be non-empty and positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", tag = "mode", rename_all = "snake_case")]
pub enum Embedding<F> {
    Symbolic { l1: Linear<F>, l2: Linear<F> },
    Pixel(PixelEncoder<F>),
}

/// Which part of the network a tensor belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGroup {
    Embedding,
    Controller,
    PolicyHead,
    ValueHead,
}

/// All trainable parameters. Gradients use the same type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct AgentParams<F> {
    pub spec: NetworkSpec,
    pub embedding: Embedding<F>,
    pub controller: ControllerParams<F>,
    pub policy: Linear<F>,
    pub value: Linear<F>,
    /// Incremented by every optimizer update.
    pub version: u64,
}

/// Builds parameters: weights uniform in `±sqrt(1/fan_in)`, zero biases,
/// LSTM forget-gate bias 1. Deterministic in `seed`.
pub fn init_params<F: Scalar>(spec: &NetworkSpec, seed: u64) -> AgentParams<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = spec.embedding_width;
    let embedding = match spec.obs_mode {
        ObsMode::Symbolic => Embedding::Symbolic {
            l1: Linear::init(SYMBOLIC_OBS_LEN, width, &mut rng),
            l2: Linear::init(width, width, &mut rng),
        },
        ObsMode::Pixel => Embedding::Pixel(PixelEncoder::init(
            spec.pixel_size,
            &spec.conv_channels,
            width,
            &mut rng,
        )),
    };
    let controller = ControllerParams::init(&spec.controller, width, &mut rng);
    let hs = spec.controller.hidden_size;
    AgentParams {
        spec: spec.clone(),
        embedding,
        controller,
        policy: Linear::init(hs, NUM_ACTIONS, &mut rng),
        value: Linear::init(hs, 1, &mut rng),
        version: 0,
    }
}

#[derive(Clone, Debug)]
enum EmbedCache<F> {
    Symbolic { a1: Vec<F> },
    Pixel(PixelCache<F>),
}

/// Forward intermediates for one unrolled sequence.
#[derive(Clone, Debug)]
pub struct UnrollRecord<F> {
    pub steps: usize,
    /// `steps x NUM_ACTIONS`.
    pub logits: Vec<F>,
    pub values: Vec<F>,
    pub final_hidden: HiddenState<F>,
    obs: Vec<F>,
    embed_cache: EmbedCache<F>,
    features: Vec<F>,
    ctrl_cache: ControllerCache<F>,
    ctrl_out: Vec<F>,
    kind: ControllerKind,
}

impl<F: Scalar> UnrollRecord<F> {
    pub fn logits_at(&self, t: usize) -> &[F] {
        &self.logits[t * NUM_ACTIONS..(t + 1) * NUM_ACTIONS]
    }

    /// Carry after step `t`.
    pub fn hidden_at(&self, t: usize) -> HiddenState<F> {
        ControllerParams::state_at(&self.ctrl_cache, &self.ctrl_out, self.kind, t)
    }

    /// Activations reported to the analysis layer after step `t`: LSTM cell
    /// state, otherwise the controller output.
    pub fn analysis_state_at(&self, t: usize) -> Vec<F> {
        ControllerParams::analysis_state(&self.ctrl_cache, &self.ctrl_out, t)
    }

    pub fn controller_output_at(&self, t: usize) -> &[F] {
        let hs = self.ctrl_out.len() / self.steps.max(1);
        &self.ctrl_out[t * hs..(t + 1) * hs]
    }
}

impl<F: Scalar> AgentParams<F> {
    pub fn hidden_size(&self) -> usize {
        self.spec.controller.hidden_size
    }

    pub fn initial_hidden(&self) -> HiddenState<F> {
        HiddenState::zeros(&self.spec.controller)
    }

    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.for_each_tensor_mut(|_, t| t.fill_zero());
        g.version = 0;
        g
    }

    /// Named tensors in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, ParamGroup, &Tensor<F>)> {
        let mut out: Vec<(String, ParamGroup, &Tensor<F>)> = Vec::new();
        match &self.embedding {
            Embedding::Symbolic { l1, l2 } => {
                out.push(("embed.l1.w".into(), ParamGroup::Embedding, &l1.w));
                out.push(("embed.l1.b".into(), ParamGroup::Embedding, &l1.b));
                out.push(("embed.l2.w".into(), ParamGroup::Embedding, &l2.w));
                out.push(("embed.l2.b".into(), ParamGroup::Embedding, &l2.b));
            }
            Embedding::Pixel(p) => {
                out.extend(p.tensors().into_iter().map(|(n, t)| (n, ParamGroup::Embedding, t)));
            }
        }
        for (n, t) in self.controller.tensors() {
            out.push((n.to_string(), ParamGroup::Controller, t));
        }
        out.push(("policy.w".into(), ParamGroup::PolicyHead, &self.policy.w));
        out.push(("policy.b".into(), ParamGroup::PolicyHead, &self.policy.b));
        out.push(("value.w".into(), ParamGroup::ValueHead, &self.value.w));
        out.push(("value.b".into(), ParamGroup::ValueHead, &self.value.b));
        out
    }

    /// Visits tensors mutably in the same order as [`Self::named_tensors`].
    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(ParamGroup, &mut Tensor<F>)) {
        match &mut self.embedding {
            Embedding::Symbolic { l1, l2 } => {
                for t in [&mut l1.w, &mut l1.b, &mut l2.w, &mut l2.b] {
                    f(ParamGroup::Embedding, t);
                }
            }
            Embedding::Pixel(p) => p.tensors_mut().into_iter().for_each(|t| f(ParamGroup::Embedding, t)),
        }
        for t in self.controller.tensors_mut() {
            f(ParamGroup::Controller, t);
        }
        f(ParamGroup::PolicyHead, &mut self.policy.w);
        f(ParamGroup::PolicyHead, &mut self.policy.b);
        f(ParamGroup::ValueHead, &mut self.value.w);
        f(ParamGroup::ValueHead, &mut self.value.b);
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out: Vec<&mut Tensor<F>> = Vec::new();
        match &mut self.embedding {
            Embedding::Symbolic { l1, l2 } => {
                out.extend([&mut l1.w, &mut l1.b, &mut l2.w, &mut l2.b]);
            }
            Embedding::Pixel(p) => out.extend(p.tensors_mut()),
        }
        out.extend(self.controller.tensors_mut());
        out.extend([&mut self.policy.w, &mut self.policy.b, &mut self.value.w, &mut self.value.b]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    /// Elementwise `self += other` over every tensor.
    pub fn add_assign(&mut self, other: &Self) {
        let src: Vec<&Tensor<F>> = other.named_tensors().into_iter().map(|(_, _, t)| t).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            dst.add_assign(s);
        }
    }

    pub fn scale(&mut self, s: F) {
        self.for_each_tensor_mut(|_, t| t.scale(s));
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, _, t)| t.all_finite())
    }

    /// Flattened copy of every parameter.
    pub fn flat(&self) -> Vec<F> {
        self.named_tensors()
            .iter()
            .flat_map(|(_, _, t)| t.data().iter().copied())
            .collect()
    }

    /// Overwrites every parameter from a flat slice in [`Self::flat`] order.
    pub fn set_flat(&mut self, values: &[F]) {
        let mut off = 0;
        self.for_each_tensor_mut(|_, t| {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[off..off + n]);
            off += n;
        });
        assert_eq!(off, values.len(), "flat parameter length mismatch");
    }

    pub fn cast<G: Scalar>(&self) -> AgentParams<G> {
        let mut out: AgentParams<G> = init_params(&self.spec, 0);
        let src: Vec<&Tensor<F>> = self.named_tensors().into_iter().map(|(_, _, t)| t).collect();
        for (dst, s) in out.tensors_mut().into_iter().zip(src) {
            *dst = s.cast();
        }
        out.version = self.version;
        out
    }

    /// Embedding and controller for one step; returns (controller output,
    /// carry').
    pub fn controller_step(&self, hidden: &HiddenState<F>, features: &[F]) -> Result<(Vec<F>, HiddenState<F>)> {
        let (out, _, next) = self.controller.forward(features, 1, hidden, &[false]);
        check_finite(&out, "controller output")?;
        Ok((out, next))
    }

    fn embed(&self, obs: &[F], steps: usize) -> (Vec<F>, EmbedCache<F>) {
        match &self.embedding {
            Embedding::Symbolic { l1, l2 } => {
                let mut a1 = l1.forward(obs, steps);
                relu_inplace(&mut a1);
                let mut a2 = l2.forward(&a1, steps);
                relu_inplace(&mut a2);
                (a2, EmbedCache::Symbolic { a1 })
            }
            Embedding::Pixel(p) => {
                let (out, cache) = p.forward(obs, steps);
                (out, EmbedCache::Pixel(cache))
            }
        }
    }

    /// Runs `steps` frames from `initial`. `resets[t]` zeroes the carry
    /// before frame `t` (episode boundary inside the sequence).
    pub fn unroll_with_resets(
        &self,
        initial: &HiddenState<F>,
        observations: &[F],
        steps: usize,
        resets: &[bool],
    ) -> Result<UnrollRecord<F>> {
        if steps == 0 {
            return Err(usage_err("unroll needs at least one observation"));
        }
        let obs_len = self.spec.obs_len();
        if observations.len() != steps * obs_len {
            return Err(usage_err(format!(
                "expected {} observation values, got {}",
                steps * obs_len,
                observations.len()
            )));
        }
        if resets.len() != steps {
            return Err(usage_err("resets must have one flag per step"));
        }
        let (features, embed_cache) = self.embed(observations, steps);
        let (ctrl_out, ctrl_cache, final_hidden) = self.controller.forward(&features, steps, initial, resets);
        let logits = self.policy.forward(&ctrl_out, steps);
        let values = self.value.forward(&ctrl_out, steps);
        check_finite(&logits, "policy logits")?;
        check_finite(&values, "values")?;
        check_finite(&ctrl_out, "controller output")?;
        Ok(UnrollRecord {
            steps,
            logits,
            values,
            final_hidden,
            obs: observations.to_vec(),
            embed_cache,
            features,
            ctrl_cache,
            ctrl_out,
            kind: self.controller.kind(),
        })
    }

    pub fn unroll(&self, initial: &HiddenState<F>, observations: &[F], steps: usize) -> Result<UnrollRecord<F>> {
        self.unroll_with_resets(initial, observations, steps, &vec![false; steps])
    }

    /// One acting step: (logits, value, carry').
    pub fn act(&self, hidden: &HiddenState<F>, obs: &[F]) -> Result<(Vec<F>, F, HiddenState<F>)> {
        let rec = self.unroll(hidden, obs, 1)?;
        Ok((rec.logits, rec.values[0], rec.final_hidden))
    }

    /// Exact reverse-mode gradients given `dL/dlogits` (`steps x 5`) and
    /// `dL/dvalues`. Frozen controllers receive zero gradient.
    pub fn backward(&self, record: &UnrollRecord<F>, d_logits: &[F], d_values: &[F]) -> Result<AgentParams<F>> {
        let steps = record.steps;
        if d_logits.len() != steps * NUM_ACTIONS || d_values.len() != steps {
            return Err(usage_err(format!(
                "gradient shapes ({}, {}) do not match a {steps}-step record",
                d_logits.len(),
                d_values.len()
            )));
        }
        let mut grads = self.zeros_like();
        let hs = self.hidden_size();
        let mut d_ctrl = self
            .policy
            .backward(&record.ctrl_out, d_logits, steps, Some(&mut grads.policy), true)
            .unwrap();
        let d_from_value = self
            .value
            .backward(&record.ctrl_out, d_values, steps, Some(&mut grads.value), true)
            .unwrap();
        debug_assert_eq!(d_ctrl.len(), steps * hs);
        for (a, b) in d_ctrl.iter_mut().zip(&d_from_value) {
            *a += *b;
        }
        let ctrl_grad = (!self.spec.controller.frozen).then_some(&mut grads.controller);
        let mut d_features = self
            .controller
            .backward(&record.features, &record.ctrl_cache, &d_ctrl, ctrl_grad);
        match (&self.embedding, &record.embed_cache, &mut grads.embedding) {
            (Embedding::Symbolic { l1, l2 }, EmbedCache::Symbolic { a1 }, Embedding::Symbolic { l1: g1, l2: g2 }) => {
                relu_backward_inplace(&mut d_features, &record.features);
                let mut d_a1 = l2.backward(a1, &d_features, steps, Some(g2), true).unwrap();
                relu_backward_inplace(&mut d_a1, a1);
                l1.backward(&record.obs, &d_a1, steps, Some(g1), false);
            }
            (Embedding::Pixel(p), EmbedCache::Pixel(cache), Embedding::Pixel(g)) => {
                p.backward(cache, &d_features, steps, Some(g));
            }
            _ => return Err(usage_err("record does not match the embedding type")),
        }
        Ok(grads)
    }
}
