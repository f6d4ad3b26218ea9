//! Interchangeable controllers sitting between the embedding and the heads.
//!
//! Gate layouts: LSTM columns are `[input, forget, cell, output]`; GRU
//! columns are `[update, reset, candidate]` with the candidate recurrence
//! applied to `reset * h`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{relu_backward_inplace, relu_inplace, uniform_fill, Linear};
use super::tensor::{matmul, sigmoid, vec_mat_acc, vec_mat_t_acc};
use super::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Feedforward,
    Lstm,
    VanillaRnn,
    Gru,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::Feedforward,
        ControllerKind::Lstm,
        ControllerKind::VanillaRnn,
        ControllerKind::Gru,
    ];

    pub fn is_recurrent(self) -> bool {
        self != ControllerKind::Feedforward
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub hidden_size: usize,
    /// Parameters stay at their initial values for the whole run.
    pub frozen: bool,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Lstm,
            hidden_size: 128,
            frozen: false,
        }
    }
}

impl ControllerSpec {
    pub fn new(kind: ControllerKind, hidden_size: usize) -> Self {
        Self {
            kind,
            hidden_size,
            frozen: false,
        }
    }
}

/// Recurrent carry. `c` is only used by the LSTM; both are empty for the
/// feedforward controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct HiddenState<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> HiddenState<F> {
    pub fn zeros(spec: &ControllerSpec) -> Self {
        let hs = spec.hidden_size;
        match spec.kind {
            ControllerKind::Feedforward => Self { h: vec![], c: vec![] },
            ControllerKind::Lstm => Self {
                h: vec![F::zero(); hs],
                c: vec![F::zero(); hs],
            },
            ControllerKind::VanillaRnn | ControllerKind::Gru => Self {
                h: vec![F::zero(); hs],
                c: vec![],
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty() && self.c.is_empty()
    }

    pub fn cast<G: Scalar>(&self) -> HiddenState<G> {
        HiddenState {
            h: self.h.iter().map(|v| G::of(v.as_f64())).collect(),
            c: self.c.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", tag = "kind", rename_all = "snake_case")]
pub enum ControllerParams<F> {
    Feedforward {
        layer: Linear<F>,
    },
    Lstm {
        wx: Tensor<F>,
        wh: Tensor<F>,
        b: Tensor<F>,
    },
    VanillaRnn {
        wx: Tensor<F>,
        wh: Tensor<F>,
        b: Tensor<F>,
    },
    Gru {
        wx: Tensor<F>,
        wh_zr: Tensor<F>,
        wh_n: Tensor<F>,
        b: Tensor<F>,
    },
}

/// Intermediates recorded by [`ControllerParams::forward`].
#[derive(Clone, Debug)]
pub(crate) struct ControllerCache<F> {
    steps: usize,
    hidden: usize,
    /// Post-activation gates, `steps x gates*hidden`.
    acts: Vec<F>,
    h_prev: Vec<F>,
    c_prev: Vec<F>,
    c: Vec<F>,
    tanh_c: Vec<F>,
    /// GRU only: `reset * h_prev`.
    rh: Vec<F>,
    resets: Vec<bool>,
}

impl<F: Scalar> ControllerParams<F> {
    pub fn init<R: Rng>(spec: &ControllerSpec, input: usize, rng: &mut R) -> Self {
        let hs = spec.hidden_size;
        let fan_in = input + hs;
        let mk = |rows: usize, cols: usize, rng: &mut R| {
            let mut t = Tensor::zeros(&[rows, cols]);
            uniform_fill(&mut t, fan_in, rng);
            t
        };
        match spec.kind {
            ControllerKind::Feedforward => ControllerParams::Feedforward {
                layer: Linear::init(input, hs, rng),
            },
            ControllerKind::Lstm => {
                let wx = mk(input, 4 * hs, rng);
                let wh = mk(hs, 4 * hs, rng);
                let mut b = Tensor::zeros(&[4 * hs]);
                b.data_mut()[hs..2 * hs].iter_mut().for_each(|v| *v = F::one());
                ControllerParams::Lstm { wx, wh, b }
            }
            ControllerKind::VanillaRnn => ControllerParams::VanillaRnn {
                wx: mk(input, hs, rng),
                wh: mk(hs, hs, rng),
                b: Tensor::zeros(&[hs]),
            },
            ControllerKind::Gru => ControllerParams::Gru {
                wx: mk(input, 3 * hs, rng),
                wh_zr: mk(hs, 2 * hs, rng),
                wh_n: mk(hs, hs, rng),
                b: Tensor::zeros(&[3 * hs]),
            },
        }
    }

    pub fn kind(&self) -> ControllerKind {
        match self {
            ControllerParams::Feedforward { .. } => ControllerKind::Feedforward,
            ControllerParams::Lstm { .. } => ControllerKind::Lstm,
            ControllerParams::VanillaRnn { .. } => ControllerKind::VanillaRnn,
            ControllerParams::Gru { .. } => ControllerKind::Gru,
        }
    }

    pub fn hidden_size(&self) -> usize {
        match self {
            ControllerParams::Feedforward { layer } => layer.fan_out(),
            ControllerParams::Lstm { wh, .. }
            | ControllerParams::VanillaRnn { wh, .. }
            | ControllerParams::Gru { wh_n: wh, .. } => wh.shape()[0],
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Tensor<F>)> {
        match self {
            ControllerParams::Feedforward { layer } => vec![("ctrl.w", &layer.w), ("ctrl.b", &layer.b)],
            ControllerParams::Lstm { wx, wh, b } | ControllerParams::VanillaRnn { wx, wh, b } => {
                vec![("ctrl.wx", wx), ("ctrl.wh", wh), ("ctrl.b", b)]
            }
            ControllerParams::Gru { wx, wh_zr, wh_n, b } => vec![
                ("ctrl.wx", wx),
                ("ctrl.wh_zr", wh_zr),
                ("ctrl.wh_n", wh_n),
                ("ctrl.b", b),
            ],
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        match self {
            ControllerParams::Feedforward { layer } => vec![&mut layer.w, &mut layer.b],
            ControllerParams::Lstm { wx, wh, b } | ControllerParams::VanillaRnn { wx, wh, b } => {
                vec![wx, wh, b]
            }
            ControllerParams::Gru { wx, wh_zr, wh_n, b } => vec![wx, wh_zr, wh_n, b],
        }
    }

    fn input_projection(wx: &Tensor<F>, b: &Tensor<F>, x: &[F], steps: usize) -> Vec<F> {
        let (k, n) = (wx.shape()[0], wx.shape()[1]);
        let mut g = Vec::with_capacity(steps * n);
        for _ in 0..steps {
            g.extend_from_slice(b.data());
        }
        if steps == 1 {
            vec_mat_acc(&mut g, &x[..k], wx.data(), n);
        } else {
            matmul(&mut g, x, wx.data(), steps, k, n, false, false, true);
        }
        g
    }

    /// Runs `steps` controller updates on stacked inputs `x`. `resets[t]`
    /// zeroes the carry before step `t`.
    pub(crate) fn forward(
        &self,
        x: &[F],
        steps: usize,
        init: &HiddenState<F>,
        resets: &[bool],
    ) -> (Vec<F>, ControllerCache<F>, HiddenState<F>) {
        let hs = self.hidden_size();
        let mut cache = ControllerCache {
            steps,
            hidden: hs,
            acts: vec![],
            h_prev: vec![],
            c_prev: vec![],
            c: vec![],
            tanh_c: vec![],
            rh: vec![],
            resets: resets.to_vec(),
        };
        let zeros = vec![F::zero(); hs];
        match self {
            ControllerParams::Feedforward { layer } => {
                let mut out = layer.forward(x, steps);
                relu_inplace(&mut out);
                cache.acts = out.clone();
                (out, cache, HiddenState { h: vec![], c: vec![] })
            }
            ControllerParams::Lstm { wx, wh, b } => {
                let gx = Self::input_projection(wx, b, x, steps);
                let g4 = 4 * hs;
                let mut out = Vec::with_capacity(steps * hs);
                cache.acts = Vec::with_capacity(steps * g4);
                let mut h = init.h.clone();
                let mut c = init.c.clone();
                let mut gates = vec![F::zero(); g4];
                for t in 0..steps {
                    if resets[t] {
                        h.copy_from_slice(&zeros);
                        c.copy_from_slice(&zeros);
                    }
                    gates.copy_from_slice(&gx[t * g4..(t + 1) * g4]);
                    vec_mat_acc(&mut gates, &h, wh.data(), g4);
                    cache.h_prev.extend_from_slice(&h);
                    cache.c_prev.extend_from_slice(&c);
                    for j in 0..hs {
                        let i_g = sigmoid(gates[j]);
                        let f_g = sigmoid(gates[hs + j]);
                        let c_g = gates[2 * hs + j].tanh();
                        let o_g = sigmoid(gates[3 * hs + j]);
                        gates[j] = i_g;
                        gates[hs + j] = f_g;
                        gates[2 * hs + j] = c_g;
                        gates[3 * hs + j] = o_g;
                        c[j] = f_g * c[j] + i_g * c_g;
                        let tc = c[j].tanh();
                        h[j] = o_g * tc;
                        cache.tanh_c.push(tc);
                    }
                    cache.acts.extend_from_slice(&gates);
                    cache.c.extend_from_slice(&c);
                    out.extend_from_slice(&h);
                }
                (out, cache, HiddenState { h, c })
            }
            ControllerParams::VanillaRnn { wx, wh, b } => {
                let gx = Self::input_projection(wx, b, x, steps);
                let mut out = Vec::with_capacity(steps * hs);
                let mut h = init.h.clone();
                let mut a = vec![F::zero(); hs];
                for t in 0..steps {
                    if resets[t] {
                        h.copy_from_slice(&zeros);
                    }
                    a.copy_from_slice(&gx[t * hs..(t + 1) * hs]);
                    vec_mat_acc(&mut a, &h, wh.data(), hs);
                    cache.h_prev.extend_from_slice(&h);
                    for j in 0..hs {
                        h[j] = a[j].tanh();
                    }
                    out.extend_from_slice(&h);
                }
                cache.acts = out.clone();
                (out, cache, HiddenState { h, c: vec![] })
            }
            ControllerParams::Gru { wx, wh_zr, wh_n, b } => {
                let g3 = 3 * hs;
                let gx = Self::input_projection(wx, b, x, steps);
                let mut out = Vec::with_capacity(steps * hs);
                let mut h = init.h.clone();
                let mut zr = vec![F::zero(); 2 * hs];
                let mut an = vec![F::zero(); hs];
                let mut rh = vec![F::zero(); hs];
                for t in 0..steps {
                    if resets[t] {
                        h.copy_from_slice(&zeros);
                    }
                    let row = &gx[t * g3..(t + 1) * g3];
                    zr.copy_from_slice(&row[..2 * hs]);
                    vec_mat_acc(&mut zr, &h, wh_zr.data(), 2 * hs);
                    for v in zr.iter_mut() {
                        *v = sigmoid(*v);
                    }
                    for j in 0..hs {
                        rh[j] = zr[hs + j] * h[j];
                    }
                    an.copy_from_slice(&row[2 * hs..]);
                    vec_mat_acc(&mut an, &rh, wh_n.data(), hs);
                    cache.h_prev.extend_from_slice(&h);
                    cache.rh.extend_from_slice(&rh);
                    cache.acts.extend_from_slice(&zr);
                    for j in 0..hs {
                        let n = an[j].tanh();
                        cache.acts.push(n);
                        let z = zr[j];
                        h[j] = (F::one() - z) * n + z * h[j];
                    }
                    out.extend_from_slice(&h);
                }
                (out, cache, HiddenState { h, c: vec![] })
            }
        }
    }

    /// Backpropagates `dout` (`steps x hidden`) through the recorded steps.
    /// The gradient reaching the initial carry is dropped. Returns `dL/dx`.
    pub(crate) fn backward(
        &self,
        x: &[F],
        cache: &ControllerCache<F>,
        dout: &[F],
        grad: Option<&mut ControllerParams<F>>,
    ) -> Vec<F> {
        let steps = cache.steps;
        let hs = cache.hidden;
        match self {
            ControllerParams::Feedforward { layer } => {
                let mut dy = dout.to_vec();
                relu_backward_inplace(&mut dy, &cache.acts);
                let g = match grad {
                    Some(ControllerParams::Feedforward { layer }) => Some(layer),
                    _ => None,
                };
                layer.backward(x, &dy, steps, g, true).unwrap()
            }
            ControllerParams::Lstm { wx, wh, .. } => {
                let g4 = 4 * hs;
                let mut da = vec![F::zero(); steps * g4];
                let mut dh_next = vec![F::zero(); hs];
                let mut dc_next = vec![F::zero(); hs];
                let mut dh_prev = vec![F::zero(); hs];
                for t in (0..steps).rev() {
                    let acts = &cache.acts[t * g4..(t + 1) * g4];
                    let c_prev = &cache.c_prev[t * hs..(t + 1) * hs];
                    let tanh_c = &cache.tanh_c[t * hs..(t + 1) * hs];
                    let dat = &mut da[t * g4..(t + 1) * g4];
                    for j in 0..hs {
                        let (i_g, f_g, c_g, o_g) =
                            (acts[j], acts[hs + j], acts[2 * hs + j], acts[3 * hs + j]);
                        let dh = dout[t * hs + j] + dh_next[j];
                        let tc = tanh_c[j];
                        let d_o = dh * tc;
                        let dc = dc_next[j] + dh * o_g * (F::one() - tc * tc);
                        let d_i = dc * c_g;
                        let d_g = dc * i_g;
                        let d_f = dc * c_prev[j];
                        dc_next[j] = dc * f_g;
                        dat[j] = d_i * i_g * (F::one() - i_g);
                        dat[hs + j] = d_f * f_g * (F::one() - f_g);
                        dat[2 * hs + j] = d_g * (F::one() - c_g * c_g);
                        dat[3 * hs + j] = d_o * o_g * (F::one() - o_g);
                    }
                    if cache.resets[t] {
                        dh_next.iter_mut().for_each(|v| *v = F::zero());
                        dc_next.iter_mut().for_each(|v| *v = F::zero());
                    } else {
                        dh_prev.iter_mut().for_each(|v| *v = F::zero());
                        vec_mat_t_acc(&mut dh_prev, dat, wh.data(), g4);
                        dh_next.copy_from_slice(&dh_prev);
                    }
                }
                if let Some(ControllerParams::Lstm { wx: gwx, wh: gwh, b: gb }) = grad {
                    accumulate_gate_grads(x, &cache.h_prev, &da, steps, gwx, gwh, gb);
                }
                input_grad(&da, wx, steps)
            }
            ControllerParams::VanillaRnn { wx, wh, .. } => {
                let mut da = vec![F::zero(); steps * hs];
                let mut dh_next = vec![F::zero(); hs];
                for t in (0..steps).rev() {
                    let h = &cache.acts[t * hs..(t + 1) * hs];
                    let dat = &mut da[t * hs..(t + 1) * hs];
                    for j in 0..hs {
                        let dh = dout[t * hs + j] + dh_next[j];
                        dat[j] = dh * (F::one() - h[j] * h[j]);
                    }
                    dh_next.iter_mut().for_each(|v| *v = F::zero());
                    if !cache.resets[t] {
                        vec_mat_t_acc(&mut dh_next, dat, wh.data(), hs);
                    }
                }
                if let Some(ControllerParams::VanillaRnn { wx: gwx, wh: gwh, b: gb }) = grad {
                    accumulate_gate_grads(x, &cache.h_prev, &da, steps, gwx, gwh, gb);
                }
                input_grad(&da, wx, steps)
            }
            ControllerParams::Gru { wx, wh_zr, wh_n, .. } => {
                let g3 = 3 * hs;
                let mut da = vec![F::zero(); steps * g3];
                let mut da_zr = vec![F::zero(); steps * 2 * hs];
                let mut da_n = vec![F::zero(); steps * hs];
                let mut dh_next = vec![F::zero(); hs];
                let mut d_rh = vec![F::zero(); hs];
                let mut dhp = vec![F::zero(); hs];
                for t in (0..steps).rev() {
                    let acts = &cache.acts[t * g3..(t + 1) * g3];
                    let hp = &cache.h_prev[t * hs..(t + 1) * hs];
                    let dan = &mut da_n[t * hs..(t + 1) * hs];
                    for j in 0..hs {
                        let (z, n) = (acts[j], acts[2 * hs + j]);
                        let dh = dout[t * hs + j] + dh_next[j];
                        dhp[j] = dh * z;
                        dan[j] = dh * (F::one() - z) * (F::one() - n * n);
                        // Stash dz until the reset gate gradient is known.
                        da_zr[t * 2 * hs + j] = dh * (hp[j] - n) * z * (F::one() - z);
                    }
                    d_rh.iter_mut().for_each(|v| *v = F::zero());
                    vec_mat_t_acc(&mut d_rh, dan, wh_n.data(), hs);
                    for j in 0..hs {
                        let r = acts[hs + j];
                        dhp[j] += d_rh[j] * r;
                        da_zr[t * 2 * hs + hs + j] = d_rh[j] * hp[j] * r * (F::one() - r);
                    }
                    let dzr = &da_zr[t * 2 * hs..(t + 1) * 2 * hs];
                    vec_mat_t_acc(&mut dhp, dzr, wh_zr.data(), 2 * hs);
                    let dat = &mut da[t * g3..(t + 1) * g3];
                    dat[..2 * hs].copy_from_slice(dzr);
                    dat[2 * hs..].copy_from_slice(dan);
                    if cache.resets[t] {
                        dh_next.iter_mut().for_each(|v| *v = F::zero());
                    } else {
                        dh_next.copy_from_slice(&dhp);
                    }
                }
                if let Some(ControllerParams::Gru {
                    wx: gwx,
                    wh_zr: gzr,
                    wh_n: gn,
                    b: gb,
                }) = grad
                {
                    let k = gwx.shape()[0];
                    matmul(gwx.data_mut(), x, &da, k, steps, g3, true, false, true);
                    matmul(gzr.data_mut(), &cache.h_prev, &da_zr, hs, steps, 2 * hs, true, false, true);
                    matmul(gn.data_mut(), &cache.rh, &da_n, hs, steps, hs, true, false, true);
                    bias_grad(gb, &da, steps);
                }
                input_grad(&da, wx, steps)
            }
        }
    }

    /// State after step `t` as the analysis layer reports it: the LSTM cell
    /// state, otherwise the controller output.
    pub(crate) fn analysis_state(cache: &ControllerCache<F>, outputs: &[F], t: usize) -> Vec<F> {
        let hs = cache.hidden;
        if !cache.c.is_empty() {
            cache.c[t * hs..(t + 1) * hs].to_vec()
        } else {
            outputs[t * hs..(t + 1) * hs].to_vec()
        }
    }

    /// Carry after step `t`.
    pub(crate) fn state_at(cache: &ControllerCache<F>, outputs: &[F], kind: ControllerKind, t: usize) -> HiddenState<F> {
        let hs = cache.hidden;
        match kind {
            ControllerKind::Feedforward => HiddenState { h: vec![], c: vec![] },
            ControllerKind::Lstm => HiddenState {
                h: outputs[t * hs..(t + 1) * hs].to_vec(),
                c: cache.c[t * hs..(t + 1) * hs].to_vec(),
            },
            _ => HiddenState {
                h: outputs[t * hs..(t + 1) * hs].to_vec(),
                c: vec![],
            },
        }
    }
}

fn accumulate_gate_grads<F: Scalar>(
    x: &[F],
    h_prev: &[F],
    da: &[F],
    steps: usize,
    gwx: &mut Tensor<F>,
    gwh: &mut Tensor<F>,
    gb: &mut Tensor<F>,
) {
    let (k, g) = (gwx.shape()[0], gwx.shape()[1]);
    let hs = gwh.shape()[0];
    matmul(gwx.data_mut(), x, da, k, steps, g, true, false, true);
    matmul(gwh.data_mut(), h_prev, da, hs, steps, g, true, false, true);
    bias_grad(gb, da, steps);
}

fn bias_grad<F: Scalar>(gb: &mut Tensor<F>, da: &[F], steps: usize) {
    let g = gb.len();
    let gbd = gb.data_mut();
    for t in 0..steps {
        for (b, &d) in gbd.iter_mut().zip(&da[t * g..(t + 1) * g]) {
            *b += d;
        }
    }
}

fn input_grad<F: Scalar>(da: &[F], wx: &Tensor<F>, steps: usize) -> Vec<F> {
    let (k, g) = (wx.shape()[0], wx.shape()[1]);
    let mut dx = vec![F::zero(); steps * k];
    matmul(&mut dx, da, wx.data(), steps, g, k, false, true, false);
    dx
}
