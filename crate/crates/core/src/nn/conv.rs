//! Residual convolutional encoder for pixel observations.
//!
//! Activations are stored height x width x channels. Each block is a 3x3
//! convolution, a 3x3 stride-2 max-pool and two residual subblocks
//! `x + conv(relu(conv(relu(x))))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{relu_backward_inplace, relu_inplace, uniform_fill, Linear};
use super::tensor::matmul;
use super::{Scalar, Tensor};

/// 3x3 same-padding convolution; weights `[9 * c_in, c_out]` with rows
/// ordered `(ky, kx, c_in)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Conv3x3<F> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ResidualUnit<F> {
    pub conv1: Conv3x3<F>,
    pub conv2: Conv3x3<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ConvBlock<F> {
    pub conv: Conv3x3<F>,
    pub res: [ResidualUnit<F>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct PixelEncoder<F> {
    pub size: usize,
    pub blocks: Vec<ConvBlock<F>>,
    pub fc: Linear<F>,
}

#[derive(Clone, Copy, Debug)]
struct Dims {
    h: usize,
    w: usize,
    c: usize,
}

impl<F: Scalar> Conv3x3<F> {
    fn init<R: Rng>(c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let mut w = Tensor::zeros(&[9 * c_in, c_out]);
        uniform_fill(&mut w, 9 * c_in, rng);
        Self {
            w,
            b: Tensor::zeros(&[c_out]),
        }
    }

    fn c_out(&self) -> usize {
        self.w.shape()[1]
    }

    fn im2col(x: &[F], d: Dims) -> Vec<F> {
        let k = 9 * d.c;
        let mut col = vec![F::zero(); d.h * d.w * k];
        for y in 0..d.h {
            for xx in 0..d.w {
                let row = &mut col[(y * d.w + xx) * k..(y * d.w + xx + 1) * k];
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= d.h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= d.w as isize {
                            continue;
                        }
                        let src = (sy as usize * d.w + sx as usize) * d.c;
                        let dst = (ky * 3 + kx) * d.c;
                        row[dst..dst + d.c].copy_from_slice(&x[src..src + d.c]);
                    }
                }
            }
        }
        col
    }

    fn col2im(dcol: &[F], d: Dims) -> Vec<F> {
        let k = 9 * d.c;
        let mut dx = vec![F::zero(); d.h * d.w * d.c];
        for y in 0..d.h {
            for xx in 0..d.w {
                let row = &dcol[(y * d.w + xx) * k..(y * d.w + xx + 1) * k];
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= d.h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = xx as isize + kx as isize - 1;
                        if sx < 0 || sx >= d.w as isize {
                            continue;
                        }
                        let dst = (sy as usize * d.w + sx as usize) * d.c;
                        let src = (ky * 3 + kx) * d.c;
                        for ci in 0..d.c {
                            dx[dst + ci] += row[src + ci];
                        }
                    }
                }
            }
        }
        dx
    }

    /// Returns (output, im2col buffer).
    fn forward(&self, x: &[F], d: Dims) -> (Vec<F>, Vec<F>) {
        let col = Self::im2col(x, d);
        let n = self.c_out();
        let pixels = d.h * d.w;
        let mut y = Vec::with_capacity(pixels * n);
        for _ in 0..pixels {
            y.extend_from_slice(self.b.data());
        }
        matmul(&mut y, &col, self.w.data(), pixels, 9 * d.c, n, false, false, true);
        (y, col)
    }

    fn backward(&self, col: &[F], dy: &[F], d: Dims, grad: Option<&mut Conv3x3<F>>) -> Vec<F> {
        let n = self.c_out();
        let pixels = d.h * d.w;
        let k = 9 * d.c;
        if let Some(g) = grad {
            matmul(g.w.data_mut(), col, dy, k, pixels, n, true, false, true);
            let gb = g.b.data_mut();
            for p in 0..pixels {
                for (b, &v) in gb.iter_mut().zip(&dy[p * n..(p + 1) * n]) {
                    *b += v;
                }
            }
        }
        let mut dcol = vec![F::zero(); pixels * k];
        matmul(&mut dcol, dy, self.w.data(), pixels, n, k, false, true, false);
        Self::col2im(&dcol, d)
    }
}

fn pooled(n: usize) -> usize {
    (n - 1) / 2 + 1
}

/// 3x3 stride-2 max-pool with one cell of padding. Returns output and the
/// input index chosen for every output cell.
fn max_pool<F: Scalar>(x: &[F], d: Dims) -> (Vec<F>, Vec<usize>, Dims) {
    let od = Dims {
        h: pooled(d.h),
        w: pooled(d.w),
        c: d.c,
    };
    let mut out = vec![F::zero(); od.h * od.w * d.c];
    let mut arg = vec![0usize; od.h * od.w * d.c];
    for oy in 0..od.h {
        for ox in 0..od.w {
            for ci in 0..d.c {
                let mut best = F::neg_infinity();
                let mut best_i = 0;
                for ky in 0..3 {
                    let sy = (2 * oy + ky) as isize - 1;
                    if sy < 0 || sy >= d.h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = (2 * ox + kx) as isize - 1;
                        if sx < 0 || sx >= d.w as isize {
                            continue;
                        }
                        let i = (sy as usize * d.w + sx as usize) * d.c + ci;
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                let o = (oy * od.w + ox) * d.c + ci;
                out[o] = best;
                arg[o] = best_i;
            }
        }
    }
    (out, arg, od)
}

#[derive(Clone, Debug)]
struct ResCache<F> {
    x: Vec<F>,
    col1: Vec<F>,
    a1: Vec<F>,
    col2: Vec<F>,
}

#[derive(Clone, Debug)]
struct BlockCache<F> {
    in_dims: Dims,
    out_dims: Dims,
    col: Vec<F>,
    arg: Vec<usize>,
    res: [ResCache<F>; 2],
}

#[derive(Clone, Debug)]
pub(crate) struct PixelCache<F> {
    frames: Vec<Vec<BlockCache<F>>>,
    /// Rectified flattened features entering `fc`, `steps x flat`.
    flat: Vec<F>,
    /// Embedding output after the final rectifier.
    out: Vec<F>,
}

impl<F: Scalar> ResidualUnit<F> {
    fn forward(&self, x: &[F], d: Dims) -> (Vec<F>, ResCache<F>) {
        let mut r0 = x.to_vec();
        relu_inplace(&mut r0);
        let (a1, col1) = self.conv1.forward(&r0, d);
        let mut r1 = a1.clone();
        relu_inplace(&mut r1);
        let (a2, col2) = self.conv2.forward(&r1, d);
        let y = x.iter().zip(&a2).map(|(&u, &v)| u + v).collect();
        (
            y,
            ResCache {
                x: x.to_vec(),
                col1,
                a1,
                col2,
            },
        )
    }

    fn backward(&self, cache: &ResCache<F>, dy: &[F], d: Dims, grad: Option<&mut ResidualUnit<F>>) -> Vec<F> {
        let (g1, g2) = match grad {
            Some(g) => (Some(&mut g.conv1), Some(&mut g.conv2)),
            None => (None, None),
        };
        let mut dr1 = self.conv2.backward(&cache.col2, dy, d, g2);
        relu_backward_inplace(&mut dr1, &cache.a1);
        let mut dr0 = self.conv1.backward(&cache.col1, &dr1, d, g1);
        relu_backward_inplace(&mut dr0, &cache.x);
        dr0.iter().zip(dy).map(|(&a, &b)| a + b).collect()
    }
}

impl<F: Scalar> PixelEncoder<F> {
    pub fn init<R: Rng>(size: usize, channels: &[usize], width: usize, rng: &mut R) -> Self {
        let mut c_in = 3;
        let mut side = size;
        let mut blocks = Vec::with_capacity(channels.len());
        for &c in channels {
            blocks.push(ConvBlock {
                conv: Conv3x3::init(c_in, c, rng),
                res: [
                    ResidualUnit {
                        conv1: Conv3x3::init(c, c, rng),
                        conv2: Conv3x3::init(c, c, rng),
                    },
                    ResidualUnit {
                        conv1: Conv3x3::init(c, c, rng),
                        conv2: Conv3x3::init(c, c, rng),
                    },
                ],
            });
            c_in = c;
            side = pooled(side);
        }
        let flat = side * side * c_in;
        Self {
            size,
            blocks,
            fc: Linear::init(flat, width, rng),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("embed.block{i}.conv.w"), &b.conv.w));
            out.push((format!("embed.block{i}.conv.b"), &b.conv.b));
            for (j, r) in b.res.iter().enumerate() {
                out.push((format!("embed.block{i}.res{j}.conv1.w"), &r.conv1.w));
                out.push((format!("embed.block{i}.res{j}.conv1.b"), &r.conv1.b));
                out.push((format!("embed.block{i}.res{j}.conv2.w"), &r.conv2.w));
                out.push((format!("embed.block{i}.res{j}.conv2.b"), &r.conv2.b));
            }
        }
        out.push(("embed.fc.w".into(), &self.fc.w));
        out.push(("embed.fc.b".into(), &self.fc.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out = Vec::new();
        for b in self.blocks.iter_mut() {
            out.push(&mut b.conv.w);
            out.push(&mut b.conv.b);
            for r in b.res.iter_mut() {
                out.push(&mut r.conv1.w);
                out.push(&mut r.conv1.b);
                out.push(&mut r.conv2.w);
                out.push(&mut r.conv2.b);
            }
        }
        out.push(&mut self.fc.w);
        out.push(&mut self.fc.b);
        out
    }

    /// Converts one channel-major frame to height x width x channels.
    fn to_hwc(&self, frame: &[F]) -> Vec<F> {
        let s = self.size;
        let mut out = vec![F::zero(); 3 * s * s];
        for c in 0..3 {
            for p in 0..s * s {
                out[p * 3 + c] = frame[c * s * s + p];
            }
        }
        out
    }

    pub(crate) fn forward(&self, x: &[F], steps: usize) -> (Vec<F>, PixelCache<F>) {
        let s = self.size;
        let frame_len = 3 * s * s;
        let flat_len = self.fc.fan_in();
        let mut flat = Vec::with_capacity(steps * flat_len);
        let mut frames = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut act = self.to_hwc(&x[t * frame_len..(t + 1) * frame_len]);
            let mut d = Dims { h: s, w: s, c: 3 };
            let mut caches = Vec::with_capacity(self.blocks.len());
            for b in &self.blocks {
                let (conv_out, col) = b.conv.forward(&act, d);
                let cd = Dims { c: b.conv.c_out(), ..d };
                let (p, arg, pd) = max_pool(&conv_out, cd);
                let (r1, rc1) = b.res[0].forward(&p, pd);
                let (r2, rc2) = b.res[1].forward(&r1, pd);
                caches.push(BlockCache {
                    in_dims: d,
                    out_dims: cd,
                    col,
                    arg,
                    res: [rc1, rc2],
                });
                act = r2;
                d = pd;
            }
            relu_inplace(&mut act);
            flat.extend_from_slice(&act);
            frames.push(caches);
        }
        let mut out = self.fc.forward(&flat, steps);
        relu_inplace(&mut out);
        (
            out.clone(),
            PixelCache { frames, flat, out },
        )
    }

    pub(crate) fn backward(&self, cache: &PixelCache<F>, dout: &[F], steps: usize, mut grad: Option<&mut PixelEncoder<F>>) {
        let mut dy = dout.to_vec();
        relu_backward_inplace(&mut dy, &cache.out);
        let mut dflat = self
            .fc
            .backward(&cache.flat, &dy, steps, grad.as_deref_mut().map(|g| &mut g.fc), true)
            .unwrap();
        relu_backward_inplace(&mut dflat, &cache.flat);
        let flat_len = self.fc.fan_in();
        for t in 0..steps {
            let mut d_act = dflat[t * flat_len..(t + 1) * flat_len].to_vec();
            for (bi, b) in self.blocks.iter().enumerate().rev() {
                let bc = &cache.frames[t][bi];
                let pd = Dims {
                    h: pooled(bc.out_dims.h),
                    w: pooled(bc.out_dims.w),
                    c: bc.out_dims.c,
                };
                let mut gblock = grad.as_deref_mut().map(|g| &mut g.blocks[bi]);
                let d_r1 = b.res[1].backward(&bc.res[1], &d_act, pd, gblock.as_deref_mut().map(|g| &mut g.res[1]));
                let d_p = b.res[0].backward(&bc.res[0], &d_r1, pd, gblock.as_deref_mut().map(|g| &mut g.res[0]));
                let mut d_conv = vec![F::zero(); bc.out_dims.h * bc.out_dims.w * bc.out_dims.c];
                for (o, &i) in bc.arg.iter().enumerate() {
                    d_conv[i] += d_p[o];
                }
                d_act = b.conv.backward(&bc.col, &d_conv, bc.in_dims, gblock.map(|g| &mut g.conv));
            }
        }
    }
}
