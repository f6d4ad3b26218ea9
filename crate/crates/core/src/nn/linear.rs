use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{matmul, vec_mat_acc};
use super::{Scalar, Tensor};

/// Affine map `y = x W + b` with `W` stored `[in, out]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Linear<F> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Tensor::zeros(&[fan_in, fan_out]),
            b: Tensor::zeros(&[fan_out]),
        }
    }

    /// Weights uniform in `±sqrt(1/fan_in)`, zero bias.
    pub fn init<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(fan_in, fan_out);
        uniform_fill(&mut l.w, fan_in, rng);
        l
    }

    pub fn fan_in(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.w.shape()[1]
    }

    /// Forward for `rows` stacked inputs.
    pub fn forward(&self, x: &[F], rows: usize) -> Vec<F> {
        let (k, n) = (self.fan_in(), self.fan_out());
        let mut y = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            y.extend_from_slice(self.b.data());
        }
        if rows == 1 {
            vec_mat_acc(&mut y, &x[..k], self.w.data(), n);
        } else {
            matmul(&mut y, x, self.w.data(), rows, k, n, false, false, true);
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx` when
    /// requested.
    pub fn backward(
        &self,
        x: &[F],
        dy: &[F],
        rows: usize,
        grad: Option<&mut Linear<F>>,
        want_dx: bool,
    ) -> Option<Vec<F>> {
        let (k, n) = (self.fan_in(), self.fan_out());
        if let Some(g) = grad {
            matmul(g.w.data_mut(), x, dy, k, rows, n, true, false, true);
            let gb = g.b.data_mut();
            for r in 0..rows {
                for (b, &d) in gb.iter_mut().zip(&dy[r * n..(r + 1) * n]) {
                    *b += d;
                }
            }
        }
        want_dx.then(|| {
            let mut dx = vec![F::zero(); rows * k];
            matmul(&mut dx, dy, self.w.data(), rows, n, k, false, true, false);
            dx
        })
    }
}

pub(crate) fn uniform_fill<F: Scalar, R: Rng>(t: &mut Tensor<F>, fan_in: usize, rng: &mut R) {
    let bound = (1.0 / fan_in as f64).sqrt();
    for v in t.data_mut() {
        *v = F::of(rng.random_range(-bound..bound));
    }
}

pub(crate) fn relu_inplace<F: Scalar>(x: &mut [F]) {
    for v in x {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Zeroes `dy` where the rectified output was not positive.
pub(crate) fn relu_backward_inplace<F: Scalar>(dy: &mut [F], out: &[F]) {
    for (d, &o) in dy.iter_mut().zip(out) {
        if o <= F::zero() {
            *d = F::zero();
        }
    }
}
