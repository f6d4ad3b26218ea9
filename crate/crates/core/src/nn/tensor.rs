use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{numeric_err, usage_err, Result};

/// Dense row-major array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(usage_err(format!(
                "tensor shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = F::zero());
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        axpy(&mut self.data, F::one(), &other.data);
    }

    pub fn scale(&mut self, s: F) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }
}

/// `C (m x n) = op(A) op(B) (+ C if accumulate)` with row-major storage.
/// `op(A)` is `m x k`; with `trans_a` the stored matrix is `k x m`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul<F: Scalar>(
    c: &mut [F],
    a: &[F],
    b: &[F],
    m: usize,
    k: usize,
    n: usize,
    trans_a: bool,
    trans_b: bool,
    accumulate: bool,
) {
    assert!(a.len() >= m * k, "lhs too short");
    assert!(b.len() >= k * n, "rhs too short");
    assert!(c.len() >= m * n, "output too short");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c[..m * n].iter_mut().for_each(|v| *v = F::zero());
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { F::one() } else { F::zero() };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        F::gemm_raw(
            m,
            k,
            n,
            F::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `y += a * x`.
#[inline]
pub(crate) fn axpy<F: Scalar>(y: &mut [F], a: F, x: &[F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let n = a.len().min(b.len());
    let mut acc = [F::zero(); 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let base = c * 8;
        for l in 0..8 {
            acc[l] += a[base + l] * b[base + l];
        }
    }
    let mut s = F::zero();
    for v in acc {
        s += v;
    }
    for i in chunks * 8..n {
        s += a[i] * b[i];
    }
    s
}

/// `y (1 x n) += x (1 x k) W (k x n)`.
#[inline]
pub(crate) fn vec_mat_acc<F: Scalar>(y: &mut [F], x: &[F], w: &[F], n: usize) {
    for (i, &xi) in x.iter().enumerate() {
        if xi != F::zero() {
            axpy(y, xi, &w[i * n..(i + 1) * n]);
        }
    }
}

/// `dx (1 x k) += dy (1 x n) W^T` where `W` is `k x n`.
#[inline]
pub(crate) fn vec_mat_t_acc<F: Scalar>(dx: &mut [F], dy: &[F], w: &[F], n: usize) {
    for (i, d) in dx.iter_mut().enumerate() {
        *d += dot(&w[i * n..(i + 1) * n], dy);
    }
}

pub(crate) fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub(crate) fn check_finite<F: Scalar>(values: &[F], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(numeric_err(format!("non-finite value in {what}")))
    }
}
