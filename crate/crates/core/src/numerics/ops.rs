use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::exec;

fn as_matrix<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<(usize, usize)> {
    t.expect_ndim(2, op)?;
    Ok((t.shape()[0], t.shape()[1]))
}

/// `a[M×K] · b[K×N]`. Each output element accumulates over `k = 0..K` in order.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = as_matrix(a, "matmul")?;
    let (k2, n) = as_matrix(b, "matmul")?;
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = vec![T::zero(); m * n];
    let (ad, bd) = (a.data(), b.data());
    let rows = exec::rows_per_task(m, k * n);
    exec::for_each_chunk_mut(&mut out, rows * n, |chunk, block| {
        for (r, orow) in block.chunks_mut(n).enumerate() {
            let i = chunk * rows + r;
            let arow = &ad[i * k..(i + 1) * k];
            for (kk, &av) in arow.iter().enumerate() {
                let brow = &bd[kk * n..(kk + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o = *o + av * bv;
                }
            }
        }
    });
    Tensor::new(vec![m, n], out)
}

/// `aᵀ · b` for `a[K×M]`, `b[K×N]`.
pub fn matmul_tn<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (k, m) = as_matrix(a, "matmul_tn")?;
    let (k2, n) = as_matrix(b, "matmul_tn")?;
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul_tn",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = vec![T::zero(); m * n];
    let (ad, bd) = (a.data(), b.data());
    let rows = exec::rows_per_task(m, k * n);
    exec::for_each_chunk_mut(&mut out, rows * n, |chunk, block| {
        for (r, orow) in block.chunks_mut(n).enumerate() {
            let i = chunk * rows + r;
            for kk in 0..k {
                let av = ad[kk * m + i];
                let brow = &bd[kk * n..(kk + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o = *o + av * bv;
                }
            }
        }
    });
    Tensor::new(vec![m, n], out)
}

/// `a · bᵀ` for `a[M×K]`, `b[N×K]`.
pub fn matmul_nt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k) = as_matrix(a, "matmul_nt")?;
    let (n, k2) = as_matrix(b, "matmul_nt")?;
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul_nt",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = vec![T::zero(); m * n];
    let (ad, bd) = (a.data(), b.data());
    let rows = exec::rows_per_task(m, k * n);
    exec::for_each_chunk_mut(&mut out, rows * n, |chunk, block| {
        for (r, orow) in block.chunks_mut(n).enumerate() {
            let i = chunk * rows + r;
            let arow = &ad[i * k..(i + 1) * k];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = &bd[j * k..(j + 1) * k];
                *o = arow
                    .iter()
                    .zip(brow)
                    .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
            }
        }
    });
    Tensor::new(vec![m, n], out)
}

pub fn hadamard<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.zip_map(b, "hadamard", |x, y| x * y)
}

/// Adds `bias[N]` to every row of a `[.., N]` tensor in place.
pub(crate) fn add_row_bias<T: Scalar>(x: &mut Tensor<T>, bias: &Tensor<T>) {
    let n = bias.len();
    for row in x.data_mut().chunks_mut(n) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v = *v + b;
        }
    }
}

/// Column sums of a `[rows, N]` view, accumulated top to bottom.
pub(crate) fn sum_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let n = x.last_dim();
    let mut acc = vec![T::zero(); n];
    for row in x.data().chunks(n) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a = *a + v;
        }
    }
    Tensor::from_vec(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu(a) if !(a > 0.0) => Err(Error::config(format!(
                "leaky_relu slope must be positive, got {a}"
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::LeakyRelu(a) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::from_f64_lossy(a)
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Pointwise derivative at the pre-activation `x`. ReLU at 0 is 0;
    /// leaky ReLU at 0 is its slope.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(a) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::from_f64_lossy(a)
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
        }
    }

    pub fn forward<T: Scalar>(self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| self.apply(v))
    }

    pub fn backward<T: Scalar>(self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| self.derivative(v))
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Mean cross-entropy of `logits[B×C]` against class indices, with its
/// gradient `(softmax − onehot)/B`. Uses a max-shifted log-sum-exp.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>)> {
    let (b, c) = as_matrix(logits, "softmax_cross_entropy")?;
    if labels.len() != b {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidTensor(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    let inv_b = T::one() / T::from_usize(b).unwrap();
    let mut grad = vec![T::zero(); b * c];
    let mut loss = T::zero();
    for (i, (row, g)) in logits.data().chunks(c).zip(grad.chunks_mut(c)).enumerate() {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let sum_exp = row.iter().fold(T::zero(), |s, &v| s + (v - max).exp());
        let lse = max + sum_exp.ln();
        loss = loss + (lse - row[labels[i]]);
        for (j, (gv, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = (v - lse).exp();
            let onehot = if j == labels[i] { T::one() } else { T::zero() };
            *gv = (p - onehot) * inv_b;
        }
    }
    Ok((loss * inv_b, Tensor::new(vec![b, c], grad)?))
}

/// Row-wise argmax, first index on ties.
pub fn argmax_rows<T: Scalar>(x: &Tensor<T>) -> Vec<usize> {
    let c = x.last_dim();
    x.data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
