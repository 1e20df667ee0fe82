use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-feature normalization over every leading axis of a `[.., F]` tensor
/// (for sequences that is the merged time × batch axis).
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T> {
    pub gain: Tensor<T>,
    pub shift: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: f64,
    pub momentum: f64,
    /// Set after the first train-mode update or an explicit load.
    pub stats_ready: bool,
}

#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
    batch_mean: Vec<T>,
    batch_var: Vec<T>,
    mode: Mode,
}

pub struct BatchNormGrads<T> {
    pub gain: Tensor<T>,
    pub shift: Tensor<T>,
    pub input: Tensor<T>,
}

impl<T: Scalar> BatchNormState<T> {
    pub const EPS: f64 = 1e-5;
    pub const MOMENTUM: f64 = 0.9;

    pub fn new(features: usize) -> Self {
        Self {
            gain: Tensor::filled(&[features], T::one()),
            shift: Tensor::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::filled(&[features], T::one()),
            eps: Self::EPS,
            momentum: Self::MOMENTUM,
            stats_ready: false,
        }
    }

    pub fn features(&self) -> usize {
        self.gain.len()
    }

    pub fn load_running_stats(&mut self, mean: Tensor<T>, var: Tensor<T>) -> Result<()> {
        mean.expect_same_shape(&self.running_mean, "batchnorm_load")?;
        var.expect_same_shape(&self.running_var, "batchnorm_load")?;
        if var.data().iter().any(|&v| v < T::zero()) {
            return Err(Error::layer("batchnorm", "running variance must be non-negative"));
        }
        self.running_mean = mean;
        self.running_var = var;
        self.stats_ready = true;
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let f = self.features();
        if x.last_dim() != f {
            return Err(Error::ShapeMismatch {
                op: "batchnorm_apply",
                left: x.shape().to_vec(),
                right: vec![f],
            });
        }
        let n = x.rows();
        let eps = T::from_f64_lossy(self.eps);
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::layer(
                        "batchnorm",
                        format!("train mode needs at least 2 samples per feature, got {n}"),
                    ));
                }
                batch_moments(x)
            }
            Mode::Eval => {
                if !self.stats_ready {
                    return Err(Error::layer(
                        "batchnorm",
                        "eval mode before any train-mode update or loaded running statistics",
                    ));
                }
                (
                    self.running_mean.data().to_vec(),
                    self.running_var.data().to_vec(),
                )
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut normalized = x.clone();
        let mut out = x.clone();
        let (g, s) = (self.gain.data(), self.shift.data());
        for (nrow, orow) in normalized
            .data_mut()
            .chunks_mut(f)
            .zip(out.data_mut().chunks_mut(f))
        {
            for j in 0..f {
                let xh = (nrow[j] - mean[j]) * inv_std[j];
                nrow[j] = xh;
                orow[j] = g[j] * xh + s[j];
            }
        }
        let cache = BatchNormCache {
            normalized,
            inv_std,
            batch_mean: mean,
            batch_var: var,
            mode,
        };
        Ok((out, cache))
    }

    /// `running ← momentum·running + (1 − momentum)·batch` from a train-mode cache.
    pub fn commit_running_stats(&mut self, cache: &BatchNormCache<T>) {
        if cache.mode != Mode::Train {
            return;
        }
        let m = T::from_f64_lossy(self.momentum);
        let one_m = T::one() - m;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&cache.batch_mean) {
            *r = m * *r + one_m * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&cache.batch_var) {
            *r = (m * *r + one_m * b).max(T::zero());
        }
        self.stats_ready = true;
    }

    pub fn backward(&self, cache: &BatchNormCache<T>, grad_out: &Tensor<T>) -> Result<BatchNormGrads<T>> {
        grad_out.expect_same_shape(&cache.normalized, "batchnorm_backward")?;
        let f = self.features();
        let n = grad_out.rows();
        let mut dgain = vec![T::zero(); f];
        let mut dshift = vec![T::zero(); f];
        for (grow, xrow) in grad_out.data().chunks(f).zip(cache.normalized.data().chunks(f)) {
            for j in 0..f {
                dgain[j] = dgain[j] + grow[j] * xrow[j];
                dshift[j] = dshift[j] + grow[j];
            }
        }
        let g = self.gain.data();
        let mut dx = grad_out.clone();
        match cache.mode {
            Mode::Eval => {
                for row in dx.data_mut().chunks_mut(f) {
                    for j in 0..f {
                        row[j] = row[j] * g[j] * cache.inv_std[j];
                    }
                }
            }
            Mode::Train => {
                // dx = inv_std/N · (N·dxh − Σdxh − xh·Σ(dxh·xh)), with dxh = dy·γ
                let nn = T::from_usize(n).unwrap();
                for (row, xrow) in dx.data_mut().chunks_mut(f).zip(cache.normalized.data().chunks(f)) {
                    for j in 0..f {
                        let sum_dxh = dshift[j] * g[j];
                        let sum_dxh_xh = dgain[j] * g[j];
                        row[j] = cache.inv_std[j] / nn
                            * (nn * row[j] * g[j] - sum_dxh - xrow[j] * sum_dxh_xh);
                    }
                }
            }
        }
        Ok(BatchNormGrads {
            gain: Tensor::from_vec(dgain),
            shift: Tensor::from_vec(dshift),
            input: dx,
        })
    }
}

/// Per-feature mean and population variance over all rows, two-pass.
fn batch_moments<T: Scalar>(x: &Tensor<T>) -> (Vec<T>, Vec<T>) {
    let f = x.last_dim();
    let nn = T::from_usize(x.rows()).unwrap();
    let mut mean = vec![T::zero(); f];
    for row in x.data().chunks(f) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / nn);
    let mut var = vec![T::zero(); f];
    for row in x.data().chunks(f) {
        for j in 0..f {
            let d = row[j] - mean[j];
            var[j] = var[j] + d * d;
        }
    }
    var.iter_mut().for_each(|v| *v = *v / nn);
    (mean, var)
}
