use crate::error::{Error, Result};
use crate::exec;
use crate::numerics::{
    add_row_bias, init_params, matmul, matmul_nt, matmul_tn, sum_rows, Activation, InitScheme,
    Scalar, SeededRng, Tensor,
};

/// 1-D convolution over time on `[T, B, C_in]`, stride 1, zero "same"
/// padding, followed by an activation. Weights are stored im2col-ready as
/// `[kernel · C_in, C_out]` with row index `k · C_in + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub kernel: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct Conv1dCache<T> {
    cols: Tensor<T>,
    preact: Tensor<T>,
    input_shape: Vec<usize>,
}

pub struct Conv1dGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Tensor<T>,
}

impl<T: Scalar> Conv1dParams<T> {
    pub fn init(
        rng: &mut SeededRng,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    ) -> Result<Self> {
        activation.validate()?;
        if kernel == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::config("conv dimensions must be positive"));
        }
        let fan_in = kernel * in_channels;
        Ok(Self {
            weights: init_params(rng, &[fan_in, out_channels], InitScheme::HeFanIn { fan_in })?,
            bias: Tensor::zeros(&[out_channels]),
            kernel,
            activation,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[0] / self.kernel
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    fn pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }

    fn im2col(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (steps, batch, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let k = self.kernel;
        let pad = self.pad_left();
        let width = k * cin;
        let mut cols = vec![T::zero(); steps * batch * width];
        let xd = x.data();
        exec::for_each_chunk_mut(&mut cols, batch * width, |t, block| {
            for b in 0..batch {
                for kk in 0..k {
                    let src = t as isize + kk as isize - pad as isize;
                    if src < 0 || src >= steps as isize {
                        continue;
                    }
                    let from = (src as usize * batch + b) * cin;
                    let to = b * width + kk * cin;
                    block[to..to + cin].copy_from_slice(&xd[from..from + cin]);
                }
            }
        });
        Tensor::new(vec![steps * batch, width], cols)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Conv1dCache<T>)> {
        x.expect_ndim(3, "conv1d_forward")?;
        if x.shape()[2] != self.in_channels() {
            return Err(Error::ShapeMismatch {
                op: "conv1d_forward",
                left: x.shape().to_vec(),
                right: self.weights.shape().to_vec(),
            });
        }
        let (steps, batch) = (x.shape()[0], x.shape()[1]);
        let cols = self.im2col(x)?;
        let mut z = matmul(&cols, &self.weights)?;
        add_row_bias(&mut z, &self.bias);
        let y = self
            .activation
            .forward(&z)
            .into_shape(&[steps, batch, self.out_channels()])?;
        Ok((
            y,
            Conv1dCache {
                cols,
                preact: z,
                input_shape: x.shape().to_vec(),
            },
        ))
    }

    pub fn backward(&self, cache: &Conv1dCache<T>, grad_out: &Tensor<T>) -> Result<Conv1dGrads<T>> {
        if grad_out.len() != cache.preact.len() {
            return Err(Error::ShapeMismatch {
                op: "conv1d_backward",
                left: grad_out.shape().to_vec(),
                right: cache.preact.shape().to_vec(),
            });
        }
        let mut dz = grad_out.reshape(cache.preact.shape())?;
        for (d, &z) in dz.data_mut().iter_mut().zip(cache.preact.data()) {
            *d = *d * self.activation.derivative(z);
        }
        let dcols = matmul_nt(&dz, &self.weights)?;
        let (steps, batch, cin) = (
            cache.input_shape[0],
            cache.input_shape[1],
            cache.input_shape[2],
        );
        let k = self.kernel;
        let pad = self.pad_left();
        let width = k * cin;
        let mut dx = vec![T::zero(); steps * batch * cin];
        let dc = dcols.data();
        // gather form of col2im: each input step sums the taps that read it
        exec::for_each_chunk_mut(&mut dx, batch * cin, |s, block| {
            for kk in 0..k {
                let t = s as isize - kk as isize + pad as isize;
                if t < 0 || t >= steps as isize {
                    continue;
                }
                for b in 0..batch {
                    let from = (t as usize * batch + b) * width + kk * cin;
                    for c in 0..cin {
                        block[b * cin + c] = block[b * cin + c] + dc[from + c];
                    }
                }
            }
        });
        Ok(Conv1dGrads {
            weights: matmul_tn(&cache.cols, &dz)?,
            bias: sum_rows(&dz),
            input: Tensor::new(cache.input_shape.clone(), dx)?,
        })
    }
}
