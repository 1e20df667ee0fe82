use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Ceil-mode max pooling along the time axis of a `[T, B, F]` sequence.
///
/// A trailing partial window still emits an output, so `T′ = ceil(T / stride)`
/// when `window == stride`, and a length-1 sequence passes through unchanged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxPoolTime {
    pub window: usize,
    pub stride: usize,
}

#[derive(Clone, Debug)]
pub struct MaxPoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

/// Output length of ceil-mode pooling.
pub fn pooled_len(steps: usize, window: usize, stride: usize) -> usize {
    if steps <= window {
        1
    } else {
        let n = (steps - window).div_ceil(stride) + 1;
        // last window must start inside the sequence
        if (n - 1) * stride >= steps {
            n - 1
        } else {
            n
        }
    }
}

impl Default for MaxPoolTime {
    fn default() -> Self {
        Self { window: 2, stride: 2 }
    }
}

impl MaxPoolTime {
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        if window == 0 || stride == 0 {
            return Err(Error::config("pool window and stride must be positive"));
        }
        Ok(Self { window, stride })
    }

    pub fn output_len(&self, steps: usize) -> usize {
        pooled_len(steps, self.window, self.stride)
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, MaxPoolCache)> {
        x.expect_ndim(3, "maxpool_time")?;
        let (steps, batch, feat) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let out_steps = self.output_len(steps);
        let stride = batch * feat;
        let mut out = Vec::with_capacity(out_steps * stride);
        let mut argmax = Vec::with_capacity(out_steps * stride);
        let d = x.data();
        for o in 0..out_steps {
            let start = o * self.stride;
            let end = (start + self.window).min(steps);
            for i in 0..stride {
                let mut best_t = start;
                let mut best = d[start * stride + i];
                for t in start + 1..end {
                    let v = d[t * stride + i];
                    if v > best {
                        best = v;
                        best_t = t;
                    }
                }
                out.push(best);
                argmax.push(best_t * stride + i);
            }
        }
        Ok((
            Tensor::new(vec![out_steps, batch, feat], out)?,
            MaxPoolCache {
                input_shape: x.shape().to_vec(),
                argmax,
            },
        ))
    }

    pub fn backward<T: Scalar>(&self, cache: &MaxPoolCache, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if grad_out.len() != cache.argmax.len() {
            return Err(Error::ShapeMismatch {
                op: "maxpool_backward",
                left: grad_out.shape().to_vec(),
                right: cache.input_shape.clone(),
            });
        }
        let mut dx = Tensor::zeros(&cache.input_shape);
        let d = dx.data_mut();
        for (&src, &g) in cache.argmax.iter().zip(grad_out.data()) {
            d[src] = d[src] + g;
        }
        Ok(dx)
    }
}

/// Mean over the time axis: `[T, B, F] → [B, F]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AvgPoolTime;

#[derive(Clone, Debug)]
pub struct AvgPoolCache {
    input_shape: Vec<usize>,
}

impl AvgPoolTime {
    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, AvgPoolCache)> {
        x.expect_ndim(3, "avgpool_time")?;
        let (steps, batch, feat) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let stride = batch * feat;
        let mut acc = vec![T::zero(); stride];
        for step in x.data().chunks(stride) {
            for (a, &v) in acc.iter_mut().zip(step) {
                *a = *a + v;
            }
        }
        let inv = T::one() / T::from_usize(steps).unwrap();
        acc.iter_mut().for_each(|a| *a = *a * inv);
        Ok((
            Tensor::new(vec![batch, feat], acc)?,
            AvgPoolCache {
                input_shape: x.shape().to_vec(),
            },
        ))
    }

    pub fn backward<T: Scalar>(&self, cache: &AvgPoolCache, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let steps = cache.input_shape[0];
        let stride = cache.input_shape[1] * cache.input_shape[2];
        if grad_out.len() != stride {
            return Err(Error::ShapeMismatch {
                op: "avgpool_backward",
                left: grad_out.shape().to_vec(),
                right: cache.input_shape.clone(),
            });
        }
        let inv = T::one() / T::from_usize(steps).unwrap();
        let g: Vec<T> = grad_out.data().iter().map(|&v| v * inv).collect();
        Ok(Tensor::from_fn(&cache.input_shape, |i| g[i % stride]))
    }
}
