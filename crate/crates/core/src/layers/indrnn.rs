use crate::error::{Error, Result};
use crate::numerics::{
    add_row_bias, init_params, matmul, matmul_nt, matmul_tn, sum_rows, Activation, InitScheme,
    Scalar, SeededRng, Tensor,
};

/// Independently recurrent layer:
/// `h_t = σ(x_t · W + u ⊙ h_{t−1} + b)`.
///
/// Each hidden unit only sees its own previous state, so the recurrent
/// Jacobian is diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct IndRnnLayerParams<T> {
    /// `[input_dim, hidden]`
    pub input_weights: Tensor<T>,
    /// `[hidden]`
    pub recurrent_weights: Tensor<T>,
    /// `[hidden]`
    pub bias: Tensor<T>,
    pub activation: Activation,
    pub recurrent_clip: f64,
}

#[derive(Clone, Debug)]
pub struct IndRnnCache<T> {
    input: Tensor<T>,
    h0: Tensor<T>,
    preact: Tensor<T>,
    hidden: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct IndRnnGrads<T> {
    pub input_weights: Tensor<T>,
    pub recurrent_weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Tensor<T>,
    pub h0: Tensor<T>,
}

impl<T: Scalar> IndRnnLayerParams<T> {
    /// He-normal input weights, recurrent weights uniform on `[0, 1)`, zero bias.
    pub fn init(
        rng: &mut SeededRng,
        input_dim: usize,
        hidden: usize,
        recurrent_clip: f64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::config("indrnn dimensions must be positive"));
        }
        if !(recurrent_clip > 0.0) {
            return Err(Error::config("recurrent_clip must be positive"));
        }
        Ok(Self {
            input_weights: init_params(rng, &[input_dim, hidden], InitScheme::HeFanIn { fan_in: input_dim })?,
            recurrent_weights: init_params(rng, &[hidden], InitScheme::Uniform { lo: 0.0, hi: 1.0 })?,
            bias: Tensor::zeros(&[hidden]),
            activation: Activation::Relu,
            recurrent_clip,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.input_weights.shape()[1]
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, IndRnnCache<T>)> {
        let b = input.shape().get(1).copied().unwrap_or(1);
        self.forward_with_state(input, &Tensor::zeros(&[b, self.hidden()]))
    }

    pub fn forward_with_state(
        &self,
        input: &Tensor<T>,
        h0: &Tensor<T>,
    ) -> Result<(Tensor<T>, IndRnnCache<T>)> {
        input.expect_ndim(3, "indrnn_forward")?;
        let (steps, batch, dim) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let hidden = self.hidden();
        if dim != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "indrnn_forward",
                left: input.shape().to_vec(),
                right: self.input_weights.shape().to_vec(),
            });
        }
        if h0.shape() != [batch, hidden] {
            return Err(Error::ShapeMismatch {
                op: "indrnn_forward(h0)",
                left: h0.shape().to_vec(),
                right: vec![batch, hidden],
            });
        }

        let flat = input.reshape(&[steps * batch, dim])?;
        let mut preact = matmul(&flat, &self.input_weights)?;
        add_row_bias(&mut preact, &self.bias);
        let mut hidden_seq = vec![T::zero(); steps * batch * hidden];
        let u = self.recurrent_weights.data();
        let stride = batch * hidden;
        let pre = preact.data_mut();
        for t in 0..steps {
            let (done, rest) = hidden_seq.split_at_mut(t * stride);
            let prev: &[T] = if t == 0 {
                h0.data()
            } else {
                &done[(t - 1) * stride..]
            };
            let cur = &mut rest[..stride];
            let zt = &mut pre[t * stride..(t + 1) * stride];
            for (i, (z, h)) in zt.iter_mut().zip(cur.iter_mut()).enumerate() {
                *z = *z + u[i % hidden] * prev[i];
                *h = self.activation.apply(*z);
            }
        }
        let hidden_seq = Tensor::new(vec![steps, batch, hidden], hidden_seq)?;
        let cache = IndRnnCache {
            input: input.clone(),
            h0: h0.clone(),
            preact: preact.into_shape(&[steps, batch, hidden])?,
            hidden: hidden_seq.clone(),
        };
        Ok((hidden_seq, cache))
    }

    /// Backpropagation through time for per-step upstream gradients
    /// `grad_hidden[T×B×H]`.
    pub fn backward(&self, cache: &IndRnnCache<T>, grad_hidden: &Tensor<T>) -> Result<IndRnnGrads<T>> {
        if grad_hidden.shape() != cache.hidden.shape() {
            return Err(Error::ShapeMismatch {
                op: "indrnn_backward",
                left: grad_hidden.shape().to_vec(),
                right: cache.hidden.shape().to_vec(),
            });
        }
        let (steps, batch, hidden) = (
            cache.hidden.shape()[0],
            cache.hidden.shape()[1],
            cache.hidden.shape()[2],
        );
        let dim = cache.input.shape()[2];
        let stride = batch * hidden;
        let u = self.recurrent_weights.data();
        let z = cache.preact.data();
        let h = cache.hidden.data();
        let g = grad_hidden.data();

        let mut dz = vec![T::zero(); steps * stride];
        let mut du = vec![T::zero(); hidden];
        // gradient flowing into h_{t} from step t+1
        let mut carry = vec![T::zero(); stride];
        for t in (0..steps).rev() {
            let prev: &[T] = if t == 0 {
                cache.h0.data()
            } else {
                &h[(t - 1) * stride..t * stride]
            };
            for i in 0..stride {
                let idx = t * stride + i;
                let d = (g[idx] + carry[i]) * self.activation.derivative(z[idx]);
                dz[idx] = d;
                du[i % hidden] = du[i % hidden] + d * prev[i];
                carry[i] = d * u[i % hidden];
            }
        }

        let dz = Tensor::new(vec![steps * batch, hidden], dz)?;
        let flat = cache.input.reshape(&[steps * batch, dim])?;
        let grad_w = matmul_tn(&flat, &dz)?;
        let grad_b = sum_rows(&dz);
        let grad_x = matmul_nt(&dz, &self.input_weights)?.into_shape(&[steps, batch, dim])?;
        Ok(IndRnnGrads {
            input_weights: grad_w,
            recurrent_weights: Tensor::from_vec(du),
            bias: grad_b,
            input: grad_x,
            h0: Tensor::new(vec![batch, hidden], carry)?,
        })
    }

    /// Clamp every recurrent weight into `[−clip, clip]`.
    pub fn clip_recurrent(&mut self) {
        let c = T::from_f64_lossy(self.recurrent_clip);
        for u in self.recurrent_weights.data_mut() {
            *u = u.max(-c).min(c);
        }
    }
}
