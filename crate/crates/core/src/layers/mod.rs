//! Forward and backward passes for every layer type used by the IndRNN
//! classifier and the two baselines.

mod batchnorm;
mod conv;
mod dense;
mod indrnn;
mod lstm;
mod pool;

pub use batchnorm::{BatchNormCache, BatchNormGrads, BatchNormState, Mode};
pub use conv::{Conv1dCache, Conv1dGrads, Conv1dParams};
pub use dense::{DenseCache, DenseGrads, FullyConnectedParams};
pub use indrnn::{IndRnnCache, IndRnnGrads, IndRnnLayerParams};
pub use lstm::{LstmCache, LstmGrads, LstmParams};
pub use pool::{pooled_len, AvgPoolCache, AvgPoolTime, MaxPoolCache, MaxPoolTime};

use crate::error::Result;
use crate::numerics::{Scalar, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    IndRnn(IndRnnLayerParams<T>),
    BatchNorm(BatchNormState<T>),
    MaxPool(MaxPoolTime),
    AvgPool(AvgPoolTime),
    Dense(FullyConnectedParams<T>),
    Lstm(LstmParams<T>),
    Conv1d(Conv1dParams<T>),
}

#[derive(Clone, Debug)]
pub enum LayerCache<T> {
    IndRnn(IndRnnCache<T>),
    BatchNorm(BatchNormCache<T>),
    MaxPool(MaxPoolCache),
    AvgPool(AvgPoolCache),
    Dense(DenseCache<T>),
    Lstm(LstmCache<T>),
    Conv1d(Conv1dCache<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::IndRnn(_) => "indrnn",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::MaxPool(_) => "maxpool",
            Layer::AvgPool(_) => "avgpool",
            Layer::Dense(_) => "fc",
            Layer::Lstm(_) => "lstm",
            Layer::Conv1d(_) => "conv1d",
        }
    }

    /// Trainable tensors with their names, in a fixed declaration order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::IndRnn(p) => vec![
                ("input_weights", &p.input_weights),
                ("recurrent_weights", &p.recurrent_weights),
                ("bias", &p.bias),
            ],
            Layer::BatchNorm(p) => vec![("gain", &p.gain), ("shift", &p.shift)],
            Layer::Dense(p) => vec![("weights", &p.weights), ("bias", &p.bias)],
            Layer::Lstm(p) => vec![
                ("input_weights", &p.input_weights),
                ("recurrent_weights", &p.recurrent_weights),
                ("bias", &p.bias),
            ],
            Layer::Conv1d(p) => vec![("weights", &p.weights), ("bias", &p.bias)],
            Layer::MaxPool(_) | Layer::AvgPool(_) => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::IndRnn(p) => vec![
                &mut p.input_weights,
                &mut p.recurrent_weights,
                &mut p.bias,
            ],
            Layer::BatchNorm(p) => vec![&mut p.gain, &mut p.shift],
            Layer::Dense(p) => vec![&mut p.weights, &mut p.bias],
            Layer::Lstm(p) => vec![
                &mut p.input_weights,
                &mut p.recurrent_weights,
                &mut p.bias,
            ],
            Layer::Conv1d(p) => vec![&mut p.weights, &mut p.bias],
            Layer::MaxPool(_) | Layer::AvgPool(_) => vec![],
        }
    }

    /// Non-trainable state that still belongs in a checkpoint.
    pub fn buffers(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::BatchNorm(p) => vec![&p.running_mean, &p.running_var],
            _ => vec![],
        }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, LayerCache<T>)> {
        Ok(match self {
            Layer::IndRnn(p) => {
                let (y, c) = p.forward(x)?;
                (y, LayerCache::IndRnn(c))
            }
            Layer::BatchNorm(p) => {
                let (y, c) = p.forward(x, mode)?;
                (y, LayerCache::BatchNorm(c))
            }
            Layer::MaxPool(p) => {
                let (y, c) = p.forward(x)?;
                (y, LayerCache::MaxPool(c))
            }
            Layer::AvgPool(p) => {
                let (y, c) = p.forward(x)?;
                (y, LayerCache::AvgPool(c))
            }
            Layer::Dense(p) => {
                let (y, c) = p.forward(x)?;
                (y, LayerCache::Dense(c))
            }
            Layer::Lstm(p) => {
                let (y, c) = p.forward(x)?;
                (y, LayerCache::Lstm(c))
            }
            Layer::Conv1d(p) => {
                let (y, c) = p.forward(x)?;
                (y, LayerCache::Conv1d(c))
            }
        })
    }

    /// Returns `(grad_input, param_grads)` with `param_grads` aligned to [`Layer::params`].
    pub fn backward(&self, cache: &LayerCache<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        use crate::error::Error;
        let mismatch = || Error::layer(self.kind(), "cache belongs to a different layer type");
        Ok(match (self, cache) {
            (Layer::IndRnn(p), LayerCache::IndRnn(c)) => {
                let g = p.backward(c, grad_out)?;
                (g.input, vec![g.input_weights, g.recurrent_weights, g.bias])
            }
            (Layer::BatchNorm(p), LayerCache::BatchNorm(c)) => {
                let g = p.backward(c, grad_out)?;
                (g.input, vec![g.gain, g.shift])
            }
            (Layer::MaxPool(p), LayerCache::MaxPool(c)) => (p.backward(c, grad_out)?, vec![]),
            (Layer::AvgPool(p), LayerCache::AvgPool(c)) => (p.backward(c, grad_out)?, vec![]),
            (Layer::Dense(p), LayerCache::Dense(c)) => {
                let g = p.backward(c, grad_out)?;
                (g.input, vec![g.weights, g.bias])
            }
            (Layer::Lstm(p), LayerCache::Lstm(c)) => {
                let g = p.backward(c, grad_out)?;
                (g.input, vec![g.input_weights, g.recurrent_weights, g.bias])
            }
            (Layer::Conv1d(p), LayerCache::Conv1d(c)) => {
                let g = p.backward(c, grad_out)?;
                (g.input, vec![g.weights, g.bias])
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn commit_running_stats(&mut self, cache: &LayerCache<T>) {
        if let (Layer::BatchNorm(p), LayerCache::BatchNorm(c)) = (self, cache) {
            p.commit_running_stats(c);
        }
    }
}
