use crate::error::{Error, Result};
use crate::numerics::{
    add_row_bias, init_params, matmul, matmul_nt, matmul_tn, sum_rows, Activation, InitScheme,
    Scalar, SeededRng, Tensor,
};

/// `σ(x · W + b)` applied to the last axis, so it doubles as a
/// time-distributed layer on `[T, B, in]` sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct FullyConnectedParams<T> {
    /// `[in, out]`
    pub weights: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    input: Tensor<T>,
    preact: Tensor<T>,
}

pub struct DenseGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Tensor<T>,
}

impl<T: Scalar> FullyConnectedParams<T> {
    pub fn init(rng: &mut SeededRng, input: usize, output: usize, activation: Activation) -> Result<Self> {
        activation.validate()?;
        Ok(Self {
            weights: init_params(rng, &[input, output], InitScheme::HeFanIn { fan_in: input })?,
            bias: Tensor::zeros(&[output]),
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        if x.last_dim() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "fc_apply",
                left: x.shape().to_vec(),
                right: self.weights.shape().to_vec(),
            });
        }
        let flat = x.reshape(&[x.rows(), self.input_dim()])?;
        let mut z = matmul(&flat, &self.weights)?;
        add_row_bias(&mut z, &self.bias);
        let mut out_shape = x.shape().to_vec();
        *out_shape.last_mut().unwrap() = self.output_dim();
        let y = self.activation.forward(&z).into_shape(&out_shape)?;
        Ok((y, DenseCache { input: flat, preact: z }))
    }

    pub fn backward(&self, cache: &DenseCache<T>, grad_out: &Tensor<T>) -> Result<DenseGrads<T>> {
        if grad_out.len() != cache.preact.len() {
            return Err(Error::ShapeMismatch {
                op: "fc_backward",
                left: grad_out.shape().to_vec(),
                right: cache.preact.shape().to_vec(),
            });
        }
        let mut dz = grad_out.reshape(cache.preact.shape())?;
        if self.activation != Activation::Identity {
            for (d, &z) in dz.data_mut().iter_mut().zip(cache.preact.data()) {
                *d = *d * self.activation.derivative(z);
            }
        }
        let mut in_shape = grad_out.shape().to_vec();
        *in_shape.last_mut().unwrap() = self.input_dim();
        Ok(DenseGrads {
            weights: matmul_tn(&cache.input, &dz)?,
            bias: sum_rows(&dz),
            input: matmul_nt(&dz, &self.weights)?.into_shape(&in_shape)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let fc = FullyConnectedParams {
            weights: Tensor::<f64>::eye(3),
            bias: Tensor::zeros(&[3]),
            activation: Activation::Identity,
        };
        let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5);
        assert_eq!(fc.forward(&x).unwrap().0, x);
    }

    #[test]
    fn zero_input_gives_bias() {
        let mut rng = SeededRng::new(1);
        let mut fc = FullyConnectedParams::<f64>::init(&mut rng, 4, 2, Activation::Identity).unwrap();
        fc.bias = Tensor::from_vec(vec![0.5, -1.0]);
        let (y, _) = fc.forward(&Tensor::zeros(&[3, 4])).unwrap();
        assert_eq!(y.data(), &[0.5, -1.0, 0.5, -1.0, 0.5, -1.0]);
    }

    #[test]
    fn time_distributed_shape() {
        let mut rng = SeededRng::new(1);
        let fc = FullyConnectedParams::<f32>::init(&mut rng, 4, 6, Activation::Relu).unwrap();
        let (y, _) = fc.forward(&Tensor::zeros(&[5, 2, 4])).unwrap();
        assert_eq!(y.shape(), &[5, 2, 6]);
    }

    #[test]
    fn rejects_wrong_width() {
        let mut rng = SeededRng::new(1);
        let fc = FullyConnectedParams::<f32>::init(&mut rng, 4, 6, Activation::Relu).unwrap();
        assert!(fc.forward(&Tensor::zeros(&[2, 3])).is_err());
    }
}
