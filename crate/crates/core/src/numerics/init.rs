use serde::{Deserialize, Serialize};

use super::rng::SeededRng;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitScheme {
    /// Uniform on `[lo, hi)`; `lo == hi` yields a constant tensor.
    Uniform { lo: f64, hi: f64 },
    /// Zero-mean normal with variance `2 / fan_in`.
    HeFanIn { fan_in: usize },
    Constant(f64),
}

pub fn init_params<T: Scalar>(
    rng: &mut SeededRng,
    shape: &[usize],
    scheme: InitScheme,
) -> Result<Tensor<T>> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidTensor(format!("bad parameter shape {shape:?}")));
    }
    let t = match scheme {
        InitScheme::Uniform { lo, hi } => {
            if lo > hi {
                return Err(Error::config(format!("uniform({lo}, {hi}) has lo > hi")));
            }
            Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.uniform(lo, hi)))
        }
        InitScheme::HeFanIn { fan_in } => {
            if fan_in == 0 {
                return Err(Error::config("he init needs fan_in > 0"));
            }
            let std = (2.0 / fan_in as f64).sqrt();
            Tensor::from_fn(shape, |_| T::from_f64_lossy(std * rng.normal()))
        }
        InitScheme::Constant(c) => Tensor::filled(shape, T::from_f64_lossy(c)),
    };
    Ok(t)
}
