use crate::error::{Error, Result};
use crate::numerics::{
    add_row_bias, init_params, matmul, matmul_nt, matmul_tn, sigmoid, sum_rows, InitScheme, Scalar,
    SeededRng, Tensor,
};

/// Standard LSTM over a `[T, B, D]` sequence. Gate columns are laid out
/// `[input | forget | candidate | output]`, each `hidden` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    /// `[D, 4H]`
    pub input_weights: Tensor<T>,
    /// `[H, 4H]`
    pub recurrent_weights: Tensor<T>,
    /// `[4H]`
    pub bias: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    input: Tensor<T>,
    /// post-nonlinearity gate values, `[T·B, 4H]`
    gates: Vec<T>,
    cell: Vec<T>,
    cell_tanh: Vec<T>,
    hidden: Vec<T>,
    steps: usize,
    batch: usize,
}

pub struct LstmGrads<T> {
    pub input_weights: Tensor<T>,
    pub recurrent_weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Tensor<T>,
}

impl<T: Scalar> LstmParams<T> {
    /// Uniform `±1/√H` weights, zero bias except forget gate bias 1.
    pub fn init(rng: &mut SeededRng, input_dim: usize, hidden: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::config("lstm dimensions must be positive"));
        }
        let k = 1.0 / (hidden as f64).sqrt();
        let scheme = InitScheme::Uniform { lo: -k, hi: k };
        let mut bias = Tensor::zeros(&[4 * hidden]);
        for v in &mut bias.data_mut()[hidden..2 * hidden] {
            *v = T::one();
        }
        Ok(Self {
            input_weights: init_params(rng, &[input_dim, 4 * hidden], scheme)?,
            recurrent_weights: init_params(rng, &[hidden, 4 * hidden], scheme)?,
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.recurrent_weights.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, LstmCache<T>)> {
        x.expect_ndim(3, "lstm_forward")?;
        let (steps, batch, dim) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if dim != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "lstm_forward",
                left: x.shape().to_vec(),
                right: self.input_weights.shape().to_vec(),
            });
        }
        let h = self.hidden();
        let g4 = 4 * h;
        let mut zx = matmul(&x.reshape(&[steps * batch, dim])?, &self.input_weights)?;
        add_row_bias(&mut zx, &self.bias);

        let mut gates = zx.into_data();
        let mut cell = vec![T::zero(); steps * batch * h];
        let mut cell_tanh = vec![T::zero(); steps * batch * h];
        let mut hidden = vec![T::zero(); steps * batch * h];
        let mut h_prev = Tensor::zeros(&[batch, h]);
        let mut c_prev = vec![T::zero(); batch * h];
        for t in 0..steps {
            let zh = matmul(&h_prev, &self.recurrent_weights)?;
            let gt = &mut gates[t * batch * g4..(t + 1) * batch * g4];
            for b in 0..batch {
                let row = &mut gt[b * g4..(b + 1) * g4];
                let zrow = &zh.data()[b * g4..(b + 1) * g4];
                for (r, &z) in row.iter_mut().zip(zrow) {
                    *r = *r + z;
                }
                for j in 0..h {
                    row[j] = sigmoid(row[j]);
                    row[h + j] = sigmoid(row[h + j]);
                    row[2 * h + j] = row[2 * h + j].tanh();
                    row[3 * h + j] = sigmoid(row[3 * h + j]);
                    let idx = (t * batch + b) * h + j;
                    let c = row[h + j] * c_prev[b * h + j] + row[j] * row[2 * h + j];
                    cell[idx] = c;
                    cell_tanh[idx] = c.tanh();
                    hidden[idx] = row[3 * h + j] * cell_tanh[idx];
                }
            }
            c_prev.copy_from_slice(&cell[t * batch * h..(t + 1) * batch * h]);
            h_prev = Tensor::new(vec![batch, h], hidden[t * batch * h..(t + 1) * batch * h].to_vec())?;
        }
        let out = Tensor::new(vec![steps, batch, h], hidden.clone())?;
        Ok((
            out,
            LstmCache {
                input: x.clone(),
                gates,
                cell,
                cell_tanh,
                hidden,
                steps,
                batch,
            },
        ))
    }

    pub fn backward(&self, cache: &LstmCache<T>, grad_out: &Tensor<T>) -> Result<LstmGrads<T>> {
        let (steps, batch) = (cache.steps, cache.batch);
        let h = self.hidden();
        let g4 = 4 * h;
        if grad_out.shape() != [steps, batch, h] {
            return Err(Error::ShapeMismatch {
                op: "lstm_backward",
                left: grad_out.shape().to_vec(),
                right: vec![steps, batch, h],
            });
        }
        let one = T::one();
        let go = grad_out.data();
        let mut dz = vec![T::zero(); steps * batch * g4];
        let mut dh_next = vec![T::zero(); batch * h];
        let mut dc_next = vec![T::zero(); batch * h];
        for t in (0..steps).rev() {
            for b in 0..batch {
                let row = &cache.gates[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                let drow = &mut dz[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                for j in 0..h {
                    let idx = (t * batch + b) * h + j;
                    let (i_g, f_g, c_g, o_g) = (row[j], row[h + j], row[2 * h + j], row[3 * h + j]);
                    let c_before = if t == 0 {
                        T::zero()
                    } else {
                        cache.cell[idx - batch * h]
                    };
                    let tc = cache.cell_tanh[idx];
                    let dh = go[idx] + dh_next[b * h + j];
                    let d_o = dh * tc;
                    let dc = dh * o_g * (one - tc * tc) + dc_next[b * h + j];
                    drow[j] = dc * c_g * i_g * (one - i_g);
                    drow[h + j] = dc * c_before * f_g * (one - f_g);
                    drow[2 * h + j] = dc * i_g * (one - c_g * c_g);
                    drow[3 * h + j] = d_o * o_g * (one - o_g);
                    dc_next[b * h + j] = dc * f_g;
                }
            }
            let dzt = Tensor::new(vec![batch, g4], dz[t * batch * g4..(t + 1) * batch * g4].to_vec())?;
            dh_next = matmul_nt(&dzt, &self.recurrent_weights)?.into_data();
        }

        let dz = Tensor::new(vec![steps * batch, g4], dz)?;
        // h_{t−1} stacked for every step, zeros at t = 0
        let mut h_prev = vec![T::zero(); steps * batch * h];
        if steps > 1 {
            h_prev[batch * h..].copy_from_slice(&cache.hidden[..(steps - 1) * batch * h]);
        }
        let h_prev = Tensor::new(vec![steps * batch, h], h_prev)?;
        let dim = self.input_dim();
        Ok(LstmGrads {
            input_weights: matmul_tn(&cache.input.reshape(&[steps * batch, dim])?, &dz)?,
            recurrent_weights: matmul_tn(&h_prev, &dz)?,
            bias: sum_rows(&dz),
            input: matmul_nt(&dz, &self.input_weights)?.into_shape(&[steps, batch, dim])?,
        })
    }
}
