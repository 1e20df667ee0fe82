use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelGrads};
use crate::numerics::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

/// Bias-corrected Adam, one moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: &[&[usize]]) -> Self {
        Self {
            first: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            second: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
        }
    }

    /// One update of every tensor in `params` from the matching `grads`.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        check_shapes(params, grads, self.first.len())?;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::from_f64_lossy(self.beta1), T::from_f64_lossy(self.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let (bc1, bc2) = (T::from_f64_lossy(bc1), T::from_f64_lossy(bc2));
        let lr = T::from_f64_lossy(lr);
        let eps = T::from_f64_lossy(self.eps);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mv = b1 * *mv + one_b1 * gv;
                *vv = b2 * *vv + one_b2 * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv = *pv - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// RMSprop with accumulator `ρ·acc + (1 − ρ)·g²`.
#[derive(Clone, Debug)]
pub struct RmsPropState<T> {
    pub accum: Vec<Tensor<T>>,
    pub rho: f64,
    pub eps: f64,
    pub step: u64,
}

impl<T: Scalar> RmsPropState<T> {
    pub fn new(shapes: &[&[usize]]) -> Self {
        Self {
            accum: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            rho: 0.9,
            eps: 1e-8,
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: f64) -> Result<()> {
        check_shapes(params, grads, self.accum.len())?;
        self.step += 1;
        let rho = T::from_f64_lossy(self.rho);
        let one_rho = T::one() - rho;
        let lr = T::from_f64_lossy(lr);
        let eps = T::from_f64_lossy(self.eps);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let acc = self.accum[k].data_mut();
            for ((pv, &gv), av) in p.data_mut().iter_mut().zip(g.data()).zip(acc) {
                *av = rho * *av + one_rho * gv * gv;
                *pv = *pv - lr * gv / (av.sqrt() + eps);
            }
        }
        Ok(())
    }
}

fn check_shapes<T: Scalar>(params: &[&mut Tensor<T>], grads: &[Tensor<T>], slots: usize) -> Result<()> {
    if params.len() != grads.len() || params.len() != slots {
        return Err(Error::layer(
            "optimizer",
            format!(
                "{} params, {} grads, {} state slots",
                params.len(),
                grads.len(),
                slots
            ),
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        p.expect_same_shape(g, "optimizer_step")?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub enum Optimizer<T> {
    Adam(AdamState<T>),
    RmsProp(RmsPropState<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn for_model(kind: OptimizerKind, model: &Model<T>) -> Self {
        let blocks = model.param_blocks();
        let shapes: Vec<&[usize]> = blocks.iter().map(|(_, t)| t.shape()).collect();
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(&shapes)),
            OptimizerKind::RmsProp => Optimizer::RmsProp(RmsPropState::new(&shapes)),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        match self {
            Optimizer::Adam(s) => s.step,
            Optimizer::RmsProp(s) => s.step,
        }
    }

    /// Validates finiteness, updates every parameter, then re-applies the
    /// recurrent-weight clip.
    pub fn step_model(&mut self, model: &mut Model<T>, grads: &ModelGrads<T>, lr: f64) -> Result<()> {
        let names = model.param_blocks();
        for ((name, _), g) in names.iter().zip(grads) {
            if !g.all_finite() {
                return Err(Error::NonFiniteGradient { block: name.clone() });
            }
        }
        let mut params = model.params_mut();
        match self {
            Optimizer::Adam(s) => s.step(&mut params, grads, lr)?,
            Optimizer::RmsProp(s) => s.step(&mut params, grads, lr)?,
        }
        model.clip_recurrent();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        for g in [0.37f64, -5.0, 1e-3] {
            let mut p = Tensor::from_vec(vec![1.0]);
            let mut s = AdamState::<f64>::new(&[&[1]]);
            s.step(&mut [&mut p], &[Tensor::from_vec(vec![g])], 0.01).unwrap();
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε)
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((p.data()[0] - expected).abs() < 1e-15);
            assert!((p.data()[0] - (1.0 - 0.01 * g.signum())).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::from_vec(vec![0.3f64, -0.2]);
        let mut adam = AdamState::<f64>::new(&[&[2]]);
        let mut rms = RmsPropState::<f64>::new(&[&[2]]);
        for _ in 0..10 {
            adam.step(&mut [&mut p], &[Tensor::zeros(&[2])], 0.1).unwrap();
            rms.step(&mut [&mut p], &[Tensor::zeros(&[2])], 0.1).unwrap();
        }
        assert_eq!(p.data(), &[0.3, -0.2]);
        assert_eq!(adam.step, 10);
    }

    #[test]
    fn rmsprop_accumulator_recurrence() {
        // acc_n = (1 − ρⁿ)·g², monotone towards g²
        let g = 0.5f64;
        let mut p = Tensor::from_vec(vec![0.0]);
        let mut s = RmsPropState::<f64>::new(&[&[1]]);
        let mut prev = 0.0;
        for n in 1..=50 {
            s.step(&mut [&mut p], &[Tensor::from_vec(vec![g])], 1e-3).unwrap();
            let acc = s.accum[0].data()[0];
            let closed = (1.0 - 0.9f64.powi(n)) * g * g;
            assert!((acc - closed).abs() < 1e-14);
            assert!(acc > prev);
            prev = acc;
        }
    }

    #[test]
    fn rmsprop_steady_state_step() {
        // at the fixed point acc = g², so the step tends to lr·g/(|g| + ε)
        let (g, lr) = (-2.0f64, 1e-3);
        let mut p = Tensor::from_vec(vec![0.0]);
        let mut s = RmsPropState::<f64>::new(&[&[1]]);
        let mut last = 0.0;
        for _ in 0..400 {
            let before = p.data()[0];
            s.step(&mut [&mut p], &[Tensor::from_vec(vec![g])], lr).unwrap();
            last = p.data()[0] - before;
        }
        let steady = -lr * g / (g.abs() + 1e-8);
        assert!((last - steady).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Tensor::from_vec(vec![0.0f32, 1.0]);
        let mut s = AdamState::<f32>::new(&[&[2]]);
        assert!(s.step(&mut [&mut p], &[Tensor::zeros(&[3])], 0.1).is_err());
    }
}
