//! Central finite-difference verification of the hand-written backward passes.

use std::fmt;

use crate::error::Result;
use crate::layers::{Layer, Mode};
use crate::model::Model;
use crate::numerics::{softmax_cross_entropy, SeededRng, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor for the relative error, so gradients that are
    /// zero up to rounding noise do not blow up the ratio.
    pub abs_floor: f64,
    /// Scale analytic gradients by `1 + corrupt` before comparing (negative control).
    pub corrupt: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockCheck {
    pub name: String,
    pub elements: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(
                f,
                "{:<6} {:<40} n={:<6} max_rel={:.3e}",
                if b.passed { "PASS" } else { "FAIL" },
                b.name,
                b.elements,
                b.max_rel_error
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn compare(
    name: String,
    analytic: &Tensor<f64>,
    numeric: &[f64],
    opts: &GradCheckOptions,
) -> BlockCheck {
    let scale = 1.0 + opts.corrupt.unwrap_or(0.0);
    let (mut worst, mut worst_index) = (0.0f64, 0);
    for (i, (&a, &n)) in analytic.data().iter().zip(numeric).enumerate() {
        let e = relative_error(a * scale, n, opts.abs_floor);
        if e > worst || e.is_nan() {
            worst = if e.is_nan() { f64::INFINITY } else { e };
            worst_index = i;
        }
    }
    BlockCheck {
        name,
        elements: analytic.len(),
        max_rel_error: worst,
        worst_index,
        passed: worst < opts.tolerance,
    }
}

/// Checks every trainable scalar of `model` against the mean cross-entropy
/// of `labels`. Batch norm runs in train mode.
pub fn grad_check(
    model: &Model<f64>,
    input: &Tensor<f64>,
    labels: &[usize],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (logits, cache) = model.forward(input, Mode::Train)?;
    let (_, dlogits) = softmax_cross_entropy(&logits, labels)?;
    let analytic = model.backward(&cache, &dlogits)?;
    let names: Vec<String> = model.param_blocks().into_iter().map(|(n, _)| n).collect();

    let mut probe = model.clone();
    let mut blocks = Vec::with_capacity(names.len());
    for (bi, name) in names.into_iter().enumerate() {
        let len = analytic[bi].len();
        let mut numeric = Vec::with_capacity(len);
        for i in 0..len {
            let orig = probe.params_mut()[bi].data()[i];
            let mut eval = |delta: f64| -> Result<f64> {
                probe.params_mut()[bi].data_mut()[i] = orig + delta;
                let (l, _) = probe.forward(input, Mode::Train)?;
                Ok(softmax_cross_entropy(&l, labels)?.0)
            };
            let plus = eval(opts.step)?;
            let minus = eval(-opts.step)?;
            probe.params_mut()[bi].data_mut()[i] = orig;
            numeric.push((plus - minus) / (2.0 * opts.step));
        }
        blocks.push(compare(name, &analytic[bi], &numeric, opts));
    }
    Ok(GradCheckReport { blocks })
}

/// Checks one layer's parameter and input gradients under the loss
/// `Σ r ⊙ layer(x)` for a fixed random projection `r`.
pub fn grad_check_layer(
    layer: &Layer<f64>,
    input: &Tensor<f64>,
    mode: Mode,
    rng: &mut SeededRng,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (y, cache) = layer.forward(input, mode)?;
    let proj = Tensor::from_fn(y.shape(), |_| rng.uniform(-1.0, 1.0));
    let (grad_in, grads) = layer.backward(&cache, &proj)?;
    let project = |out: &Tensor<f64>| -> f64 {
        out.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum()
    };
    let names: Vec<&'static str> = layer.params().into_iter().map(|(n, _)| n).collect();

    let mut probe = layer.clone();
    let mut blocks = Vec::new();
    for (bi, name) in names.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grads[bi].len());
        for i in 0..grads[bi].len() {
            let orig = probe.params_mut()[bi].data()[i];
            let mut eval = |delta: f64| -> Result<f64> {
                probe.params_mut()[bi].data_mut()[i] = orig + delta;
                Ok(project(&probe.forward(input, mode)?.0))
            };
            let plus = eval(opts.step)?;
            let minus = eval(-opts.step)?;
            probe.params_mut()[bi].data_mut()[i] = orig;
            numeric.push((plus - minus) / (2.0 * opts.step));
        }
        blocks.push(compare(format!("{}.{name}", layer.kind()), &grads[bi], &numeric, opts));
    }

    let mut x = input.clone();
    let mut numeric = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + opts.step;
        let plus = project(&layer.forward(&x, mode)?.0);
        x.data_mut()[i] = orig - opts.step;
        let minus = project(&layer.forward(&x, mode)?.0);
        x.data_mut()[i] = orig;
        numeric.push((plus - minus) / (2.0 * opts.step));
    }
    blocks.push(compare(format!("{}.input", layer.kind()), &grad_in, &numeric, opts));
    Ok(GradCheckReport { blocks })
}
