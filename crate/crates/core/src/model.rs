//! Model assembly: the stacked IndRNN classifier and the LSTM and CNN
//! baselines, all expressed as a flat list of [`Layer`]s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    AvgPoolTime, BatchNormState, Conv1dParams, FullyConnectedParams, IndRnnLayerParams, Layer,
    LayerCache, LstmParams, MaxPoolTime, Mode,
};
use crate::numerics::{Activation, Scalar, SeededRng, Tensor};

pub const DEFAULT_INPUT_CHANNELS: usize = 17;

/// Hidden sizes for an IndRNN stack of `depth` blocks: five blocks of 128,
/// five of 200, then 250 for the rest.
pub fn default_hidden_sizes(depth: usize) -> Vec<usize> {
    (0..depth)
        .map(|i| match i {
            0..=4 => 128,
            5..=9 => 200,
            _ => 250,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub block_hidden_sizes: Vec<usize>,
    pub pool_window: usize,
    pub pool_stride: usize,
    pub fc1_hidden: usize,
    pub num_classes: usize,
    pub input_channels: usize,
    pub recurrent_clip: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::with_depth(15)
    }
}

impl ModelConfig {
    pub fn with_depth(depth: usize) -> Self {
        Self {
            block_hidden_sizes: default_hidden_sizes(depth),
            pool_window: 2,
            pool_stride: 2,
            fc1_hidden: 100,
            num_classes: 2,
            input_channels: DEFAULT_INPUT_CHANNELS,
            recurrent_clip: 1.0,
        }
    }

    pub fn depth(&self) -> usize {
        self.block_hidden_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_hidden_sizes.is_empty() || self.block_hidden_sizes.contains(&0) {
            return Err(Error::config("block_hidden_sizes must be non-empty and positive"));
        }
        if self.pool_window == 0 || self.pool_stride == 0 {
            return Err(Error::config("pool window and stride must be positive"));
        }
        if self.fc1_hidden == 0 || self.num_classes < 2 || self.input_channels == 0 {
            return Err(Error::config("fc1_hidden, num_classes >= 2 and input_channels required"));
        }
        if !(self.recurrent_clip > 0.0) {
            return Err(Error::config("recurrent_clip must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub input_channels: usize,
    pub hidden: usize,
    pub dense: usize,
    pub num_classes: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            input_channels: DEFAULT_INPUT_CHANNELS,
            hidden: 120,
            dense: 60,
            num_classes: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub input_channels: usize,
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub fc_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub num_classes: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            input_channels: DEFAULT_INPUT_CHANNELS,
            conv_channels: vec![100, 100, 200, 200, 260],
            kernel: 5,
            fc_hidden: vec![100, 50],
            leaky_slope: 0.01,
            num_classes: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    IndRnn(ModelConfig),
    Lstm(LstmConfig),
    Cnn(CnnConfig),
}

impl ModelSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::IndRnn(_) => "indrnn",
            ModelSpec::Lstm(_) => "lstm",
            ModelSpec::Cnn(_) => "cnn",
        }
    }

    pub fn input_channels(&self) -> usize {
        match self {
            ModelSpec::IndRnn(c) => c.input_channels,
            ModelSpec::Lstm(c) => c.input_channels,
            ModelSpec::Cnn(c) => c.input_channels,
        }
    }
}

/// A sequence classifier: `[T, B, C]` in, `[B, classes]` logits out.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    spec: ModelSpec,
    labels: Vec<String>,
    layers: Vec<Layer<T>>,
}

#[derive(Clone, Debug)]
pub struct ModelCache<T> {
    caches: Vec<LayerCache<T>>,
}

/// Gradients aligned with [`Model::param_blocks`].
pub type ModelGrads<T> = Vec<Tensor<T>>;

impl<T: Scalar> Model<T> {
    pub fn build(spec: &ModelSpec, rng: &mut SeededRng) -> Result<Self> {
        match spec {
            ModelSpec::IndRnn(c) => build_indrnn_model(c, rng),
            ModelSpec::Lstm(c) => build_lstm_baseline(c, rng),
            ModelSpec::Cnn(c) => build_cnn_baseline(c, rng),
        }
    }

    pub(crate) fn from_parts(spec: ModelSpec, labels: Vec<String>, layers: Vec<Layer<T>>) -> Self {
        Self { spec, labels, layers }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn layer_labels(&self) -> &[String] {
        &self.labels
    }

    /// `(name, tensor)` for every trainable tensor, e.g. `block2.indrnn.recurrent_weights`.
    pub fn param_blocks(&self) -> Vec<(String, &Tensor<T>)> {
        self.labels
            .iter()
            .zip(&self.layers)
            .flat_map(|(label, layer)| {
                layer
                    .params()
                    .into_iter()
                    .map(move |(name, t)| (format!("{label}.{name}"), t))
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, ModelCache<T>)> {
        x.expect_ndim(3, "model_forward")?;
        if x.shape()[2] != self.spec.input_channels() {
            return Err(Error::ShapeMismatch {
                op: "model_forward",
                left: x.shape().to_vec(),
                right: vec![self.spec.input_channels()],
            });
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let (y, c) = layer.forward(&h, mode)?;
            caches.push(c);
            h = y;
        }
        Ok((h, ModelCache { caches }))
    }

    /// Logits only, eval mode.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(x, Mode::Eval)?.0)
    }

    pub fn backward(&self, cache: &ModelCache<T>, grad_logits: &Tensor<T>) -> Result<ModelGrads<T>> {
        if cache.caches.len() != self.layers.len() {
            return Err(Error::layer("model", "cache does not match model"));
        }
        let mut per_layer: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        let mut g = grad_logits.clone();
        for (layer, c) in self.layers.iter().zip(&cache.caches).rev() {
            let (gin, pg) = layer.backward(c, &g)?;
            per_layer.push(pg);
            g = gin;
        }
        per_layer.reverse();
        Ok(per_layer.into_iter().flatten().collect())
    }

    pub fn commit_running_stats(&mut self, cache: &ModelCache<T>) {
        for (layer, c) in self.layers.iter_mut().zip(&cache.caches) {
            layer.commit_running_stats(c);
        }
    }

    /// Enforce `|u| ≤ recurrent_clip` on every IndRNN layer.
    pub fn clip_recurrent(&mut self) {
        for layer in &mut self.layers {
            if let Layer::IndRnn(p) = layer {
                p.clip_recurrent();
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::IndRnn(p) => Layer::IndRnn(IndRnnLayerParams {
                    input_weights: p.input_weights.cast(),
                    recurrent_weights: p.recurrent_weights.cast(),
                    bias: p.bias.cast(),
                    activation: p.activation,
                    recurrent_clip: p.recurrent_clip,
                }),
                Layer::BatchNorm(p) => Layer::BatchNorm(BatchNormState {
                    gain: p.gain.cast(),
                    shift: p.shift.cast(),
                    running_mean: p.running_mean.cast(),
                    running_var: p.running_var.cast(),
                    eps: p.eps,
                    momentum: p.momentum,
                    stats_ready: p.stats_ready,
                }),
                Layer::MaxPool(p) => Layer::MaxPool(*p),
                Layer::AvgPool(p) => Layer::AvgPool(*p),
                Layer::Dense(p) => Layer::Dense(FullyConnectedParams {
                    weights: p.weights.cast(),
                    bias: p.bias.cast(),
                    activation: p.activation,
                }),
                Layer::Lstm(p) => Layer::Lstm(LstmParams {
                    input_weights: p.input_weights.cast(),
                    recurrent_weights: p.recurrent_weights.cast(),
                    bias: p.bias.cast(),
                }),
                Layer::Conv1d(p) => Layer::Conv1d(Conv1dParams {
                    weights: p.weights.cast(),
                    bias: p.bias.cast(),
                    kernel: p.kernel,
                    activation: p.activation,
                }),
            })
            .collect();
        Model {
            spec: self.spec.clone(),
            labels: self.labels.clone(),
            layers,
        }
    }
}

/// `[IndRNN → BatchNorm → MaxPool] × depth → AvgPool → FC(relu) → FC(logits)`.
pub fn build_indrnn_model<T: Scalar>(config: &ModelConfig, rng: &mut SeededRng) -> Result<Model<T>> {
    config.validate()?;
    let mut layers = Vec::new();
    let mut labels = Vec::new();
    let mut width = config.input_channels;
    let pool = MaxPoolTime::new(config.pool_window, config.pool_stride)?;
    for (i, &hidden) in config.block_hidden_sizes.iter().enumerate() {
        let n = i + 1;
        layers.push(Layer::IndRnn(IndRnnLayerParams::init(
            rng,
            width,
            hidden,
            config.recurrent_clip,
        )?));
        labels.push(format!("block{n}.indrnn"));
        layers.push(Layer::BatchNorm(BatchNormState::new(hidden)));
        labels.push(format!("block{n}.bn"));
        layers.push(Layer::MaxPool(pool));
        labels.push(format!("block{n}.pool"));
        width = hidden;
    }
    layers.push(Layer::AvgPool(AvgPoolTime));
    labels.push("avgpool".into());
    layers.push(Layer::Dense(FullyConnectedParams::init(
        rng,
        width,
        config.fc1_hidden,
        Activation::Relu,
    )?));
    labels.push("fc1".into());
    layers.push(Layer::Dense(FullyConnectedParams::init(
        rng,
        config.fc1_hidden,
        config.num_classes,
        Activation::Identity,
    )?));
    labels.push("fc2".into());
    Ok(Model::from_parts(ModelSpec::IndRnn(config.clone()), labels, layers))
}

/// `LSTM → time-distributed FC(relu) → AvgPool → FC(logits)`.
pub fn build_lstm_baseline<T: Scalar>(config: &LstmConfig, rng: &mut SeededRng) -> Result<Model<T>> {
    if config.hidden == 0 || config.dense == 0 || config.num_classes < 2 {
        return Err(Error::config("lstm baseline sizes must be positive"));
    }
    let layers = vec![
        Layer::Lstm(LstmParams::init(rng, config.input_channels, config.hidden)?),
        Layer::Dense(FullyConnectedParams::init(
            rng,
            config.hidden,
            config.dense,
            Activation::Relu,
        )?),
        Layer::AvgPool(AvgPoolTime),
        Layer::Dense(FullyConnectedParams::init(
            rng,
            config.dense,
            config.num_classes,
            Activation::Identity,
        )?),
    ];
    let labels = ["lstm", "time_dense", "avgpool", "fc"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    Ok(Model::from_parts(ModelSpec::Lstm(config.clone()), labels, layers))
}

/// `[Conv1d → LeakyReLU → MaxPool] × 5 → AvgPool → FC → FC → FC(logits)`.
pub fn build_cnn_baseline<T: Scalar>(config: &CnnConfig, rng: &mut SeededRng) -> Result<Model<T>> {
    if config.conv_channels.is_empty() || config.kernel == 0 || config.num_classes < 2 {
        return Err(Error::config("cnn baseline needs conv layers, kernel > 0, >= 2 classes"));
    }
    let act = Activation::LeakyRelu(config.leaky_slope);
    act.validate()?;
    let mut layers = Vec::new();
    let mut labels = Vec::new();
    let mut width = config.input_channels;
    for (i, &ch) in config.conv_channels.iter().enumerate() {
        layers.push(Layer::Conv1d(Conv1dParams::init(rng, width, ch, config.kernel, act)?));
        labels.push(format!("conv{}", i + 1));
        layers.push(Layer::MaxPool(MaxPoolTime::default()));
        labels.push(format!("pool{}", i + 1));
        width = ch;
    }
    layers.push(Layer::AvgPool(AvgPoolTime));
    labels.push("avgpool".into());
    for (i, &h) in config.fc_hidden.iter().enumerate() {
        layers.push(Layer::Dense(FullyConnectedParams::init(rng, width, h, act)?));
        labels.push(format!("fc{}", i + 1));
        width = h;
    }
    layers.push(Layer::Dense(FullyConnectedParams::init(
        rng,
        width,
        config.num_classes,
        Activation::Identity,
    )?));
    labels.push(format!("fc{}", config.fc_hidden.len() + 1));
    Ok(Model::from_parts(ModelSpec::Cnn(config.clone()), labels, layers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_sizes() {
        let c = ModelConfig::default();
        assert_eq!(c.depth(), 15);
        assert_eq!(&c.block_hidden_sizes[..5], &[128; 5]);
        assert_eq!(&c.block_hidden_sizes[5..10], &[200; 5]);
        assert_eq!(&c.block_hidden_sizes[10..], &[250; 5]);
        assert_eq!((c.pool_window, c.pool_stride, c.fc1_hidden, c.input_channels), (2, 2, 100, 17));
    }

    #[test]
    fn sweep_depths_build() {
        for depth in [6, 9, 12, 15] {
            let m: Model<f32> =
                build_indrnn_model(&ModelConfig::with_depth(depth), &mut SeededRng::new(1)).unwrap();
            assert_eq!(m.layers().len(), depth * 3 + 3);
        }
    }

    #[test]
    fn tiny_model_emits_two_logits() {
        let cfg = ModelConfig {
            block_hidden_sizes: vec![4],
            input_channels: 2,
            ..ModelConfig::default()
        };
        let m: Model<f64> = build_indrnn_model(&cfg, &mut SeededRng::new(0)).unwrap();
        let x = Tensor::from_fn(&[4, 1, 2], |i| i as f64 * 0.1);
        // B = 1 with T = 4 still gives BN 4 samples in the first block
        let (y, _) = m.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
    }

    #[test]
    fn baseline_layouts() {
        let lstm: Model<f32> = build_lstm_baseline(&LstmConfig::default(), &mut SeededRng::new(0)).unwrap();
        match (&lstm.layers()[0], &lstm.layers()[1]) {
            (Layer::Lstm(l), Layer::Dense(d)) => {
                assert_eq!(l.hidden(), 120);
                assert_eq!(d.output_dim(), 60);
            }
            _ => panic!("unexpected lstm layout"),
        }
        let cnn: Model<f32> = build_cnn_baseline(&CnnConfig::default(), &mut SeededRng::new(0)).unwrap();
        let convs: Vec<usize> = cnn
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Conv1d(c) => Some(c.out_channels()),
                _ => None,
            })
            .collect();
        assert_eq!(convs, vec![100, 100, 200, 200, 260]);
        let fcs: Vec<usize> = cnn
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some(d.output_dim()),
                _ => None,
            })
            .collect();
        assert_eq!(fcs, vec![100, 50, 2]);
    }

    #[test]
    fn param_count_of_small_model() {
        let cfg = ModelConfig {
            block_hidden_sizes: vec![3],
            input_channels: 2,
            fc1_hidden: 4,
            ..ModelConfig::default()
        };
        let m: Model<f32> = build_indrnn_model(&cfg, &mut SeededRng::new(0)).unwrap();
        // indrnn 2*3+3+3, bn 3+3, fc1 3*4+4, fc2 4*2+2
        assert_eq!(m.param_count(), 12 + 6 + 16 + 10);
    }
}
