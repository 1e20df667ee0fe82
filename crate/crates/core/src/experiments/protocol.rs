use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{aggregate, Aggregate, MetricsReport, Summary, METRIC_NAMES};
use super::segment::{segment_corpus, Label, Segment};
use super::store::{CorpusStore, SegmentStore};
use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::exec;
use crate::model::{Model, ModelConfig, ModelSpec};
use crate::numerics::SeededRng;
use crate::training::{evaluate, train, EpochRecord, Sample, TrainConfig};

/// All seizure segments plus an equal number of non-seizure segments drawn
/// uniformly without replacement. Returns sorted segment indices.
pub fn build_balanced_dataset(segments: &[Segment], rng: &mut SeededRng) -> Result<Vec<usize>> {
    let (seizure, other): (Vec<usize>, Vec<usize>) =
        (0..segments.len()).partition(|&i| segments[i].label == Label::Seizure);
    if other.len() < seizure.len() {
        return Err(Error::InsufficientSegments {
            needed: seizure.len(),
            available: other.len(),
        });
    }
    let mut out = seizure.clone();
    out.extend(rng.sample_indices(other.len(), seizure.len()).into_iter().map(|k| other[k]));
    out.sort_unstable();
    Ok(out)
}

/// Shuffles, then cuts at `⌊n·a/100⌋` and `⌊n·(a+b)/100⌋`.
pub fn random_split<T: Clone>(items: &[T], ratio: [usize; 3], rng: &mut SeededRng) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if ratio.iter().sum::<usize>() != 100 {
        return Err(Error::config(format!("split ratio {ratio:?} does not sum to 100")));
    }
    let n = items.len();
    if n < 3 {
        return Err(Error::NoData(format!("cannot split {n} items three ways")));
    }
    let mut shuffled = items.to_vec();
    rng.shuffle(&mut shuffled);
    let c1 = n * ratio[0] / 100;
    let c2 = n * (ratio[0] + ratio[1]) / 100;
    let test = shuffled.split_off(c2);
    let val = shuffled.split_off(c1);
    Ok((shuffled, val, test))
}

/// Input preprocessing applied identically at training and inference time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub decimation: usize,
    /// Per-channel mean and standard deviation; empty when z-scoring is off.
    pub channel_mean: Vec<f64>,
    pub channel_std: Vec<f64>,
}

impl Preprocess {
    pub fn identity(decimation: usize) -> Self {
        Self {
            decimation,
            channel_mean: Vec::new(),
            channel_std: Vec::new(),
        }
    }

    /// Fits per-channel statistics over every time step of `samples`.
    pub fn fit(decimation: usize, samples: &[Sample]) -> Result<Self> {
        let ch = samples
            .first()
            .ok_or_else(|| Error::NoData("no samples to fit normalization".into()))?
            .channels;
        let mut sum = vec![0.0f64; ch];
        let mut count = 0usize;
        for s in samples {
            for row in s.values.chunks_exact(ch) {
                for (a, &v) in sum.iter_mut().zip(row) {
                    *a += v as f64;
                }
            }
            count += s.steps;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0f64; ch];
        for s in samples {
            for row in s.values.chunks_exact(ch) {
                for ((a, &v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *a += (v as f64 - m).powi(2);
                }
            }
        }
        let std = sq
            .iter()
            .map(|q| {
                let s = (q / count as f64).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            decimation,
            channel_mean: mean,
            channel_std: std,
        })
    }

    pub fn apply(&self, samples: &mut [Sample]) {
        if self.channel_mean.is_empty() {
            return;
        }
        let ch = self.channel_mean.len();
        for s in samples {
            for row in s.values.chunks_exact_mut(ch) {
                for ((v, m), sd) in row.iter_mut().zip(&self.channel_mean).zip(&self.channel_std) {
                    *v = ((*v as f64 - m) / sd) as f32;
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub segment_seconds: f64,
    pub repetitions: usize,
    pub split: [usize; 3],
    pub seed: u64,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub decimation: usize,
    pub zscore: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            segment_seconds: 23.0,
            repetitions: 10,
            split: [70, 15, 15],
            seed: 0,
            model: ModelSpec::IndRnn(ModelConfig::default()),
            train: TrainConfig::default(),
            decimation: 1,
            zscore: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.split.iter().sum::<usize>() != 100 {
            return Err(Error::config("split ratio must sum to 100"));
        }
        if !(self.segment_seconds > 0.0) {
            return Err(Error::config("segment_seconds must be positive"));
        }
        if self.decimation == 0 {
            return Err(Error::config("decimation must be at least 1"));
        }
        self.train.validate()
    }
}

/// Rebuilds `spec` for a different number of input channels.
pub fn with_input_channels(spec: &ModelSpec, channels: usize) -> ModelSpec {
    let mut s = spec.clone();
    match &mut s {
        ModelSpec::IndRnn(c) => c.input_channels = channels,
        ModelSpec::Lstm(c) => c.input_channels = channels,
        ModelSpec::Cnn(c) => c.input_channels = channels,
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub selected_epoch: usize,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub config: ExperimentConfig,
    pub seizure_segments: usize,
    pub repetitions: Vec<RepetitionResult>,
    pub aggregate: Aggregate,
}

/// Everything one repetition produces, including the trained model.
pub struct RepetitionRun {
    pub result: RepetitionResult,
    pub model: Model<f32>,
    pub preprocess: Preprocess,
    pub history: Vec<EpochRecord>,
}

/// One repetition: balanced draw, split, preprocessing fit, training and test scoring.
pub fn run_repetition(config: &ExperimentConfig, store: &dyn SegmentStore, repetition: usize) -> Result<RepetitionRun> {
    let rep = SeededRng::new(config.seed).derive(repetition as u64);
    let balanced = build_balanced_dataset(store.segments(), &mut rep.derive_named("balance"))?;
    let (tr, va, te) = random_split(&balanced, config.split, &mut rep.derive_named("split"))?;
    let mut train_set = store.fetch(&tr, config.decimation)?;
    let mut val_set = store.fetch(&va, config.decimation)?;
    let mut test_set = store.fetch(&te, config.decimation)?;
    let pre = if config.zscore {
        Preprocess::fit(config.decimation, &train_set)?
    } else {
        Preprocess::identity(config.decimation)
    };
    pre.apply(&mut train_set);
    pre.apply(&mut val_set);
    pre.apply(&mut test_set);

    let spec = with_input_channels(&config.model, store.channels().len());
    let model = Model::<f32>::build(&spec, &mut rep.derive_named("init"))?;
    let tc = TrainConfig {
        seed: rep.derive_named("shuffle").next_u64(),
        ..config.train.clone()
    };
    let outcome = train(model, &train_set, &val_set, &tc)?;
    let report = evaluate(&outcome.model, &test_set, tc.batch_size)?.metrics()?;
    Ok(RepetitionRun {
        result: RepetitionResult {
            repetition: repetition + 1,
            train_size: train_set.len(),
            val_size: val_set.len(),
            test_size: test_set.len(),
            selected_epoch: outcome.selected_epoch,
            report,
        },
        model: outcome.model,
        preprocess: pre,
        history: outcome.history,
    })
}

/// Repeated random sub-sampling validation. Repetitions run in parallel
/// and are reported in index order.
pub fn run_cv(config: &ExperimentConfig, store: &dyn SegmentStore) -> Result<CvResult> {
    config.validate()?;
    let runs = exec::map_range(config.repetitions, |r| {
        run_repetition(config, store, r)
            .map(|run| run.result)
            .map_err(|e| Error::Repetition {
                repetition: r + 1,
                source: Box::new(e),
            })
    });
    let repetitions = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricsReport> = repetitions.iter().map(|r| r.report).collect();
    Ok(CvResult {
        config: config.clone(),
        seizure_segments: store.segments().iter().filter(|s| s.label == Label::Seizure).count(),
        aggregate: aggregate(&reports)?,
        repetitions,
    })
}

/// Training settings for one sweep point; unset fields keep the base config.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisOverride {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
}

impl AxisOverride {
    pub fn apply(&self, train: &mut TrainConfig) {
        if let Some(v) = self.learning_rate {
            train.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            train.epochs = v;
        }
        if let Some(v) = self.batch_size {
            train.batch_size = v;
        }
    }
}

fn override_for(overrides: &[(f64, AxisOverride)], value: f64) -> Option<&AxisOverride> {
    overrides.iter().find(|(v, _)| *v == value).map(|(_, o)| o)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub value: f64,
    pub seizure_segments: usize,
    pub cv: CvResult,
}

/// `run_cv` once per IndRNN depth, in the order given.
pub fn sweep_depth(
    depths: &[usize],
    base: &ExperimentConfig,
    store: &dyn SegmentStore,
    overrides: &[(f64, AxisOverride)],
) -> Result<Vec<SweepResult>> {
    let ModelSpec::IndRnn(mc) = &base.model else {
        return Err(Error::config("depth sweep requires the indrnn model"));
    };
    let mut out = Vec::with_capacity(depths.len());
    for &d in depths {
        let mut cfg = base.clone();
        let mut m = ModelConfig::with_depth(d);
        m.fc1_hidden = mc.fc1_hidden;
        m.pool_window = mc.pool_window;
        m.pool_stride = mc.pool_stride;
        m.recurrent_clip = mc.recurrent_clip;
        cfg.model = ModelSpec::IndRnn(m);
        if let Some(o) = override_for(overrides, d as f64) {
            o.apply(&mut cfg.train);
        }
        log::info!("depth sweep: {d} blocks");
        let cv = run_cv(&cfg, store)?;
        out.push(SweepResult {
            axis: "depth".into(),
            value: d as f64,
            seizure_segments: cv.seizure_segments,
            cv,
        });
    }
    Ok(out)
}

pub const DEFAULT_SWEEP_LENGTHS: [f64; 13] =
    [23.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 70.0, 80.0, 90.0, 100.0, 110.0];
pub const DEFAULT_SWEEP_DEPTHS: [usize; 4] = [6, 9, 12, 15];

/// Re-segments `corpus` at each length, then runs `run_cv`.
pub fn sweep_segment_lengths(
    lengths: &[f64],
    base: &ExperimentConfig,
    corpus: &Corpus,
    overrides: &[(f64, AxisOverride)],
) -> Result<Vec<SweepResult>> {
    let mut out = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut cfg = base.clone();
        cfg.segment_seconds = len;
        if let Some(o) = override_for(overrides, len) {
            o.apply(&mut cfg.train);
        }
        let store = CorpusStore::new(corpus, segment_corpus(corpus, len)?);
        log::info!("length sweep: {len} s");
        let cv = run_cv(&cfg, &store)?;
        out.push(SweepResult {
            axis: "length".into(),
            value: len,
            seizure_segments: cv.seizure_segments,
            cv,
        });
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

fn summary_cell(s: Option<Summary>) -> String {
    s.map_or_else(|| "NA".into(), |s| s.to_string())
}

/// Per-repetition rows followed by `Ave.` and `Std.`, four decimals.
pub fn cv_table_csv(result: &CvResult) -> String {
    let mut s = format!("Item,{}\n", METRIC_NAMES.join(","));
    for r in &result.repetitions {
        let cols: Vec<String> = r.report.columns().iter().map(|&v| cell(v)).collect();
        let _ = writeln!(s, "{},{}", r.repetition, cols.join(","));
    }
    let ave: Vec<String> = result.aggregate.columns.iter().map(|c| cell(c.map(|s| s.mean))).collect();
    let std: Vec<String> = result.aggregate.columns.iter().map(|c| cell(c.map(|s| s.std))).collect();
    let _ = writeln!(s, "Ave.,{}", ave.join(","));
    let _ = writeln!(s, "Std.,{}", std.join(","));
    s
}

fn axis_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// One row per sweep point with `mean±std` cells. Length sweeps carry the
/// seizure-segment count.
pub fn sweep_table_csv(results: &[SweepResult]) -> String {
    let length = results.first().is_some_and(|r| r.axis == "length");
    let mut s = if length {
        format!("Len.,Num. Sei.,{}\n", METRIC_NAMES.join(","))
    } else {
        format!("Layers,{}\n", METRIC_NAMES.join(","))
    };
    for r in results {
        let cols: Vec<String> = r.cv.aggregate.columns.iter().map(|&c| summary_cell(c)).collect();
        if length {
            let _ = writeln!(s, "{}s,{},{}", axis_value(r.value), r.seizure_segments, cols.join(","));
        } else {
            let _ = writeln!(s, "{},{}", axis_value(r.value), cols.join(","));
        }
    }
    s
}

/// Long-format table: one row per sweep point and metric.
pub fn sweep_tidy_csv(results: &[SweepResult]) -> String {
    let axis = results.first().map_or("value", |r| r.axis.as_str());
    let mut s = format!("{axis},metric,mean,std\n");
    for r in results {
        for (name, c) in METRIC_NAMES.iter().zip(&r.cv.aggregate.columns) {
            let (m, sd) = c.map_or(("NA".into(), "NA".into()), |c| (format!("{:.6}", c.mean), format!("{:.6}", c.std)));
            let _ = writeln!(s, "{},{},{m},{sd}", axis_value(r.value), name.to_ascii_lowercase().replace(' ', "_"));
        }
    }
    s
}
