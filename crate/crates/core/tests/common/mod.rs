#![allow(dead_code)]

use indrnn_eeg::data::{EdfFile, EdfHeader, SignalSpec};
use indrnn_eeg::experiments::{Label, MetricsReport, Segment};
use indrnn_eeg::gradcheck::{grad_check, grad_check_layer, GradCheckOptions, GradCheckReport};
use indrnn_eeg::layers::{
    AvgPoolTime, BatchNormState, Conv1dParams, FullyConnectedParams, IndRnnLayerParams, Layer, LstmParams,
    MaxPoolTime, Mode,
};
use indrnn_eeg::model::{CnnConfig, LstmConfig, Model, ModelConfig, ModelSpec};
use indrnn_eeg::numerics::{Activation, SeededRng, Tensor};

// ---------------------------------------------------------------- gradients

fn dim(rng: &mut SeededRng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

fn input(rng: &mut SeededRng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.normal())
}

fn jitter(t: &mut Tensor<f64>, rng: &mut SeededRng, lo: f64, hi: f64) {
    for v in t.data_mut() {
        *v = rng.uniform(lo, hi);
    }
}

/// Every layer and model check for one seed. Shapes: T ≤ 8, B ≤ 3, widths ≤ 6.
pub fn gradient_suite(seed: u64) -> Vec<(String, GradCheckReport)> {
    let opts = GradCheckOptions::default();
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::new();
    let t = dim(&mut rng, 2, 8);
    let b = dim(&mut rng, 1, 3);
    let c = dim(&mut rng, 1, 6);
    let h = dim(&mut rng, 1, 6);
    let mut check = |name: &str, layer: Layer<f64>, x: Tensor<f64>, mode: Mode, rng: &mut SeededRng| {
        let report = grad_check_layer(&layer, &x, mode, rng, &opts).expect(name);
        out.push((format!("{name} seed={seed}"), report));
    };

    let mut ind = IndRnnLayerParams::<f64>::init(&mut rng, c, h, 1.0).unwrap();
    jitter(&mut ind.bias, &mut rng, -0.5, 0.5);
    let x = input(&mut rng, &[t, b, c]);
    check("indrnn", Layer::IndRnn(ind), x, Mode::Train, &mut rng);

    let mut bn = BatchNormState::<f64>::new(h);
    jitter(&mut bn.gain, &mut rng, 0.5, 1.5);
    jitter(&mut bn.shift, &mut rng, -0.5, 0.5);
    let x = input(&mut rng, &[t, b, h]);
    check("batchnorm.train", Layer::BatchNorm(bn.clone()), x.clone(), Mode::Train, &mut rng);
    let mean = Tensor::from_fn(&[h], |_| rng.uniform(-0.5, 0.5));
    let var = Tensor::from_fn(&[h], |_| rng.uniform(0.5, 2.0));
    bn.load_running_stats(mean, var).unwrap();
    bn.stats_ready = true;
    check("batchnorm.eval", Layer::BatchNorm(bn), x, Mode::Eval, &mut rng);

    let x = input(&mut rng, &[t, b, c]);
    check("maxpool", Layer::MaxPool(MaxPoolTime::new(2, 2).unwrap()), x.clone(), Mode::Train, &mut rng);
    check("avgpool", Layer::AvgPool(AvgPoolTime), x.clone(), Mode::Train, &mut rng);

    let fc = FullyConnectedParams::<f64>::init(&mut rng, c, h, Activation::Relu).unwrap();
    check("fc.relu.timed", Layer::Dense(fc), x.clone(), Mode::Train, &mut rng);
    let mut fc = FullyConnectedParams::<f64>::init(&mut rng, c, h, Activation::Identity).unwrap();
    jitter(&mut fc.bias, &mut rng, -0.5, 0.5);
    check("fc.identity", Layer::Dense(fc), input(&mut rng, &[b, c]), Mode::Train, &mut rng);

    let lstm = LstmParams::<f64>::init(&mut rng, c, h).unwrap();
    check("lstm", Layer::Lstm(lstm), x.clone(), Mode::Train, &mut rng);

    let k = [1, 3, 5][rng.below(3)];
    let conv = Conv1dParams::<f64>::init(&mut rng, c, h, k, Activation::LeakyRelu(0.01)).unwrap();
    check("conv1d", Layer::Conv1d(conv), x, Mode::Train, &mut rng);

    // whole models through softmax cross-entropy; B ≥ 2 keeps every batch norm at ≥ 2 rows
    let bm = dim(&mut rng, 2, 3);
    let tm = dim(&mut rng, 4, 8);
    let labels: Vec<usize> = (0..bm).map(|i| i % 2).collect();
    let mut specs = Vec::new();
    for depth in 1..=3 {
        let mut m = ModelConfig::with_depth(depth);
        m.block_hidden_sizes = (0..depth).map(|_| dim(&mut rng, 2, 6)).collect();
        m.input_channels = c;
        m.fc1_hidden = dim(&mut rng, 2, 6);
        specs.push(ModelSpec::IndRnn(m));
    }
    specs.push(ModelSpec::Lstm(LstmConfig {
        input_channels: c,
        hidden: h,
        dense: dim(&mut rng, 2, 6),
        num_classes: 2,
    }));
    specs.push(ModelSpec::Cnn(CnnConfig {
        input_channels: c,
        conv_channels: vec![dim(&mut rng, 2, 6), dim(&mut rng, 2, 6)],
        fc_hidden: vec![dim(&mut rng, 2, 6)],
        ..CnnConfig::default()
    }));
    for spec in specs {
        let name = match &spec {
            ModelSpec::IndRnn(m) => format!("model.indrnn.depth{}", m.depth()),
            s => format!("model.{}", s.kind_name()),
        };
        let model = Model::<f64>::build(&spec, &mut rng).unwrap();
        let x = input(&mut rng, &[tm, bm, c]);
        let report = grad_check(&model, &x, &labels, &opts).expect(&name);
        out.push((format!("{name} seed={seed}"), report));
    }
    out
}

// ---------------------------------------------------------------- segmentation

/// Sample-by-sample reference: `(start, label, seizure samples)` per window.
/// Intervals are in samples, half-open.
pub fn brute_force_windows(total: usize, len: usize, intervals: &[(usize, usize)]) -> Vec<(usize, Label, usize)> {
    let mut ictal = vec![false; total];
    for &(a, b) in intervals {
        for s in &mut ictal[a..b] {
            *s = true;
        }
    }
    let window = |start: usize| {
        let n = ictal[start..start + len].iter().filter(|&&x| x).count();
        (start, if n > 0 { Label::Seizure } else { Label::NonSeizure }, n)
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start + len <= total {
        out.push(window(start));
        start += len;
    }
    if start < total && len <= total && ictal[start..].iter().any(|&x| x) {
        out.push(window(total - len));
    }
    out
}

/// Random sorted, disjoint, non-empty sample intervals within `[0, total)`.
pub fn random_intervals(rng: &mut SeededRng, total: usize, max_count: usize) -> Vec<(usize, usize)> {
    let count = rng.below(max_count + 1);
    let mut cuts: Vec<usize> = (0..2 * count).map(|_| rng.below(total + 1)).collect();
    cuts.sort_unstable();
    cuts.chunks(2).filter(|p| p[0] < p[1]).map(|p| (p[0], p[1])).collect()
}

pub fn segment_spans(segs: &[Segment]) -> Vec<(usize, Label)> {
    segs.iter().map(|s| (s.start_sample, s.label)).collect()
}

// ---------------------------------------------------------------- EDF

fn ascii(rng: &mut SeededRng, max: usize) -> String {
    const CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_.+";
    let n = rng.below(max + 1);
    let mut s: String = (0..n).map(|_| CHARS[rng.below(CHARS.len())] as char).collect();
    // interior spaces are legal; leading and trailing ones are padding
    if n > 2 && rng.below(2) == 0 {
        s.replace_range(n / 2..n / 2 + 1, " ");
    }
    s
}

pub fn random_edf(rng: &mut SeededRng) -> EdfFile {
    let ns = 1 + rng.below(5);
    let num_records = 1 + rng.below(4);
    let signals: Vec<SignalSpec> = (0..ns)
        .map(|_| {
            let dmin = -(rng.below(32768) as i32) - 1;
            let dmax = dmin + 1 + rng.below((32767 - dmin) as usize) as i32;
            // whole tenths so both bounds print within the 8-byte fields
            let lo = rng.below(200_000) as i64 - 100_000;
            let hi = (lo + 1 + rng.below(50_000) as i64).min(999_999);
            let (pmin, pmax) = (lo as f64 / 10.0, hi as f64 / 10.0);
            SignalSpec {
                label: ascii(rng, 16),
                transducer: ascii(rng, 80),
                physical_dimension: ascii(rng, 8),
                physical_min: pmin,
                physical_max: pmax,
                digital_min: dmin,
                digital_max: dmax,
                prefiltering: ascii(rng, 80),
                samples_per_record: 1 + rng.below(16),
                reserved: ascii(rng, 32),
            }
        })
        .collect();
    let samples = signals
        .iter()
        .map(|s| {
            (0..s.samples_per_record * num_records)
                .map(|_| (s.digital_min + rng.below((s.digital_max - s.digital_min + 1) as usize) as i32) as i16)
                .collect()
        })
        .collect();
    EdfFile {
        header: EdfHeader {
            version: "0".into(),
            patient_id: ascii(rng, 80),
            recording_id: ascii(rng, 80),
            start_date: format!("{:02}.{:02}.{:02}", 1 + rng.below(28), 1 + rng.below(12), rng.below(100)),
            start_time: format!("{:02}.{:02}.{:02}", rng.below(24), rng.below(60), rng.below(60)),
            header_bytes: 256 * (ns + 1),
            reserved: ascii(rng, 44),
            num_records,
            record_duration: [1.0, 0.5, 2.0, 0.25][rng.below(4)],
            signals,
        },
        samples,
    }
}

// ---------------------------------------------------------------- reference tables

/// Per-repetition rows `(sens, spec, F1, prec, acc)` followed by the printed
/// `Ave.` and `Std.` rows, for the IndRNN, LSTM and CNN cross-validations.
pub struct ReferenceTable {
    pub name: &'static str,
    pub rows: [[f64; 5]; 10],
    pub ave: [f64; 5],
    pub std: [f64; 5],
}

pub const TABLES: [ReferenceTable; 3] = [
    ReferenceTable {
        name: "indrnn",
        rows: [
            [0.9100, 0.8300, 0.8750, 0.8426, 0.8700],
            [0.8900, 0.9000, 0.8945, 0.8990, 0.8950],
            [0.9300, 0.8600, 0.8986, 0.8692, 0.8950],
            [0.7900, 0.8500, 0.8144, 0.8404, 0.8200],
            [0.8400, 0.8900, 0.8615, 0.8842, 0.8650],
            [0.8500, 0.8600, 0.8543, 0.8586, 0.8550],
            [0.8700, 0.8500, 0.8614, 0.8529, 0.8600],
            [0.8700, 0.9500, 0.9062, 0.9457, 0.9100],
            [0.9000, 0.7300, 0.8295, 0.7692, 0.8150],
            [0.8800, 0.9500, 0.9119, 0.9462, 0.9150],
        ],
        ave: [0.8730, 0.8670, 0.8707, 0.8708, 0.8700],
        std: [0.0377, 0.0602, 0.0310, 0.0498, 0.0328],
    },
    ReferenceTable {
        name: "lstm",
        rows: [
            [0.8500, 0.8800, 0.8629, 0.8763, 0.8650],
            [0.7700, 0.8500, 0.8021, 0.8370, 0.8100],
            [0.7900, 0.8700, 0.8229, 0.8587, 0.8300],
            [0.7100, 0.9300, 0.7978, 0.9103, 0.8200],
            [0.8200, 0.8900, 0.8497, 0.8817, 0.8550],
            [0.9100, 0.7900, 0.8585, 0.8125, 0.8500],
            [0.8600, 0.8300, 0.8473, 0.8350, 0.8450],
            [0.8600, 0.8400, 0.8515, 0.8431, 0.8500],
            [0.9400, 0.7200, 0.8468, 0.7705, 0.8300],
            [0.9300, 0.8300, 0.8857, 0.8455, 0.8800],
        ],
        ave: [0.8440, 0.8430, 0.8425, 0.8470, 0.8435],
        std: [0.0696, 0.0550, 0.0259, 0.0368, 0.0201],
    },
    ReferenceTable {
        name: "cnn",
        rows: [
            [0.8400, 0.8500, 0.8442, 0.8485, 0.8450],
            [0.9200, 0.7700, 0.8558, 0.8000, 0.8450],
            [0.8000, 0.8400, 0.8163, 0.8333, 0.8200],
            [0.9000, 0.6900, 0.8145, 0.7438, 0.7950],
            [0.9200, 0.8000, 0.8679, 0.8214, 0.8600],
            [0.7900, 0.8500, 0.8144, 0.8404, 0.8200],
            [0.6300, 0.9700, 0.7590, 0.9545, 0.8000],
            [0.8500, 0.8700, 0.8586, 0.8673, 0.8600],
            [0.8700, 0.7700, 0.8286, 0.7909, 0.8200],
            [0.9600, 0.6900, 0.8458, 0.7559, 0.8250],
        ],
        ave: [0.8480, 0.8100, 0.8305, 0.8256, 0.8290],
        std: [0.0891, 0.0809, 0.0301, 0.0571, 0.0217],
    },
];

/// A report carrying the printed values (counts are not needed by `aggregate`).
pub fn report_from_row(row: &[f64; 5]) -> MetricsReport {
    MetricsReport {
        counts: Default::default(),
        sensitivity: Some(row[0]),
        specificity: Some(row[1]),
        f1: Some(row[2]),
        precision: Some(row[3]),
        accuracy: row[4],
    }
}

/// Counts behind a row of a 100 + 100 test set: `(tp, fp, tn, fn)`.
pub fn counts_from_row(row: &[f64; 5]) -> (u64, u64, u64, u64) {
    let tp = (row[0] * 100.0).round() as u64;
    let tn = (row[1] * 100.0).round() as u64;
    (tp, 100 - tn, tn, 100 - tp)
}

pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}
