use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Settings;
use super::manifest::ManifestBuilder;
use super::{DataArgs, ExperimentArgs, GradcheckArgs, SegmentArgs, SynthArgs, TrainArgs, EXIT_NUMERICAL, EXIT_OK};
use crate::checkpoint::encode_checkpoint;
use crate::data::{write_synth_corpus, Corpus, SynthCorpusConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    cv_table_csv, run_cv, run_repetition, segment_corpus, sweep_depth as run_sweep_depth, sweep_segment_lengths,
    sweep_table_csv, sweep_tidy_csv, write_segment_cache, CorpusStore, ExperimentConfig, SegmentCache, SegmentStats,
    SegmentStore,
};
use crate::fsutil::write_atomic;
use crate::gradcheck::{grad_check, GradCheckOptions};
use crate::model::{CnnConfig, LstmConfig, Model, ModelConfig, ModelSpec};
use crate::numerics::{SeededRng, Tensor};
use crate::training::history_csv;

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn to_json<S: Serialize>(v: &S) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| Error::Format {
        kind: "json",
        reason: e.to_string(),
    })?;
    out.push(b'\n');
    Ok(out)
}

/// Config file first, then command-line values.
fn data_settings(d: &DataArgs) -> Result<Settings> {
    let mut s = match &d.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    // path flags are relative to the working directory, not the config file
    for (key, v) in [("cache", &d.cache), ("data_dir", &d.data_dir), ("summary_dir", &d.summary_dir)] {
        if let Some(p) = v {
            s.set(key, absolute(p).to_string_lossy())?;
        }
    }
    if let Some(seed) = d.seed {
        s.set("seed", seed.to_string())?;
    }
    for pair in &d.set {
        s.set_pair(pair)?;
    }
    Ok(s)
}

enum Source {
    Cache(PathBuf, SegmentCache),
    Corpus(Corpus),
}

impl Source {
    fn open(s: &Settings) -> Result<Self> {
        if let Some(p) = s.path("cache") {
            let cache = SegmentCache::read(&p)?;
            if cache.segments.is_empty() {
                return Err(Error::NoData(format!("{} holds no segments", p.display())));
            }
            return Ok(Source::Cache(p, cache));
        }
        let Some(dir) = s.path("data_dir") else {
            return Err(Error::config("set `cache` or `data_dir` (config file or flag)"));
        };
        let corpus = Corpus::scan(&dir, s.path("summary_dir").as_deref(), &s.channels()?)?;
        for (file, why) in &corpus.skipped {
            eprintln!("skipped {file}: {why}");
        }
        if corpus.records.is_empty() {
            return Err(Error::NoData(format!("no usable recordings under {}", dir.display())));
        }
        Ok(Source::Corpus(corpus))
    }

    fn channels(&self) -> usize {
        match self {
            Source::Cache(_, c) => c.channels.len(),
            Source::Corpus(c) => c.channels.len(),
        }
    }

    fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Source::Cache(p, _) => vec![p.clone()],
            Source::Corpus(c) => c.summaries.iter().cloned().chain(c.records.iter().map(|r| r.path.clone())).collect(),
        }
    }

    /// Effective configuration. A cache fixes the segment length.
    fn experiment(&self, s: &Settings) -> Result<ExperimentConfig> {
        let mut cfg = s.experiment(self.channels())?;
        if let Source::Cache(p, c) = self {
            let secs = c.segments[0].length_samples as f64 / c.sample_rate;
            if s.get("segment_seconds").is_some() && (cfg.segment_seconds - secs).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "segment_seconds = {} but {} was cut at {secs} s",
                    cfg.segment_seconds,
                    p.display()
                )));
            }
            cfg.segment_seconds = secs;
        }
        Ok(cfg)
    }

    fn with_store<R>(&self, segment_seconds: f64, f: impl FnOnce(&dyn SegmentStore) -> Result<R>) -> Result<R> {
        match self {
            Source::Cache(_, c) => f(c),
            Source::Corpus(c) => f(&CorpusStore::new(c, segment_corpus(c, segment_seconds)?)),
        }
    }
}

fn echo(m: &mut ManifestBuilder, s: &Settings, cfg: &ExperimentConfig) {
    m.config("settings", s.entries()).config("experiment", cfg).seed(cfg.seed);
    if let Some(p) = s.path("cache") {
        m.config("cache", p);
    }
    if let Some(p) = s.path("data_dir") {
        m.config("data_dir", p);
    }
}

fn write_output(m: &mut ManifestBuilder, path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes)?;
    m.output(path);
    Ok(())
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.3}{unit}"))
}

pub(super) fn segment(a: SegmentArgs, argv: Vec<String>) -> Result<i32> {
    let mut s = Settings::default();
    if let Some(p) = &a.channels_file {
        s.set("channels_file", absolute(p).to_string_lossy())?;
    }
    let channels = s.channels()?;
    let corpus = Corpus::scan(&a.data_dir, a.summary_dir.as_deref(), &channels)?;
    for (file, why) in &corpus.skipped {
        eprintln!("skipped {file}: {why}");
    }
    let segments = segment_corpus(&corpus, a.seconds)?;
    let stats = SegmentStats::of(&segments);
    println!("recordings          {}", corpus.records.len());
    println!("seizure segments    {}", stats.seizure);
    println!("non-seizure         {}", stats.non_seizure);
    println!("mean seizure length {}", fmt_opt(stats.mean_seizure_seconds, " s"));
    println!("fraction < 7 s      {}", fmt_opt(stats.fraction_below_7s, ""));
    println!("fraction > 10 s     {}", fmt_opt(stats.fraction_above_10s, ""));
    println!("fraction > 17 s     {}", fmt_opt(stats.fraction_above_17s, ""));
    if stats.seizure == 0 {
        return Err(Error::NoData(format!("no seizure segments at {} s", a.seconds)));
    }
    let Some(out) = &a.out else {
        return Ok(EXIT_OK);
    };
    let mut m = ManifestBuilder::new("segment", argv);
    m.config("data_dir", absolute(&a.data_dir))
        .config("summary_dir", a.summary_dir.as_deref().map(absolute))
        .config("segment_seconds", a.seconds)
        .config("decimation", a.decimate)
        .config("channels", &channels);
    for p in Source::Corpus(corpus.clone()).inputs() {
        m.input(p);
    }
    write_segment_cache(out, &CorpusStore::new(&corpus, segments), a.decimate, 256)?;
    m.output(out);
    write_output(&mut m, &sibling(out, ".stats.json"), &to_json(&stats)?)?;
    m.write(&sibling(out, ".manifest.json"))?;
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}

pub(super) fn train(a: TrainArgs, argv: Vec<String>) -> Result<i32> {
    let mut s = data_settings(&a.data)?;
    let flags = [
        ("model", a.model.clone()),
        ("depth", a.depth.map(|v| v.to_string())),
        ("learning_rate", a.lr.map(|v| v.to_string())),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("batch_size", a.batch.map(|v| v.to_string())),
        ("decimation", a.decimation.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.set(k, v)?;
        }
    }
    let src = Source::open(&s)?;
    let cfg = src.experiment(&s)?;
    let mut m = ManifestBuilder::new("train", argv);
    echo(&mut m, &s, &cfg);
    for p in src.inputs() {
        m.input(p);
    }
    if let Some(p) = &a.data.config {
        m.input(p);
    }
    let run = src.with_store(cfg.segment_seconds, |store| run_repetition(&cfg, store, 0))?;
    write_output(&mut m, &a.out, &encode_checkpoint(&run.model, &run.preprocess)?)?;
    write_output(&mut m, &sibling(&a.out, ".history.csv"), history_csv(&run.history).as_bytes())?;
    write_output(&mut m, &sibling(&a.out, ".metrics.json"), &to_json(&run.result)?)?;
    m.write(&sibling(&a.out, ".manifest.json"))?;
    let r = &run.result.report;
    println!(
        "epoch {} selected; test accuracy {:.4}, sensitivity {}, specificity {}",
        run.result.selected_epoch,
        r.accuracy,
        fmt_opt(r.sensitivity, ""),
        fmt_opt(r.specificity, "")
    );
    Ok(EXIT_OK)
}

fn experiment_setup(a: &ExperimentArgs, command: &str, argv: Vec<String>) -> Result<(Settings, Source, ExperimentConfig, ManifestBuilder)> {
    let mut s = data_settings(&a.data)?;
    if let Some(r) = a.repetitions {
        s.set("repetitions", r.to_string())?;
    }
    let src = Source::open(&s)?;
    let cfg = src.experiment(&s)?;
    let mut m = ManifestBuilder::new(command, argv);
    echo(&mut m, &s, &cfg);
    for p in src.inputs() {
        m.input(p);
    }
    if let Some(p) = &a.data.config {
        m.input(p);
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    Ok((s, src, cfg, m))
}

pub(super) fn cv(a: ExperimentArgs, argv: Vec<String>) -> Result<i32> {
    let (_, src, cfg, mut m) = experiment_setup(&a, "cv", argv)?;
    let result = src.with_store(cfg.segment_seconds, |store| run_cv(&cfg, store))?;
    let table = cv_table_csv(&result);
    write_output(&mut m, &a.out.join("cv.csv"), table.as_bytes())?;
    write_output(&mut m, &a.out.join("cv.json"), &to_json(&result)?)?;
    m.write(&a.out.join("manifest.json"))?;
    print!("{table}");
    Ok(EXIT_OK)
}

pub(super) fn sweep_length(a: ExperimentArgs, argv: Vec<String>) -> Result<i32> {
    let (s, src, cfg, mut m) = experiment_setup(&a, "sweep-length", argv)?;
    let Source::Corpus(corpus) = &src else {
        return Err(Error::config("the length sweep re-segments the recordings; set `data_dir` instead of `cache`"));
    };
    let lengths = s.lengths()?;
    let overrides = s.overrides()?;
    m.config("lengths", &lengths).config("overrides", &overrides);
    let results = sweep_segment_lengths(&lengths, &cfg, corpus, &overrides)?;
    let table = sweep_table_csv(&results);
    write_output(&mut m, &a.out.join("sweep_length.csv"), table.as_bytes())?;
    write_output(&mut m, &a.out.join("sweep_length_tidy.csv"), sweep_tidy_csv(&results).as_bytes())?;
    write_output(&mut m, &a.out.join("sweep_length.json"), &to_json(&results)?)?;
    m.write(&a.out.join("manifest.json"))?;
    print!("{table}");
    Ok(EXIT_OK)
}

pub(super) fn sweep_depth(a: ExperimentArgs, argv: Vec<String>) -> Result<i32> {
    let (s, src, cfg, mut m) = experiment_setup(&a, "sweep-depth", argv)?;
    let depths = s.depths()?;
    let overrides = s.overrides()?;
    m.config("depths", &depths).config("overrides", &overrides);
    let results = src.with_store(cfg.segment_seconds, |store| run_sweep_depth(&depths, &cfg, store, &overrides))?;
    let table = sweep_table_csv(&results);
    write_output(&mut m, &a.out.join("sweep_depth.csv"), table.as_bytes())?;
    write_output(&mut m, &a.out.join("sweep_depth_tidy.csv"), sweep_tidy_csv(&results).as_bytes())?;
    write_output(&mut m, &a.out.join("sweep_depth.json"), &to_json(&results)?)?;
    m.write(&a.out.join("manifest.json"))?;
    print!("{table}");
    Ok(EXIT_OK)
}

/// Small fixed shapes for the finite-difference check: T = 8, B = 3, 4 channels.
pub fn gradcheck_spec(model: &str, depth: usize) -> Result<ModelSpec> {
    Ok(match model {
        "indrnn" => {
            let mut c = ModelConfig::with_depth(depth);
            c.block_hidden_sizes = (0..depth).map(|i| [5, 4, 6][i % 3]).collect();
            c.input_channels = 4;
            c.fc1_hidden = 6;
            c.validate()?;
            ModelSpec::IndRnn(c)
        }
        "lstm" => ModelSpec::Lstm(LstmConfig {
            input_channels: 4,
            hidden: 5,
            dense: 4,
            num_classes: 2,
        }),
        "cnn" => ModelSpec::Cnn(CnnConfig {
            input_channels: 4,
            conv_channels: vec![3, 4],
            fc_hidden: vec![5],
            ..CnnConfig::default()
        }),
        other => return Err(Error::config(format!("unknown model `{other}`"))),
    })
}

pub(super) fn gradcheck(a: GradcheckArgs) -> Result<i32> {
    let spec = gradcheck_spec(&a.model, a.depth)?;
    let rng = SeededRng::new(a.seed);
    let model = Model::<f64>::build(&spec, &mut rng.derive_named("init"))?;
    let mut data = rng.derive_named("input");
    let x = Tensor::from_fn(&[8, 3, 4], |_| data.normal());
    let labels = [0, 1, 1];
    let opts = GradCheckOptions {
        corrupt: a.corrupt,
        ..GradCheckOptions::default()
    };
    let report = grad_check(&model, &x, &labels, &opts)?;
    print!("{report}");
    println!(
        "{}: max relative error {:.3e} (tolerance {:.0e})",
        if report.passed() { "PASS" } else { "FAIL" },
        report.max_rel_error(),
        opts.tolerance
    );
    Ok(if report.passed() { EXIT_OK } else { EXIT_NUMERICAL })
}

pub(super) fn synth(a: SynthArgs, argv: Vec<String>) -> Result<i32> {
    let cfg = SynthCorpusConfig {
        seed: a.seed,
        cases: a.cases,
        files_per_case: a.files_per_case,
        duration_seconds: a.duration,
        seizures_per_case: a.seizures_per_case,
        seizure_seconds: (a.min_seizure_seconds, a.max_seizure_seconds),
        ..SynthCorpusConfig::default()
    };
    let mut m = ManifestBuilder::new("synth", argv);
    m.seed(a.seed)
        .config("cases", a.cases)
        .config("files_per_case", a.files_per_case)
        .config("duration_seconds", a.duration)
        .config("seizures_per_case", a.seizures_per_case)
        .config("seizure_seconds", cfg.seizure_seconds)
        .config("channels", &cfg.channels)
        .config("signal", &cfg.signal);
    let written = write_synth_corpus(&a.out, &cfg)?;
    for p in &written {
        m.output(p);
    }
    m.write(&a.out.join("manifest.json"))?;
    println!("wrote {} files under {}", written.len(), a.out.display());
    Ok(EXIT_OK)
}
