mod common;

use std::collections::BTreeMap;
use std::path::Path;

use common::brute_force_windows;
use indrnn_eeg::cli::{run, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};
use indrnn_eeg::data::{parse_chbmit_summary, parse_edf, place_seizures};
use indrnn_eeg::experiments::{Label, SegmentCache};
use indrnn_eeg::numerics::SeededRng;

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("indrnn-eeg").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &[&str] = &["--cases", "2", "--duration", "600", "--seizures-per-case", "2"];

fn synth(out: &Path, seed: &str) {
    let mut args = vec!["synth", "--seed", seed, "--out", p(out)];
    args.extend_from_slice(SMALL);
    assert_eq!(cli(&args), EXIT_OK);
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for case in std::fs::read_dir(dir).unwrap() {
        let case = case.unwrap().path();
        if case.is_dir() {
            for f in std::fs::read_dir(&case).unwrap() {
                let f = f.unwrap().path();
                let key = f.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&f).unwrap());
            }
        }
    }
    out
}

/// Seizure intervals the generator should have drawn, replayed from the seed.
fn expected_intervals(seed: u64, case: usize) -> Vec<(f64, f64)> {
    let mut layout = SeededRng::new(seed).derive(case as u64).derive_named("layout");
    place_seizures(&mut layout, 600.0, 2, (40, 120)).unwrap()
}

#[test]
fn synth_is_deterministic_and_records_its_intervals() {
    let dir = tempfile::tempdir().unwrap();
    synth(&dir.path().join("a"), "4");
    synth(&dir.path().join("b"), "4");
    synth(&dir.path().join("c"), "5");
    let a = tree(&dir.path().join("a"));
    assert_eq!(a.len(), 4);
    assert_eq!(a, tree(&dir.path().join("b")));
    assert_ne!(a, tree(&dir.path().join("c")));

    for case in 0..2 {
        let id = format!("syn{:02}", case + 1);
        let text = String::from_utf8(a[&format!("{id}/{id}-summary.txt")].clone()).unwrap();
        let ann = parse_chbmit_summary(&text).unwrap();
        assert_eq!(ann.len(), 1);
        assert_eq!(ann[0].file, format!("{id}_01.edf"));
        assert_eq!(ann[0].intervals, expected_intervals(4, case));
        let edf = parse_edf(&a[&format!("{id}/{id}_01.edf")]).unwrap();
        assert_eq!(edf.header.signals.len(), 17);
        assert_eq!(edf.header.num_records, 600);
    }
}

#[test]
fn segment_counts_match_a_brute_force_recount() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, "6");
    let cache = dir.path().join("seg.cache");
    assert_eq!(cli(&["segment", p(&data), "--decimate", "16", "--out", p(&cache)]), EXIT_OK);
    let cache = SegmentCache::read(&cache).unwrap();
    assert_eq!(cache.decimation, 16);
    for case in 0..2 {
        let id = format!("syn{:02}", case + 1);
        let samples: Vec<(usize, usize)> = expected_intervals(6, case)
            .iter()
            .map(|&(a, b)| (a as usize * 256, b as usize * 256))
            .collect();
        let expected: Vec<(usize, Label)> = brute_force_windows(600 * 256, 23 * 256, &samples)
            .into_iter()
            .map(|(s, l, _)| (s, l))
            .collect();
        let got: Vec<(usize, Label)> = cache
            .segments
            .iter()
            .filter(|s| s.case_id == id)
            .map(|s| (s.start_sample, s.label))
            .collect();
        assert_eq!(got, expected, "{id}");
    }
    assert!(dir.path().join("seg.cache.stats.json").exists());
    assert!(dir.path().join("seg.cache.manifest.json").exists());
}

#[test]
fn empty_corpus_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["segment", p(dir.path())]), EXIT_INPUT);
}

#[test]
fn one_epoch_training_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, "2");
    let out = dir.path().join("model.ckpt");
    let code = cli(&[
        "train", "--data-dir", p(&data), "--depth", "1", "--epochs", "1", "--batch", "4",
        "--decimation", "16", "--set", "hidden_sizes=8", "--set", "fc1_hidden=8", "--out", p(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    for suffix in ["", ".history.csv", ".metrics.json", ".manifest.json"] {
        let mut name = out.clone().into_os_string();
        name.push(suffix);
        assert!(Path::new(&name).exists(), "{suffix}");
    }
    let history = std::fs::read_to_string(dir.path().join("model.ckpt.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);
}

#[test]
fn cv_writes_table_json_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, "3");
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "data_dir = data\ndecimation = 16\ndepth = 1\nhidden_sizes = 8\nfc1_hidden = 8\nepochs = 1\nbatch_size = 4\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(cli(&["cv", "--config", p(&conf), "--repetitions", "2", "--out", p(&out)]), EXIT_OK);
    let csv = std::fs::read_to_string(out.join("cv.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "Item,Sensitivity,Specificity,F1 Score,Precision,Accuracy");
    assert_eq!(lines.len(), 5);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "cv");
    assert_eq!(manifest["config"]["experiment"]["repetitions"], 2);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["path"].as_str().unwrap())
        .collect();
    assert!(outputs.iter().any(|o| o.ends_with("cv.csv")));
    assert!(outputs.iter().any(|o| o.ends_with("cv.json")));
    // two summaries, two recordings and the config file
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_configuration_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "data_dir = .\nlearning_rat = 0.1\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(cli(&["cv", "--config", p(&conf), "--out", p(&out)]), EXIT_INPUT);
    assert_eq!(cli(&["cv", "--out", p(&out)]), EXIT_INPUT);
    assert_ne!(cli(&["no-such-command"]), EXIT_OK);
}

#[test]
fn gradcheck_passes_and_catches_corruption() {
    for model in ["indrnn", "lstm", "cnn"] {
        assert_eq!(cli(&["gradcheck", "--model", model]), EXIT_OK, "{model}");
    }
    assert_eq!(cli(&["gradcheck", "--corrupt", "0.01"]), EXIT_NUMERICAL);
}
