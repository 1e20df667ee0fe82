use std::collections::BTreeSet;

use indrnn_eeg::exec;
use indrnn_eeg::experiments::{
    build_balanced_dataset, cv_table_csv, random_split, run_cv, ExperimentConfig, Label, Preprocess, Segment,
    SegmentCache,
};
use indrnn_eeg::model::{ModelConfig, ModelSpec};
use indrnn_eeg::numerics::SeededRng;
use indrnn_eeg::training::{Sample, TrainConfig};
use indrnn_eeg::Error;
use proptest::prelude::*;

fn seg(i: usize, label: Label) -> Segment {
    Segment {
        case_id: "c".into(),
        file_id: "f".into(),
        source: 0,
        start_sample: i * 10,
        length_samples: 10,
        label,
        seizure_overlap_seconds: if label == Label::Seizure { 1.0 } else { 0.0 },
    }
}

proptest! {
    #[test]
    fn split_is_a_partition_with_floor_cuts(n in 3usize..2000, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let (a, b, c) = random_split(&items, [70, 15, 15], &mut SeededRng::new(seed)).unwrap();
        prop_assert_eq!(a.len(), n * 70 / 100);
        prop_assert_eq!(a.len() + b.len(), n * 85 / 100);
        let all: BTreeSet<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(a.len() + b.len() + c.len(), n);
    }

    #[test]
    fn balanced_set_keeps_every_seizure(seizures in 0usize..60, extra in 0usize..200, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let mut segs: Vec<Segment> = (0..seizures).map(|i| seg(i, Label::Seizure)).collect();
        segs.extend((0..seizures + extra).map(|i| seg(i, Label::NonSeizure)));
        rng.shuffle(&mut segs);
        let picked = build_balanced_dataset(&segs, &mut rng).unwrap();
        let n_seizure = picked.iter().filter(|&&i| segs[i].label == Label::Seizure).count();
        prop_assert_eq!(n_seizure, seizures);
        prop_assert_eq!(picked.len(), 2 * seizures);
        prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn reference_split_sizes() {
    let items: Vec<usize> = (0..1330).collect();
    let (a, b, c) = random_split(&items, [70, 15, 15], &mut SeededRng::new(0)).unwrap();
    assert_eq!((a.len(), b.len(), c.len()), (931, 199, 200));
    let (a, b, c) = random_split(&items[..10], [70, 15, 15], &mut SeededRng::new(0)).unwrap();
    assert_eq!((a.len(), b.len(), c.len()), (7, 1, 2));
}

#[test]
fn too_few_background_segments() {
    let segs = vec![seg(0, Label::Seizure), seg(1, Label::Seizure), seg(2, Label::NonSeizure)];
    let err = build_balanced_dataset(&segs, &mut SeededRng::new(0)).unwrap_err();
    assert!(matches!(err, Error::InsufficientSegments { needed: 2, available: 1 }));
}

#[test]
fn zscore_uses_training_statistics() {
    let train = vec![
        Sample::new(vec![1.0, 10.0, 3.0, 10.0], 2, 2, 0).unwrap(),
        Sample::new(vec![1.0, 10.0, 3.0, 10.0], 2, 2, 1).unwrap(),
    ];
    let pre = Preprocess::fit(1, &train).unwrap();
    assert_eq!(pre.channel_mean, vec![2.0, 10.0]);
    // constant channel: std floored to 1
    assert_eq!(pre.channel_std, vec![1.0, 1.0]);
    let mut test = vec![Sample::new(vec![4.0, 12.0], 1, 2, 0).unwrap()];
    pre.apply(&mut test);
    assert_eq!(test[0].values, vec![2.0, 2.0]);
}

/// Two channels; seizure windows carry a strong oscillation.
fn toy_cache(seizures: usize, background: usize) -> SegmentCache {
    let steps = 16;
    let mut rng = SeededRng::new(77);
    let mut segments = Vec::new();
    let mut samples = Vec::new();
    for i in 0..seizures + background {
        let label = if i < seizures { Label::Seizure } else { Label::NonSeizure };
        segments.push(Segment {
            start_sample: i * steps,
            length_samples: steps,
            ..seg(i, label)
        });
        let amp = if label == Label::Seizure { 3.0 } else { 0.0 };
        samples.push(
            (0..steps * 2)
                .map(|k| (rng.normal() + amp * ((k / 2) as f64 * 1.3).sin()) as f32)
                .collect(),
        );
    }
    SegmentCache {
        channels: vec!["A".into(), "B".into()],
        sample_rate: 1.0,
        decimation: 1,
        segments,
        samples,
    }
}

fn toy_config() -> ExperimentConfig {
    let mut m = ModelConfig::with_depth(1);
    m.block_hidden_sizes = vec![6];
    m.fc1_hidden = 6;
    ExperimentConfig {
        segment_seconds: 16.0,
        repetitions: 3,
        seed: 5,
        model: ModelSpec::IndRnn(m),
        train: TrainConfig {
            learning_rate: 5e-3,
            batch_size: 8,
            epochs: 20,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn cross_validation_is_deterministic_and_learns_a_separable_task() {
    let cache = toy_cache(40, 60);
    let cfg = toy_config();
    let first = run_cv(&cfg, &cache).unwrap();
    let again = run_cv(&cfg, &cache).unwrap();
    assert_eq!(cv_table_csv(&first), cv_table_csv(&again));
    assert_eq!(first.seizure_segments, 40);
    assert_eq!(first.repetitions.len(), 3);
    for r in &first.repetitions {
        assert_eq!((r.train_size, r.val_size, r.test_size), (56, 12, 12));
    }
    let acc = first.aggregate.accuracy().unwrap().mean;
    assert!(acc >= 0.9, "mean accuracy {acc}\n{}", cv_table_csv(&first));
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let cache = toy_cache(20, 30);
    let mut cfg = toy_config();
    cfg.train.epochs = 2;
    cfg.repetitions = 2;
    exec::set_parallel(false);
    let seq = run_cv(&cfg, &cache);
    exec::set_parallel(true);
    let par = run_cv(&cfg, &cache);
    assert_eq!(cv_table_csv(&seq.unwrap()), cv_table_csv(&par.unwrap()));
}

#[test]
fn cv_table_layout() {
    let cache = toy_cache(20, 30);
    let mut cfg = toy_config();
    cfg.train.epochs = 1;
    let csv = cv_table_csv(&run_cv(&cfg, &cache).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "Item,Sensitivity,Specificity,F1 Score,Precision,Accuracy");
    assert_eq!(lines.len(), 1 + 3 + 2);
    assert!(lines[4].starts_with("Ave.,"));
    assert!(lines[5].starts_with("Std.,"));
    assert!(lines[1].starts_with("1,"));
}
