//! Segmentation, balanced dataset assembly, repeated random-split
//! evaluation and the segment-length / depth sweeps.

pub mod metrics;
pub mod protocol;
pub mod segment;
pub mod store;

pub use metrics::{aggregate, compute_metrics, Aggregate, ConfusionCounts, MetricsReport, Summary};
pub use protocol::{
    build_balanced_dataset, cv_table_csv, random_split, run_cv, run_repetition, sweep_depth,
    sweep_segment_lengths, sweep_table_csv, sweep_tidy_csv, with_input_channels, AxisOverride,
    CvResult, ExperimentConfig, Preprocess, RepetitionResult, RepetitionRun, SweepResult,
    DEFAULT_SWEEP_DEPTHS, DEFAULT_SWEEP_LENGTHS,
};
pub use segment::{overlap_seconds, segment_corpus, segment_record, Label, Segment, SegmentStats};
pub use store::{decimate_window, write_segment_cache, CorpusStore, SegmentCache, SegmentStore};
