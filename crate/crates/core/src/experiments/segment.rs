use serde::{Deserialize, Serialize};

use crate::data::Corpus;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NonSeizure,
    Seizure,
}

impl Label {
    pub fn class_index(self) -> usize {
        match self {
            Label::NonSeizure => 0,
            Label::Seizure => 1,
        }
    }
}

/// A fixed-length labeled window into one recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub case_id: String,
    pub file_id: String,
    /// Index of the source recording in whatever collection produced the segment.
    pub source: usize,
    pub start_sample: usize,
    pub length_samples: usize,
    pub label: Label,
    pub seizure_overlap_seconds: f64,
}

/// Total measure of `[a, b)` covered by the intervals.
pub fn overlap_seconds(a: f64, b: f64, intervals: &[(f64, f64)]) -> f64 {
    intervals
        .iter()
        .map(|&(s, e)| (b.min(e) - a.max(s)).max(0.0))
        .sum()
}

/// Splits a recording into consecutive non-overlapping windows from t = 0.
/// A trailing remainder is dropped unless it holds seizure data, in which
/// case one more full-length window ending at the record end is added.
/// Records shorter than one window yield no segments.
pub fn segment_record(
    duration_seconds: f64,
    intervals: &[(f64, f64)],
    segment_seconds: f64,
    sample_rate: f64,
) -> Result<Vec<Segment>> {
    if !(duration_seconds > 0.0) || !(segment_seconds > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::config("duration, segment length and sample rate must be positive"));
    }
    if let Some(&(s, e)) = intervals.iter().find(|&&(s, e)| s < 0.0 || e > duration_seconds || e <= s) {
        return Err(Error::config(format!(
            "seizure ({s}, {e}) is not within a {duration_seconds} s record"
        )));
    }
    let total = (duration_seconds * sample_rate).round() as usize;
    let len = (segment_seconds * sample_rate).round() as usize;
    if len == 0 {
        return Err(Error::config("segment shorter than one sample"));
    }
    if len > total {
        log::info!("record of {duration_seconds} s is shorter than a {segment_seconds} s segment; skipped");
        return Ok(Vec::new());
    }
    let window = |start: usize| {
        let a = start as f64 / sample_rate;
        let b = (start + len) as f64 / sample_rate;
        let ov = overlap_seconds(a, b, intervals);
        Segment {
            case_id: String::new(),
            file_id: String::new(),
            source: 0,
            start_sample: start,
            length_samples: len,
            label: if ov > 0.0 { Label::Seizure } else { Label::NonSeizure },
            seizure_overlap_seconds: ov,
        }
    };
    let full = total / len;
    let mut out: Vec<Segment> = (0..full).map(|k| window(k * len)).collect();
    let rem_start = full * len;
    if rem_start < total {
        let a = rem_start as f64 / sample_rate;
        let b = total as f64 / sample_rate;
        if overlap_seconds(a, b, intervals) > 0.0 {
            out.push(window(total - len));
        }
    }
    Ok(out)
}

/// Segments every record of `corpus`, filling in case, file and source index.
pub fn segment_corpus(corpus: &Corpus, segment_seconds: f64) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for (i, r) in corpus.records.iter().enumerate() {
        let segs = segment_record(r.duration_seconds(), &r.annotation.intervals, segment_seconds, r.sample_rate)?;
        out.extend(segs.into_iter().map(|s| Segment {
            case_id: r.case_id.clone(),
            file_id: r.file_id.clone(),
            source: i,
            ..s
        }));
    }
    Ok(out)
}

/// Seizure-content statistics of a segmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub seizure: usize,
    pub non_seizure: usize,
    pub mean_seizure_seconds: Option<f64>,
    pub fraction_below_7s: Option<f64>,
    pub fraction_above_10s: Option<f64>,
    pub fraction_above_17s: Option<f64>,
}

impl SegmentStats {
    pub fn of(segments: &[Segment]) -> Self {
        let lens: Vec<f64> = segments
            .iter()
            .filter(|s| s.label == Label::Seizure)
            .map(|s| s.seizure_overlap_seconds)
            .collect();
        let n = lens.len();
        let frac = |p: &dyn Fn(f64) -> bool| (n > 0).then(|| lens.iter().filter(|&&l| p(l)).count() as f64 / n as f64);
        Self {
            seizure: n,
            non_seizure: segments.len() - n,
            mean_seizure_seconds: (n > 0).then(|| lens.iter().sum::<f64>() / n as f64),
            fraction_below_7s: frac(&|l| l < 7.0),
            fraction_above_10s: frac(&|l| l > 10.0),
            fraction_above_17s: frac(&|l| l > 17.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(segs: &[Segment]) -> Vec<(usize, usize, Label)> {
        segs.iter()
            .map(|s| (s.start_sample, s.start_sample + s.length_samples, s.label))
            .collect()
    }

    #[test]
    fn exact_division() {
        let s = segment_record(46.0, &[], 23.0, 1.0).unwrap();
        assert_eq!(spans(&s), vec![(0, 23, Label::NonSeizure), (23, 46, Label::NonSeizure)]);
    }

    #[test]
    fn seizure_in_remainder_appends_overlapping_window() {
        let s = segment_record(60.0, &[(50.0, 55.0)], 23.0, 256.0).unwrap();
        let secs: Vec<(f64, f64, Label)> = s
            .iter()
            .map(|s| (s.start_sample as f64 / 256.0, (s.start_sample + s.length_samples) as f64 / 256.0, s.label))
            .collect();
        assert_eq!(
            secs,
            vec![
                (0.0, 23.0, Label::NonSeizure),
                (23.0, 46.0, Label::NonSeizure),
                (37.0, 60.0, Label::Seizure)
            ]
        );
        assert_eq!(s[2].seizure_overlap_seconds, 5.0);
    }

    #[test]
    fn seizure_free_remainder_dropped() {
        let s = segment_record(30.0, &[(0.0, 1.0)], 23.0, 256.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, Label::Seizure);
        assert_eq!(s[0].seizure_overlap_seconds, 1.0);
    }

    #[test]
    fn boundary_touch_is_not_seizure() {
        let s = segment_record(46.0, &[(23.0, 30.0)], 23.0, 1.0).unwrap();
        assert_eq!(s[0].label, Label::NonSeizure);
        assert_eq!(s[1].label, Label::Seizure);
    }

    #[test]
    fn short_record_skipped() {
        assert!(segment_record(10.0, &[], 23.0, 256.0).unwrap().is_empty());
    }

    #[test]
    fn stats() {
        let s = segment_record(100.0, &[(0.0, 5.0), (30.0, 45.0)], 10.0, 1.0).unwrap();
        let st = SegmentStats::of(&s);
        assert_eq!((st.seizure, st.non_seizure), (3, 7));
        // windows [0,10) [30,40) [40,50) hold 5, 10 and 5 s of seizure
        assert!((st.mean_seizure_seconds.unwrap() - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(st.fraction_below_7s, Some(2.0 / 3.0));
        assert_eq!(st.fraction_above_10s, Some(0.0));
    }
}
