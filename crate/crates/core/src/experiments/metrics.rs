use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts with seizure (label 1) as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn from_predictions(predictions: &[usize], labels: &[usize]) -> Self {
        let mut c = Self::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p == 1, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Confusion counts plus the five reported metrics. `None` marks a metric
/// whose denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(tp: u64, fp: u64, tn: u64, fn_: u64) -> Result<MetricsReport> {
    MetricsReport::from_counts(ConfusionCounts { tp, fp, tn, fn_ })
}

impl MetricsReport {
    pub fn from_counts(c: ConfusionCounts) -> Result<Self> {
        if c.total() == 0 {
            return Err(Error::NoData("all confusion counts are zero".into()));
        }
        let sensitivity = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        let precision = ratio(c.tp, c.tp + c.fp);
        let f1 = match (precision, sensitivity) {
            (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
            _ => None,
        };
        Ok(Self {
            counts: c,
            sensitivity,
            specificity,
            precision,
            f1,
            accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        })
    }

    /// Values in table column order: sensitivity, specificity, F1, precision, accuracy.
    pub fn columns(&self) -> [Option<f64>; 5] {
        [
            self.sensitivity,
            self.specificity,
            self.f1,
            self.precision,
            Some(self.accuracy),
        ]
    }
}

pub const METRIC_NAMES: [&str; 5] = ["Sensitivity", "Specificity", "F1 Score", "Precision", "Accuracy"];

/// Mean and population standard deviation (÷N).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}±{:.4}", self.mean, self.std)
    }
}

/// Per-metric summaries in table column order. Undefined per-repetition
/// values are left out of their column; an all-undefined column is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub columns: [Option<Summary>; 5],
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::NoData("aggregate needs at least one report".into()));
    }
    let columns = std::array::from_fn(|k| {
        let vals: Vec<f64> = reports.iter().filter_map(|r| r.columns()[k]).collect();
        Summary::of(&vals)
    });
    Ok(Aggregate { columns })
}

impl Aggregate {
    pub fn sensitivity(&self) -> Option<Summary> {
        self.columns[0]
    }

    pub fn specificity(&self) -> Option<Summary> {
        self.columns[1]
    }

    pub fn f1(&self) -> Option<Summary> {
        self.columns[2]
    }

    pub fn precision(&self) -> Option<Summary> {
        self.columns[3]
    }

    pub fn accuracy(&self) -> Option<Summary> {
        self.columns[4]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r4(v: f64) -> f64 {
        (v * 1e4).round() / 1e4
    }

    #[test]
    fn first_reference_row_from_counts() {
        let m = compute_metrics(91, 17, 83, 9).unwrap();
        assert_eq!(r4(m.sensitivity.unwrap()), 0.9100);
        assert_eq!(r4(m.specificity.unwrap()), 0.8300);
        assert_eq!(r4(m.precision.unwrap()), 0.8426);
        assert_eq!(r4(m.f1.unwrap()), 0.8750);
        assert_eq!(r4(m.accuracy), 0.8700);
    }

    #[test]
    fn undefined_precision_is_marked() {
        let m = compute_metrics(0, 0, 10, 5).unwrap();
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.sensitivity, Some(0.0));
    }

    #[test]
    fn perfect_classifier() {
        let m = compute_metrics(40, 0, 60, 0).unwrap();
        assert_eq!(m.columns(), [Some(1.0); 5]);
    }

    #[test]
    fn all_zero_rejected() {
        assert!(compute_metrics(0, 0, 0, 0).is_err());
    }

    #[test]
    fn aggregate_uses_population_std() {
        let s = Summary::of(&[0.91, 0.89, 0.93, 0.79, 0.84, 0.85, 0.87, 0.87, 0.90, 0.88]).unwrap();
        assert!((s.mean - 0.8730).abs() < 1e-4);
        assert!((s.std - 0.0377).abs() < 1e-4);
        assert_eq!(format!("{s}"), "0.8730±0.0377");
        assert_eq!(Summary::of(&[0.5]).unwrap().std, 0.0);
        let c = Summary::of(&[0.7; 4]).unwrap();
        assert_eq!((c.mean, c.std), (0.7, 0.0));
    }

    proptest! {
        #[test]
        fn class_swap_identities(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let m = compute_metrics(tp, fp, tn, fn_).unwrap();
            // relabel: seizure ↔ non-seizure swaps TP↔TN and FP↔FN
            let s = compute_metrics(tn, fn_, tp, fp).unwrap();
            prop_assert_eq!(m.sensitivity, s.specificity);
            prop_assert_eq!(m.specificity, s.sensitivity);
            prop_assert_eq!(m.accuracy, s.accuracy);
        }
    }
}
