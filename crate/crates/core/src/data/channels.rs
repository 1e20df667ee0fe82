use crate::data::edf::{digital_to_physical, EdfFile};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Stand-in default: the first 17 labels of the standard CHB-MIT bipolar montage.
pub const DEFAULT_CHANNELS: [&str; 17] = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4", "F4-C4",
    "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ",
];

pub fn default_channels() -> Vec<String> {
    DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect()
}

/// Uppercases, trims, and drops a trailing `-<digits>` duplicate marker from
/// three-part labels (`T8-P8-0` becomes `T8-P8`).
pub fn normalize_label(label: &str) -> String {
    let up = label.trim().to_ascii_uppercase();
    let parts: Vec<&str> = up.split('-').collect();
    if parts.len() == 3 && !parts[2].is_empty() && parts[2].bytes().all(|b| b.is_ascii_digit()) {
        return format!("{}-{}", parts[0], parts[1]);
    }
    up
}

/// Dummy or placeholder channels carry no signal.
pub fn is_placeholder(label: &str, reserved: &str) -> bool {
    let l = label.trim();
    l.is_empty() || l == "-" || l == "." || l.starts_with("--") || reserved.to_ascii_uppercase().contains("MISSING")
}

/// A decoded recording in physical units, `[channels × samples]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub labels: Vec<String>,
    pub sample_rate: f64,
    pub samples: Tensor<f32>,
}

impl Recording {
    pub fn new(labels: Vec<String>, sample_rate: f64, samples: Tensor<f32>) -> Result<Self> {
        if samples.ndim() != 2 || samples.shape()[0] != labels.len() {
            return Err(Error::InvalidTensor(format!(
                "{} labels for samples of shape {:?}",
                labels.len(),
                samples.shape()
            )));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::config("sample rate must be positive"));
        }
        Ok(Self {
            labels,
            sample_rate,
            samples,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn duration_seconds(&self) -> f64 {
        self.num_samples() as f64 / self.sample_rate
    }

    /// Converts an EDF file, dropping placeholder channels with a notice.
    /// The remaining channels must share one sample rate.
    pub fn from_edf(edf: &EdfFile) -> Result<Self> {
        let h = &edf.header;
        let keep: Vec<usize> = (0..h.num_signals())
            .filter(|&i| {
                let s = &h.signals[i];
                let dummy = is_placeholder(&s.label, &s.reserved);
                if dummy {
                    log::info!("dropping placeholder channel {} ({:?})", i + 1, s.label);
                }
                !dummy
            })
            .collect();
        let first = *keep
            .first()
            .ok_or_else(|| Error::Channels("no signal channels in recording".into()))?;
        let rate = h.sample_rate(first);
        if let Some(&bad) = keep.iter().find(|&&i| h.sample_rate(i) != rate) {
            return Err(Error::Channels(format!(
                "channel {} samples at {} Hz, channel {} at {rate} Hz",
                h.signals[bad].label,
                h.sample_rate(bad),
                h.signals[first].label
            )));
        }
        let n = edf.samples[first].len();
        let mut data = Vec::with_capacity(keep.len() * n);
        for &i in &keep {
            data.extend(digital_to_physical(&edf.samples[i], &h.signals[i]));
        }
        Recording::new(
            keep.iter().map(|&i| h.signals[i].label.clone()).collect(),
            rate,
            Tensor::new(vec![keep.len(), n], data)?,
        )
    }

    /// Rows of `required` in request order. Labels match after
    /// normalization; repeated labels are tolerated only when their samples
    /// are identical.
    pub fn select_channels(&self, required: &[String]) -> Result<Tensor<f32>> {
        let n = self.num_samples();
        let norm: Vec<String> = self.labels.iter().map(|l| normalize_label(l)).collect();
        let row = |i: usize| &self.samples.data()[i * n..(i + 1) * n];
        let mut missing = Vec::new();
        let mut conflicting = Vec::new();
        let mut picks = Vec::with_capacity(required.len());
        for want in required {
            let w = normalize_label(want);
            let hits: Vec<usize> = (0..norm.len()).filter(|&i| norm[i] == w).collect();
            match hits.as_slice() {
                [] => missing.push(want.clone()),
                [first, rest @ ..] => {
                    if rest.iter().any(|&r| row(r) != row(*first)) {
                        conflicting.push(want.clone());
                    }
                    picks.push(*first);
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        let dup_requests: Vec<String> = required
            .iter()
            .filter(|r| !seen.insert(normalize_label(r)))
            .cloned()
            .collect();
        if !missing.is_empty() || !conflicting.is_empty() || !dup_requests.is_empty() {
            let mut parts = Vec::new();
            if !missing.is_empty() {
                parts.push(format!("missing {}", missing.join(", ")));
            }
            if !conflicting.is_empty() {
                parts.push(format!("ambiguous duplicates {}", conflicting.join(", ")));
            }
            if !dup_requests.is_empty() {
                parts.push(format!("requested twice {}", dup_requests.join(", ")));
            }
            return Err(Error::Channels(parts.join("; ")));
        }
        let mut data = Vec::with_capacity(picks.len() * n);
        for &p in &picks {
            data.extend_from_slice(row(p));
        }
        Tensor::new(vec![picks.len(), n], data)
    }
}
