//! Synthetic multichannel EEG with annotated seizure-like episodes.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::channels::{default_channels, Recording};
use crate::data::edf::{physical_to_digital, write_edf, EdfFile, EdfHeader, SignalSpec};
use crate::data::summary::{write_chbmit_summary, SeizureAnnotation};
use crate::error::{Error, Result};
use crate::exec;
use crate::numerics::{SeededRng, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sample_rate: f64,
    /// Standard deviation of the background in physical units (µV).
    pub background_std: f64,
    /// Target ratio of seizure-span variance to background variance.
    pub variance_ratio: f64,
    /// Number of Voss–McCartney rows in the pink-noise generator.
    pub octaves: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 256.0,
            background_std: 20.0,
            variance_ratio: 8.0,
            octaves: 8,
        }
    }
}

// Relative amplitudes of the fundamental and its harmonics.
const HARMONICS: [f64; 3] = [1.0, 0.5, 1.0 / 3.0];

fn pink_noise(rng: &mut SeededRng, n: usize, rows: u32) -> Vec<f64> {
    let mut state: Vec<f64> = (0..rows).map(|_| rng.normal()).collect();
    let mut total: f64 = state.iter().sum();
    let norm = 1.0 / f64::from(rows + 1).sqrt();
    (0..n)
        .map(|i| {
            if i > 0 {
                let k = (i as u64).trailing_zeros();
                if k < rows {
                    let fresh = rng.normal();
                    total += fresh - state[k as usize];
                    state[k as usize] = fresh;
                }
            }
            (total + rng.normal()) * norm
        })
        .collect()
}

/// Generates `duration_seconds` of EEG on `channels`, adding a 3–8 Hz
/// rhythmic discharge with harmonics during each interval.
pub fn synth_eeg(
    rng: &SeededRng,
    duration_seconds: f64,
    intervals: &[(f64, f64)],
    channels: &[String],
    cfg: &SynthConfig,
    file: &str,
) -> Result<(Recording, SeizureAnnotation)> {
    if !(cfg.variance_ratio >= 1.0) || !(cfg.background_std > 0.0) || cfg.octaves == 0 {
        return Err(Error::config("synthetic generator needs variance_ratio ≥ 1, positive std and octaves"));
    }
    let annotation = SeizureAnnotation::new(file, intervals.to_vec())?;
    annotation.check_bounds(duration_seconds)?;
    let n = (duration_seconds * cfg.sample_rate).round() as usize;
    if n == 0 || channels.is_empty() {
        return Err(Error::config("synthetic recording needs a positive duration and channels"));
    }

    // Seizure rhythm per interval: fundamental frequency, then per-channel phases.
    let mut episode_rng = rng.derive_named("episodes");
    let episodes: Vec<(usize, usize, f64, Vec<f64>)> = intervals
        .iter()
        .map(|&(s, e)| {
            let f0 = episode_rng.uniform(3.0, 8.0);
            let phases = (0..channels.len()).map(|_| episode_rng.uniform(0.0, TAU)).collect();
            let a = (s * cfg.sample_rate).round() as usize;
            let b = ((e * cfg.sample_rate).round() as usize).min(n);
            (a, b, f0, phases)
        })
        .collect();
    let harmonic_power: f64 = HARMONICS.iter().map(|h| h * h / 2.0).sum();
    let amp = cfg.background_std * ((cfg.variance_ratio - 1.0) / harmonic_power).sqrt();

    let rows = exec::map_range(channels.len(), |c| {
        let mut crng = rng.derive_named("background").derive(c as u64);
        let mut x = pink_noise(&mut crng, n, cfg.octaves);
        for v in x.iter_mut() {
            *v *= cfg.background_std;
        }
        for (a, b, f0, phases) in &episodes {
            for (i, v) in x[*a..*b].iter_mut().enumerate() {
                let t = i as f64 / cfg.sample_rate;
                let osc: f64 = HARMONICS
                    .iter()
                    .enumerate()
                    .map(|(k, h)| h * (TAU * f0 * (k + 1) as f64 * t + phases[c] * (k + 1) as f64).sin())
                    .sum();
                *v += amp * osc;
            }
        }
        x
    });
    let data: Vec<f32> = rows.into_iter().flatten().map(|v| v as f32).collect();
    let rec = Recording::new(channels.to_vec(), cfg.sample_rate, Tensor::new(vec![channels.len(), n], data)?)?;
    Ok((rec, annotation))
}

/// Layout of a synthetic corpus written by [`write_synth_corpus`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpusConfig {
    pub seed: u64,
    pub cases: usize,
    pub files_per_case: usize,
    pub duration_seconds: f64,
    pub seizures_per_case: usize,
    pub seizure_seconds: (u32, u32),
    pub channels: Vec<String>,
    pub signal: SynthConfig,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cases: 6,
            files_per_case: 1,
            duration_seconds: 1200.0,
            seizures_per_case: 4,
            seizure_seconds: (40, 120),
            channels: default_channels(),
            signal: SynthConfig::default(),
        }
    }
}

/// Spreads `count` seizures over a file: one per equal slot, integer-second
/// bounds, uniform length in `len` and uniform placement within the slot.
pub fn place_seizures(rng: &mut SeededRng, duration: f64, count: usize, len: (u32, u32)) -> Result<Vec<(f64, f64)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let (lo, hi) = len;
    if lo == 0 || lo > hi {
        return Err(Error::config("seizure length range must satisfy 0 < lo ≤ hi"));
    }
    let slot = (duration / count as f64).floor() as u32;
    if slot < hi + 2 {
        return Err(Error::config(format!(
            "{count} seizures of up to {hi} s do not fit in {duration} s"
        )));
    }
    Ok((0..count as u32)
        .map(|k| {
            let l = lo + rng.below((hi - lo + 1) as usize) as u32;
            let start = k * slot + 1 + rng.below((slot - l - 1) as usize) as u32;
            (f64::from(start), f64::from(start + l))
        })
        .collect())
}

fn edf_for(rec: &Recording, case: &str) -> Result<EdfFile> {
    let rate = rec.sample_rate;
    if rate.fract() != 0.0 {
        return Err(Error::config("synthetic sample rate must be a whole number of Hz"));
    }
    let spr = rate as usize;
    let n = rec.num_samples();
    if !n.is_multiple_of(spr) {
        return Err(Error::config("synthetic duration must be a whole number of seconds"));
    }
    let signals: Vec<SignalSpec> = rec
        .labels
        .iter()
        .map(|l| SignalSpec {
            label: l.clone(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -3276.8,
            physical_max: 3276.7,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record: spr,
            reserved: String::new(),
        })
        .collect();
    let samples = signals
        .iter()
        .enumerate()
        .map(|(c, s)| physical_to_digital(&rec.samples.data()[c * n..(c + 1) * n], s))
        .collect();
    Ok(EdfFile {
        header: EdfHeader {
            version: "0".into(),
            patient_id: format!("{case} synthetic"),
            recording_id: String::new(),
            start_date: "01.01.00".into(),
            start_time: "00.00.00".into(),
            header_bytes: 256 * (signals.len() + 1),
            reserved: String::new(),
            num_records: n / spr,
            record_duration: 1.0,
            signals,
        },
        samples,
    })
}

/// Writes `<out>/<case>/<case>_NN.edf` and `<out>/<case>/<case>-summary.txt`
/// for every case; returns the written paths in order.
pub fn write_synth_corpus(out: &Path, cfg: &SynthCorpusConfig) -> Result<Vec<PathBuf>> {
    if cfg.cases == 0 || cfg.files_per_case == 0 {
        return Err(Error::config("need at least one case and one file per case"));
    }
    let master = SeededRng::new(cfg.seed);
    let mut written = Vec::new();
    for case in 0..cfg.cases {
        let case_id = format!("syn{:02}", case + 1);
        let dir = out.join(&case_id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let case_rng = master.derive(case as u64);
        let mut layout_rng = case_rng.derive_named("layout");
        let mut entries = Vec::new();
        for f in 0..cfg.files_per_case {
            // round-robin seizures over files
            let count = (cfg.seizures_per_case + cfg.files_per_case - 1 - f) / cfg.files_per_case;
            let intervals = place_seizures(&mut layout_rng, cfg.duration_seconds, count, cfg.seizure_seconds)?;
            let name = format!("{case_id}_{:02}.edf", f + 1);
            let (rec, ann) = synth_eeg(&case_rng.derive(1000 + f as u64), cfg.duration_seconds, &intervals, &cfg.channels, &cfg.signal, &name)?;
            let bytes = write_edf(&edf_for(&rec, &case_id)?)?;
            let path = dir.join(&name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            entries.push(ann);
        }
        let path = dir.join(format!("{case_id}-summary.txt"));
        let text = write_chbmit_summary(cfg.signal.sample_rate, &cfg.channels, &entries);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variance(x: &[f32]) -> f64 {
        let m = x.iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64;
        x.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn deterministic_and_empty_annotation() {
        let ch = vec!["A".to_string(), "B".to_string()];
        let cfg = SynthConfig::default();
        let (a, ann) = synth_eeg(&SeededRng::new(3), 4.0, &[], &ch, &cfg, "f.edf").unwrap();
        let (b, _) = synth_eeg(&SeededRng::new(3), 4.0, &[], &ch, &cfg, "f.edf").unwrap();
        assert!(ann.intervals.is_empty());
        assert_eq!(a.samples.data(), b.samples.data());
        assert_eq!(a.samples.shape(), &[2, 1024]);
    }

    #[test]
    fn seizure_variance_ratio() {
        let ch: Vec<String> = (0..4).map(|c| format!("C{c}")).collect();
        for ratio in [4.0, 6.0, 10.0] {
            let cfg = SynthConfig {
                variance_ratio: ratio,
                ..SynthConfig::default()
            };
            let (rec, _) = synth_eeg(&SeededRng::new(11), 120.0, &[(40.0, 80.0)], &ch, &cfg, "f").unwrap();
            let n = rec.num_samples();
            let (mut bg, mut sz) = (0.0, 0.0);
            for c in 0..4 {
                let row = &rec.samples.data()[c * n..(c + 1) * n];
                bg += variance(&row[..40 * 256]) / 4.0;
                sz += variance(&row[40 * 256..80 * 256]) / 4.0;
            }
            let measured = sz / bg;
            assert!(measured >= 4.0 * 0.95 && (measured / ratio - 1.0).abs() < 0.3, "ratio {ratio}: {measured}");
        }
    }

    #[test]
    fn placement_in_slots() {
        let mut rng = SeededRng::new(5);
        for _ in 0..200 {
            let iv = place_seizures(&mut rng, 1200.0, 4, (20, 60)).unwrap();
            assert!(SeizureAnnotation::new("x", iv.clone()).is_ok());
            for (s, e) in iv {
                assert!((20.0..=60.0).contains(&(e - s)));
                assert!(e <= 1200.0 && s >= 1.0);
            }
        }
        assert!(place_seizures(&mut rng, 100.0, 4, (20, 60)).is_err());
    }
}
