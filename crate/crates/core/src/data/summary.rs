//! CHB-MIT `chbXX-summary.txt` annotation files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeizureAnnotation {
    pub file: String,
    /// Sorted, non-overlapping `(start, end)` pairs in seconds.
    pub intervals: Vec<(f64, f64)>,
}

impl SeizureAnnotation {
    pub fn new(file: impl Into<String>, intervals: Vec<(f64, f64)>) -> Result<Self> {
        let file = file.into();
        check_intervals(&intervals).map_err(|reason| Error::Annotation {
            file: file.clone(),
            reason,
        })?;
        Ok(Self { file, intervals })
    }

    /// Confirms every interval lies within `[0, duration]`.
    pub fn check_bounds(&self, duration: f64) -> Result<()> {
        match self.intervals.iter().find(|&&(_, e)| e > duration) {
            Some(&(s, e)) => Err(Error::Annotation {
                file: self.file.clone(),
                reason: format!("seizure ({s}, {e}) exceeds recording duration {duration} s"),
            }),
            None => Ok(()),
        }
    }
}

fn check_intervals(iv: &[(f64, f64)]) -> std::result::Result<(), String> {
    let mut prev_end = 0.0;
    for (k, &(s, e)) in iv.iter().enumerate() {
        if !(s >= 0.0) || !e.is_finite() {
            return Err(format!("seizure {} has invalid bounds ({s}, {e})", k + 1));
        }
        if e <= s {
            return Err(format!("seizure {} ends at {e} s, not after its start {s} s", k + 1));
        }
        if k > 0 && s < prev_end {
            return Err(format!("seizure {} at {s} s overlaps or precedes the previous one", k + 1));
        }
        prev_end = e;
    }
    Ok(())
}

enum Key {
    FileName,
    Count,
    Start,
    End,
}

/// Splits `Key: value` and classifies the key. Unknown keys are `None`.
fn classify(line: &str) -> Option<(Key, &str)> {
    let (key, value) = line.split_once(':')?;
    let key = key.trim().to_ascii_lowercase();
    let key = key.split_whitespace().collect::<Vec<_>>();
    let k = match key.as_slice() {
        ["file", "name"] => Key::FileName,
        ["number", "of", "seizures", "in", "file"] => Key::Count,
        ["seizure", "start", "time"] | ["seizure", _, "start", "time"] => Key::Start,
        ["seizure", "end", "time"] | ["seizure", _, "end", "time"] => Key::End,
        _ => return None,
    };
    Some((k, value.trim()))
}

fn seconds(value: &str, line: usize) -> Result<f64> {
    let v = value
        .trim_end_matches("seconds")
        .trim_end_matches("secs")
        .trim_end_matches("sec")
        .trim();
    v.parse().map_err(|_| Error::Summary {
        line,
        reason: format!("cannot read {value:?} as seconds"),
    })
}

struct Entry {
    file: String,
    line: usize,
    declared: Option<(usize, usize)>,
    starts: Vec<f64>,
    ends: Vec<f64>,
}

impl Entry {
    fn finish(self) -> Result<SeizureAnnotation> {
        let (count, count_line) = self.declared.ok_or_else(|| Error::Summary {
            line: self.line,
            reason: format!("{} has no seizure count", self.file),
        })?;
        if self.starts.len() != count || self.ends.len() != count {
            return Err(Error::Summary {
                line: count_line,
                reason: format!(
                    "{} declares {count} seizures but lists {} start and {} end times",
                    self.file,
                    self.starts.len(),
                    self.ends.len()
                ),
            });
        }
        let intervals = self.starts.into_iter().zip(self.ends).collect::<Vec<_>>();
        check_intervals(&intervals).map_err(|reason| Error::Summary {
            line: count_line,
            reason: format!("{}: {reason}", self.file),
        })?;
        Ok(SeizureAnnotation {
            file: self.file,
            intervals,
        })
    }
}

/// Parses the summary dialect. Lines with unrecognized keys (channel lists,
/// clock times, sampling rate) are skipped; recognized keys must parse.
pub fn parse_chbmit_summary(text: &str) -> Result<Vec<SeizureAnnotation>> {
    let mut out = Vec::new();
    let mut cur: Option<Entry> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let Some((key, value)) = classify(raw) else {
            continue;
        };
        if let Key::FileName = key {
            if let Some(e) = cur.take() {
                out.push(e.finish()?);
            }
            if value.is_empty() {
                return Err(Error::Summary {
                    line,
                    reason: "empty file name".into(),
                });
            }
            cur = Some(Entry {
                file: value.to_string(),
                line,
                declared: None,
                starts: Vec::new(),
                ends: Vec::new(),
            });
            continue;
        }
        let entry = cur.as_mut().ok_or_else(|| Error::Summary {
            line,
            reason: "seizure information before any file name".into(),
        })?;
        match key {
            Key::Count => {
                let n = value.parse().map_err(|_| Error::Summary {
                    line,
                    reason: format!("seizure count {value:?} is not an integer"),
                })?;
                entry.declared = Some((n, line));
            }
            Key::Start => entry.starts.push(seconds(value, line)?),
            Key::End => {
                let end = seconds(value, line)?;
                if let Some(&start) = entry.starts.get(entry.ends.len()) {
                    if end <= start {
                        return Err(Error::Summary {
                            line,
                            reason: format!("seizure ends at {end} s, not after its start {start} s"),
                        });
                    }
                }
                entry.ends.push(end);
            }
            Key::FileName => unreachable!(),
        }
    }
    if let Some(e) = cur {
        out.push(e.finish()?);
    }
    Ok(out)
}

/// Renders annotations in the same dialect (used for synthetic corpora).
pub fn write_chbmit_summary(sample_rate: f64, channels: &[String], entries: &[SeizureAnnotation]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Data Sampling Rate: {sample_rate} Hz");
    s.push_str("*************************\n\nChannels in EDF Files:\n**********************\n");
    for (i, c) in channels.iter().enumerate() {
        let _ = writeln!(s, "Channel {}: {c}", i + 1);
    }
    for e in entries {
        let _ = write!(
            s,
            "\nFile Name: {}\nNumber of Seizures in File: {}\n",
            e.file,
            e.intervals.len()
        );
        for (k, (a, b)) in e.intervals.iter().enumerate() {
            if e.intervals.len() == 1 {
                let _ = write!(s, "Seizure Start Time: {a} seconds\nSeizure End Time: {b} seconds\n");
            } else {
                let _ = write!(
                    s,
                    "Seizure {n} Start Time: {a} seconds\nSeizure {n} End Time: {b} seconds\n",
                    n = k + 1
                );
            }
        }
    }
    s
}
