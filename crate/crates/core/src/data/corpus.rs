//! Discovery of cases, their annotation summaries and EDF files.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::channels::{is_placeholder, normalize_label, Recording};
use crate::data::edf::{parse_edf, parse_edf_header, EdfHeader};
use crate::data::summary::{parse_chbmit_summary, SeizureAnnotation};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Files removed from the corpus regardless of content.
pub const EXCLUDED_FILES: [&str; 3] = ["chb12_27.edf", "chb12_28.edf", "chb12_29.edf"];

#[derive(Clone, Debug, PartialEq)]
pub struct CaseCatalog {
    pub case_id: String,
    pub files: Vec<SeizureAnnotation>,
    pub excluded: Vec<String>,
}

impl CaseCatalog {
    pub fn from_summary(case_id: impl Into<String>, text: &str) -> Result<Self> {
        Ok(Self {
            case_id: case_id.into(),
            files: parse_chbmit_summary(text)?,
            excluded: EXCLUDED_FILES.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn is_excluded(&self, file: &str) -> bool {
        self.excluded.iter().any(|x| x.eq_ignore_ascii_case(file))
    }

    pub fn eligible(&self) -> impl Iterator<Item = &SeizureAnnotation> {
        self.files.iter().filter(|a| !self.is_excluded(&a.file))
    }
}

/// One eligible EDF file, described by its header only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingRef {
    pub case_id: String,
    pub file_id: String,
    pub path: PathBuf,
    pub sample_rate: f64,
    pub num_samples: usize,
    pub annotation: SeizureAnnotation,
}

impl RecordingRef {
    pub fn duration_seconds(&self) -> f64 {
        self.num_samples as f64 / self.sample_rate
    }
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub channels: Vec<String>,
    pub records: Vec<RecordingRef>,
    /// `(file, reason)` for files left out because of their channel layout.
    pub skipped: Vec<(String, String)>,
    /// Summary files the catalog was read from.
    pub summaries: Vec<PathBuf>,
}

fn read_header(path: &Path) -> Result<EdfHeader> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut fixed = vec![0u8; 256];
    f.read_exact(&mut fixed).map_err(|e| Error::io(path, e))?;
    let ns: usize = std::str::from_utf8(&fixed[252..256])
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Edf {
            offset: 252,
            reason: format!("{}: unreadable signal count", path.display()),
        })?;
    let mut rest = vec![0u8; 256 * ns];
    f.read_exact(&mut rest).map_err(|e| Error::io(path, e))?;
    fixed.extend(rest);
    let header = parse_edf_header(&fixed)?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len() as usize;
    let expected = header.header_bytes + header.num_records * header.record_bytes();
    if len < expected {
        return Err(Error::Edf {
            offset: len,
            reason: format!("file truncated: expected {expected} bytes, found {len}"),
        });
    }
    Ok(header)
}

/// Sample rate shared by the required channels, or why the file does not fit.
fn channel_fit(header: &EdfHeader, channels: &[String]) -> std::result::Result<f64, String> {
    let mut rate = None;
    let mut missing = Vec::new();
    for want in channels {
        let w = normalize_label(want);
        let hit = header
            .signals
            .iter()
            .position(|s| !is_placeholder(&s.label, &s.reserved) && normalize_label(&s.label) == w);
        match hit {
            None => missing.push(want.as_str()),
            Some(i) => {
                let r = header.sample_rate(i);
                if *rate.get_or_insert(r) != r {
                    return Err(format!("channel {want} has sample rate {r} Hz"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(format!("lacks channels {}", missing.join(", ")));
    }
    rate.ok_or_else(|| "no channels requested".to_string())
}

fn summary_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let visit = |d: &Path, recurse: bool, out: &mut Vec<PathBuf>| -> Result<Vec<PathBuf>> {
        let mut subdirs = Vec::new();
        for entry in std::fs::read_dir(d).map_err(|e| Error::io(d, e))? {
            let p = entry.map_err(|e| Error::io(d, e))?.path();
            if p.is_dir() && recurse {
                subdirs.push(p);
            } else if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("-summary.txt")) {
                out.push(p);
            }
        }
        Ok(subdirs)
    };
    for sub in visit(dir, true, &mut out)? {
        visit(&sub, false, &mut out)?;
    }
    out.sort();
    Ok(out)
}

impl Corpus {
    /// Finds `*-summary.txt` files in `summary_dir` (default `data_dir`) and
    /// one directory below it, then reads the header of every listed,
    /// non-excluded EDF. Files lacking a required channel are skipped with a
    /// notice; missing or malformed files are reported together as one error.
    pub fn scan(data_dir: &Path, summary_dir: Option<&Path>, channels: &[String]) -> Result<Self> {
        let sdir = summary_dir.unwrap_or(data_dir);
        let summaries = summary_files(sdir)?;
        if summaries.is_empty() {
            return Err(Error::NoData(format!("no *-summary.txt files under {}", sdir.display())));
        }
        let mut records = Vec::new();
        let mut skipped = Vec::new();
        let mut problems = Vec::new();
        for spath in &summaries {
            let name = spath.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let case_id = name.trim_end_matches("-summary.txt").to_string();
            let text = std::fs::read_to_string(spath).map_err(|e| Error::io(spath, e))?;
            let catalog = match CaseCatalog::from_summary(&case_id, &text) {
                Ok(c) => c,
                Err(e) => {
                    problems.push(format!("{}: {e}", spath.display()));
                    continue;
                }
            };
            for ann in catalog.eligible() {
                let candidates = [
                    data_dir.join(&case_id).join(&ann.file),
                    data_dir.join(&ann.file),
                    spath.parent().unwrap_or(sdir).join(&ann.file),
                ];
                let Some(path) = candidates.into_iter().find(|p| p.is_file()) else {
                    problems.push(format!("{}: listed in {} but not found", ann.file, spath.display()));
                    continue;
                };
                let header = match read_header(&path) {
                    Ok(h) => h,
                    Err(e) => {
                        problems.push(format!("{}: {e}", path.display()));
                        continue;
                    }
                };
                let rate = match channel_fit(&header, channels) {
                    Ok(r) => r,
                    Err(reason) => {
                        log::info!("skipping {}: {reason}", ann.file);
                        skipped.push((ann.file.clone(), reason));
                        continue;
                    }
                };
                let num_samples = (header.duration_seconds() * rate).round() as usize;
                if let Err(e) = ann.check_bounds(num_samples as f64 / rate) {
                    problems.push(e.to_string());
                    continue;
                }
                records.push(RecordingRef {
                    case_id: case_id.clone(),
                    file_id: ann.file.clone(),
                    path,
                    sample_rate: rate,
                    num_samples,
                    annotation: ann.clone(),
                });
            }
        }
        if !problems.is_empty() {
            return Err(Error::Format {
                kind: "corpus",
                reason: format!("{} problem(s):\n  {}", problems.len(), problems.join("\n  ")),
            });
        }
        Ok(Self {
            channels: channels.to_vec(),
            records,
            skipped,
            summaries,
        })
    }

    /// Decodes record `idx` and returns its selected channels, `[channels × samples]`.
    pub fn load(&self, idx: usize) -> Result<Tensor<f32>> {
        let r = &self.records[idx];
        let bytes = std::fs::read(&r.path).map_err(|e| Error::io(&r.path, e))?;
        let edf = parse_edf(&bytes)?;
        Recording::from_edf(&edf)?.select_channels(&self.channels)
    }

    pub fn sample_rate(&self) -> Option<f64> {
        self.records.first().map(|r| r.sample_rate)
    }
}
