//! Sources of segment samples: lazily decoded corpora and the binary segment cache.
//!
//! Cache layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "IRNSEGC\0"
//! version      u32      1
//! sample_rate  f64      Hz of the undecimated recordings
//! decimation   u32      block-mean factor already applied to stored samples
//! channels     u32 count, then per channel: u16 byte length + UTF-8 label
//! segments     u64 count, then per segment:
//!   case id    u16 length + UTF-8
//!   file id    u16 length + UTF-8
//!   start      u64      first sample (undecimated)
//!   length     u64      window length (undecimated samples)
//!   label      u8       0 non-seizure, 1 seizure
//!   overlap    f64      seizure content in seconds
//!   steps      u32      stored time steps
//!   samples    steps × channels f32, time-major
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::segment::{Label, Segment};
use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::exec;
use crate::fsutil::write_atomic_with;
use crate::training::Sample;

const MAGIC: &[u8; 8] = b"IRNSEGC\0";
pub const FORMAT_VERSION: u32 = 1;

/// Block-mean decimation of a `[channels × n]` row-major window into a
/// time-major `[n / factor × channels]` vector. A trailing partial block is dropped.
pub fn decimate_window(rows: &[f32], channels: usize, n: usize, factor: usize) -> Vec<f32> {
    let steps = n / factor;
    let mut out = vec![0.0f32; steps * channels];
    let inv = 1.0 / factor as f64;
    for c in 0..channels {
        let row = &rows[c * n..(c + 1) * n];
        for t in 0..steps {
            let s: f64 = row[t * factor..(t + 1) * factor].iter().map(|&v| v as f64).sum();
            out[t * channels + c] = (s * inv) as f32;
        }
    }
    out
}

pub trait SegmentStore: Sync {
    fn segments(&self) -> &[Segment];
    fn channels(&self) -> &[String];
    fn sample_rate(&self) -> f64;
    /// Samples for `indices` in the given order, decimated by `decimation`
    /// relative to the original sample rate.
    fn fetch(&self, indices: &[usize], decimation: usize) -> Result<Vec<Sample>>;
}

/// Reads windows straight from the corpus EDF files, decoding each file once per fetch.
pub struct CorpusStore<'a> {
    corpus: &'a Corpus,
    segments: Vec<Segment>,
}

impl<'a> CorpusStore<'a> {
    pub fn new(corpus: &'a Corpus, segments: Vec<Segment>) -> Self {
        Self { corpus, segments }
    }
}

impl SegmentStore for CorpusStore<'_> {
    fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn channels(&self) -> &[String] {
        &self.corpus.channels
    }

    fn sample_rate(&self) -> f64 {
        self.corpus.sample_rate().unwrap_or(0.0)
    }

    fn fetch(&self, indices: &[usize], decimation: usize) -> Result<Vec<Sample>> {
        if decimation == 0 {
            return Err(Error::config("decimation must be at least 1"));
        }
        let mut by_source: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (pos, &i) in indices.iter().enumerate() {
            let seg = self.segments.get(i).ok_or_else(|| Error::config(format!("segment {i} out of range")))?;
            by_source.entry(seg.source).or_default().push((pos, i));
        }
        let groups: Vec<(usize, Vec<(usize, usize)>)> = by_source.into_iter().collect();
        let ch = self.corpus.channels.len();
        let decoded = exec::map_slice(&groups, |_, (source, members)| -> Result<Vec<(usize, Sample)>> {
            let rec = self.corpus.load(*source)?;
            let total = rec.shape()[1];
            let mut out = Vec::with_capacity(members.len());
            for &(pos, i) in members {
                let seg = &self.segments[i];
                let (a, len) = (seg.start_sample, seg.length_samples);
                if a + len > total {
                    return Err(Error::config(format!("segment past the end of {}", seg.file_id)));
                }
                let mut window = Vec::with_capacity(ch * len);
                for c in 0..ch {
                    window.extend_from_slice(&rec.data()[c * total + a..c * total + a + len]);
                }
                let values = decimate_window(&window, ch, len, decimation);
                out.push((pos, Sample::new(values, len / decimation, ch, seg.label.class_index())?));
            }
            Ok(out)
        });
        let mut slots: Vec<Option<Sample>> = vec![None; indices.len()];
        for group in decoded {
            for (pos, s) in group? {
                slots[pos] = Some(s);
            }
        }
        Ok(slots.into_iter().map(|s| s.expect("every position filled")).collect())
    }
}

/// Segments with their samples held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentCache {
    pub channels: Vec<String>,
    pub sample_rate: f64,
    pub decimation: usize,
    pub segments: Vec<Segment>,
    /// Time-major samples per segment.
    pub samples: Vec<Vec<f32>>,
}

fn put_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| std::io::Error::other("string longer than 65535 bytes"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn write_header<W: Write>(w: &mut W, channels: &[String], rate: f64, decimation: usize, count: usize) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&rate.to_le_bytes())?;
    w.write_all(&(decimation as u32).to_le_bytes())?;
    w.write_all(&(channels.len() as u32).to_le_bytes())?;
    for c in channels {
        put_str(w, c)?;
    }
    w.write_all(&(count as u64).to_le_bytes())
}

fn write_record<W: Write>(w: &mut W, seg: &Segment, steps: usize, values: &[f32]) -> std::io::Result<()> {
    put_str(w, &seg.case_id)?;
    put_str(w, &seg.file_id)?;
    w.write_all(&(seg.start_sample as u64).to_le_bytes())?;
    w.write_all(&(seg.length_samples as u64).to_le_bytes())?;
    w.write_all(&[seg.label.class_index() as u8])?;
    w.write_all(&seg.seizure_overlap_seconds.to_le_bytes())?;
    w.write_all(&(steps as u32).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Streams every segment of `store` into a cache file at `path`, fetching
/// `chunk` segments at a time.
pub fn write_segment_cache(path: &Path, store: &dyn SegmentStore, decimation: usize, chunk: usize) -> Result<()> {
    let segs = store.segments();
    write_atomic_with(path, |w| {
        let io = |e| Error::io(path, e);
        write_header(w, store.channels(), store.sample_rate(), decimation, segs.len()).map_err(io)?;
        let all: Vec<usize> = (0..segs.len()).collect();
        for part in all.chunks(chunk.max(1)) {
            let samples = store.fetch(part, decimation)?;
            for (&i, s) in part.iter().zip(&samples) {
                write_record(w, &segs[i], s.steps, &s.values).map_err(io)?;
            }
        }
        Ok(())
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let out = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| Error::Format {
            kind: "segment cache",
            reason: format!("truncated at byte {}: need {n} more bytes", self.pos),
        })?;
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format {
            kind: "segment cache",
            reason: format!("invalid UTF-8 at byte {at}"),
        })
    }
}

impl SegmentCache {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format {
                kind: "segment cache",
                reason: "bad magic".into(),
            });
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                kind: "segment cache",
                reason: format!("unsupported version {version}"),
            });
        }
        let sample_rate = r.f64()?;
        let decimation = r.u32()? as usize;
        let nch = r.u32()? as usize;
        let channels = (0..nch).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let count = r.u64()? as usize;
        let mut segments = Vec::with_capacity(count.min(1 << 20));
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        let mut sources: BTreeMap<(String, String), usize> = BTreeMap::new();
        for _ in 0..count {
            let case_id = r.string()?;
            let file_id = r.string()?;
            let start_sample = r.u64()? as usize;
            let length_samples = r.u64()? as usize;
            let label = match r.u8()? {
                0 => Label::NonSeizure,
                1 => Label::Seizure,
                other => {
                    return Err(Error::Format {
                        kind: "segment cache",
                        reason: format!("label byte {other} at {}", r.pos - 1),
                    })
                }
            };
            let overlap = r.f64()?;
            let steps = r.u32()? as usize;
            let raw = r.take(steps * nch * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let next = sources.len();
            let source = *sources.entry((case_id.clone(), file_id.clone())).or_insert(next);
            segments.push(Segment {
                case_id,
                file_id,
                source,
                start_sample,
                length_samples,
                label,
                seizure_overlap_seconds: overlap,
            });
            samples.push(values);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format {
                kind: "segment cache",
                reason: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(Self {
            channels,
            sample_rate,
            decimation: decimation.max(1),
            segments,
            samples,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let ch = self.channels.len();
        write_header(&mut out, &self.channels, self.sample_rate, self.decimation, self.segments.len())
            .expect("writing to memory");
        for (seg, v) in self.segments.iter().zip(&self.samples) {
            write_record(&mut out, seg, v.len() / ch.max(1), v).expect("writing to memory");
        }
        out
    }
}

impl SegmentStore for SegmentCache {
    fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn channels(&self) -> &[String] {
        &self.channels
    }

    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn fetch(&self, indices: &[usize], decimation: usize) -> Result<Vec<Sample>> {
        if decimation == 0 || !decimation.is_multiple_of(self.decimation) {
            return Err(Error::config(format!(
                "decimation {decimation} is not a multiple of the cache's {}",
                self.decimation
            )));
        }
        let extra = decimation / self.decimation;
        let ch = self.channels.len();
        indices
            .iter()
            .map(|&i| {
                let seg = self.segments.get(i).ok_or_else(|| Error::config(format!("segment {i} out of range")))?;
                let v = &self.samples[i];
                let steps = v.len() / ch;
                let values = if extra == 1 {
                    v.clone()
                } else {
                    // stored time-major; transpose to rows for the shared helper
                    let mut rows = vec![0.0f32; v.len()];
                    for t in 0..steps {
                        for c in 0..ch {
                            rows[c * steps + t] = v[t * ch + c];
                        }
                    }
                    decimate_window(&rows, ch, steps, extra)
                };
                Sample::new(values, steps / extra, ch, seg.label.class_index())
            })
            .collect()
    }
}
