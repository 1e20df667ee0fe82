//! European Data Format reader and writer (plain EDF, 16-bit samples).

use crate::error::{Error, Result};

const FIXED_HEADER: usize = 256;
const PER_SIGNAL: usize = 256;

/// Per-signal header block.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub reserved: String,
    pub num_records: usize,
    pub record_duration: f64,
    pub signals: Vec<SignalSpec>,
}

impl EdfHeader {
    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    /// Bytes of one data record.
    pub fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record * 2).sum()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.num_records as f64 * self.record_duration
    }

    pub fn sample_rate(&self, signal: usize) -> f64 {
        self.signals[signal].samples_per_record as f64 / self.record_duration
    }
}

/// Header plus raw digital samples, one vector per signal.
#[derive(Clone, Debug, PartialEq)]
pub struct EdfFile {
    pub header: EdfHeader,
    pub samples: Vec<Vec<i16>>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, width: usize, what: &str) -> Result<&'a str> {
        let start = self.pos;
        let raw = self.bytes.get(start..start + width).ok_or_else(|| Error::Edf {
            offset: self.bytes.len(),
            reason: format!(
                "header truncated reading {what}: need {} bytes, have {}",
                start + width,
                self.bytes.len()
            ),
        })?;
        self.pos += width;
        let s = std::str::from_utf8(raw).map_err(|_| Error::Edf {
            offset: start,
            reason: format!("{what} is not ASCII"),
        })?;
        Ok(s.trim_end_matches([' ', '\0']).trim_start())
    }

    fn number<N: std::str::FromStr>(&mut self, width: usize, what: &str) -> Result<N> {
        let offset = self.pos;
        let s = self.field(width, what)?;
        s.parse().map_err(|_| Error::Edf {
            offset,
            reason: format!("{what} {s:?} is not a number"),
        })
    }
}

/// Parses only the fixed and per-signal header blocks.
pub fn parse_edf_header(bytes: &[u8]) -> Result<EdfHeader> {
    let mut c = Cursor { bytes, pos: 0 };
    let version = c.field(8, "version")?.to_string();
    if version != "0" {
        return Err(Error::Edf {
            offset: 0,
            reason: format!("unsupported version field {version:?}"),
        });
    }
    let patient_id = c.field(80, "patient id")?.to_string();
    let recording_id = c.field(80, "recording id")?.to_string();
    let start_date = c.field(8, "start date")?.to_string();
    let start_time = c.field(8, "start time")?.to_string();
    let header_offset = c.pos;
    let header_bytes: usize = c.number(8, "header byte count")?;
    let reserved = c.field(44, "reserved")?.to_string();
    let records_offset = c.pos;
    let num_records: i64 = c.number(8, "number of data records")?;
    if num_records < 0 {
        return Err(Error::Edf {
            offset: records_offset,
            reason: format!("unsupported data record count {num_records}"),
        });
    }
    let duration_offset = c.pos;
    let record_duration: f64 = c.number(8, "data record duration")?;
    if !(record_duration > 0.0) || !record_duration.is_finite() {
        return Err(Error::Edf {
            offset: duration_offset,
            reason: format!("record duration {record_duration} must be positive"),
        });
    }
    let ns_offset = c.pos;
    let ns: usize = c.number(4, "number of signals")?;
    if ns == 0 {
        return Err(Error::Edf {
            offset: ns_offset,
            reason: "file declares no signals".into(),
        });
    }
    if header_bytes != FIXED_HEADER + PER_SIGNAL * ns {
        return Err(Error::Edf {
            offset: header_offset,
            reason: format!(
                "header size {header_bytes} inconsistent with {ns} signals (expected {})",
                FIXED_HEADER + PER_SIGNAL * ns
            ),
        });
    }
    if bytes.len() < header_bytes {
        return Err(Error::Edf {
            offset: bytes.len(),
            reason: format!("header truncated: expected {header_bytes} bytes, found {}", bytes.len()),
        });
    }

    // Signal fields are stored column-wise: all labels, then all transducers, ...
    fn column<T>(
        c: &mut Cursor<'_>,
        ns: usize,
        mut read: impl FnMut(&mut Cursor<'_>) -> Result<T>,
    ) -> Result<Vec<T>> {
        (0..ns).map(|_| read(c)).collect()
    }
    let labels = column(&mut c, ns, |c| Ok(c.field(16, "label")?.to_string()))?;
    let transducers = column(&mut c, ns, |c| Ok(c.field(80, "transducer")?.to_string()))?;
    let dims = column(&mut c, ns, |c| Ok(c.field(8, "physical dimension")?.to_string()))?;
    let pmin = column(&mut c, ns, |c| c.number::<f64>(8, "physical minimum"))?;
    let pmax = column(&mut c, ns, |c| c.number::<f64>(8, "physical maximum"))?;
    let dmin_offset = c.pos;
    let dmin = column(&mut c, ns, |c| c.number::<i32>(8, "digital minimum"))?;
    let dmax = column(&mut c, ns, |c| c.number::<i32>(8, "digital maximum"))?;
    let prefilter = column(&mut c, ns, |c| Ok(c.field(80, "prefiltering")?.to_string()))?;
    let spr_offset = c.pos;
    let spr = column(&mut c, ns, |c| c.number::<usize>(8, "samples per record"))?;
    let sreserved = column(&mut c, ns, |c| Ok(c.field(32, "signal reserved")?.to_string()))?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if dmin[i] >= dmax[i] || dmin[i] < i16::MIN as i32 || dmax[i] > i16::MAX as i32 {
            return Err(Error::Edf {
                offset: dmin_offset + 8 * i,
                reason: format!(
                    "signal {} ({}): digital range [{}, {}] invalid",
                    i + 1,
                    labels[i],
                    dmin[i],
                    dmax[i]
                ),
            });
        }
        if pmin[i] == pmax[i] || !pmin[i].is_finite() || !pmax[i].is_finite() {
            return Err(Error::Edf {
                offset: dmin_offset - 16 * ns + 8 * i,
                reason: format!("signal {} ({}): physical minimum equals maximum", i + 1, labels[i]),
            });
        }
        if spr[i] == 0 {
            return Err(Error::Edf {
                offset: spr_offset + 8 * i,
                reason: format!("signal {} ({}): zero samples per record", i + 1, labels[i]),
            });
        }
        signals.push(SignalSpec {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dmin[i],
            digital_max: dmax[i],
            prefiltering: prefilter[i].clone(),
            samples_per_record: spr[i],
            reserved: sreserved[i].clone(),
        });
    }
    Ok(EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes,
        reserved,
        num_records: num_records as usize,
        record_duration,
        signals,
    })
}

/// Parses a complete EDF byte stream. Trailing bytes past the last declared
/// record are ignored.
pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile> {
    let header = parse_edf_header(bytes)?;
    let record = header.record_bytes();
    let expected = header.header_bytes + header.num_records * record;
    if bytes.len() < expected {
        return Err(Error::Edf {
            offset: bytes.len(),
            reason: format!("file truncated: expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let mut samples: Vec<Vec<i16>> = header
        .signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * header.num_records))
        .collect();
    let mut pos = header.header_bytes;
    for _ in 0..header.num_records {
        for (sig, out) in header.signals.iter().zip(samples.iter_mut()) {
            let n = sig.samples_per_record * 2;
            out.extend(
                bytes[pos..pos + n]
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]])),
            );
            pos += n;
        }
    }
    Ok(EdfFile { header, samples })
}

fn put(out: &mut Vec<u8>, value: &str, width: usize, what: &str) -> Result<()> {
    if value.len() > width || !value.is_ascii() {
        return Err(Error::Format {
            kind: "EDF",
            reason: format!("{what} {value:?} does not fit {width} ASCII bytes"),
        });
    }
    out.extend_from_slice(value.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - value.len()));
    Ok(())
}

fn put_f64(out: &mut Vec<u8>, v: f64, what: &str) -> Result<()> {
    put(out, &format!("{v}"), 8, what)
}

/// Serializes `file`. Fails if a field does not fit its fixed width or the
/// sample counts disagree with the header.
pub fn write_edf(file: &EdfFile) -> Result<Vec<u8>> {
    let h = &file.header;
    let ns = h.signals.len();
    if file.samples.len() != ns {
        return Err(Error::Format {
            kind: "EDF",
            reason: format!("{} sample vectors for {ns} signals", file.samples.len()),
        });
    }
    for (s, data) in h.signals.iter().zip(&file.samples) {
        if data.len() != s.samples_per_record * h.num_records {
            return Err(Error::Format {
                kind: "EDF",
                reason: format!(
                    "signal {} has {} samples, header implies {}",
                    s.label,
                    data.len(),
                    s.samples_per_record * h.num_records
                ),
            });
        }
    }
    let header_bytes = FIXED_HEADER + PER_SIGNAL * ns;
    let mut out = Vec::with_capacity(header_bytes + h.num_records * h.record_bytes());
    put(&mut out, &h.version, 8, "version")?;
    put(&mut out, &h.patient_id, 80, "patient id")?;
    put(&mut out, &h.recording_id, 80, "recording id")?;
    put(&mut out, &h.start_date, 8, "start date")?;
    put(&mut out, &h.start_time, 8, "start time")?;
    put(&mut out, &header_bytes.to_string(), 8, "header bytes")?;
    put(&mut out, &h.reserved, 44, "reserved")?;
    put(&mut out, &h.num_records.to_string(), 8, "record count")?;
    put_f64(&mut out, h.record_duration, "record duration")?;
    put(&mut out, &ns.to_string(), 4, "signal count")?;
    for s in &h.signals {
        put(&mut out, &s.label, 16, "label")?;
    }
    for s in &h.signals {
        put(&mut out, &s.transducer, 80, "transducer")?;
    }
    for s in &h.signals {
        put(&mut out, &s.physical_dimension, 8, "physical dimension")?;
    }
    for s in &h.signals {
        put_f64(&mut out, s.physical_min, "physical minimum")?;
    }
    for s in &h.signals {
        put_f64(&mut out, s.physical_max, "physical maximum")?;
    }
    for s in &h.signals {
        put(&mut out, &s.digital_min.to_string(), 8, "digital minimum")?;
    }
    for s in &h.signals {
        put(&mut out, &s.digital_max.to_string(), 8, "digital maximum")?;
    }
    for s in &h.signals {
        put(&mut out, &s.prefiltering, 80, "prefiltering")?;
    }
    for s in &h.signals {
        put(&mut out, &s.samples_per_record.to_string(), 8, "samples per record")?;
    }
    for s in &h.signals {
        put(&mut out, &s.reserved, 32, "signal reserved")?;
    }
    debug_assert_eq!(out.len(), header_bytes);
    for r in 0..h.num_records {
        for (s, data) in h.signals.iter().zip(&file.samples) {
            let n = s.samples_per_record;
            for v in &data[r * n..(r + 1) * n] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Linear calibration from digital to physical units. Written as a two-point
/// interpolation so both range endpoints map exactly.
pub fn digital_to_physical(digital: &[i16], spec: &SignalSpec) -> Vec<f32> {
    let (dmin, dmax) = (spec.digital_min as f64, spec.digital_max as f64);
    let span = dmax - dmin;
    digital
        .iter()
        .map(|&d| {
            let t = (d as f64 - dmin) / span;
            (spec.physical_min * (1.0 - t) + spec.physical_max * t) as f32
        })
        .collect()
}

/// Inverse of [`digital_to_physical`], rounding and clamping to the digital range.
pub fn physical_to_digital(physical: &[f32], spec: &SignalSpec) -> Vec<i16> {
    let (dmin, dmax) = (spec.digital_min as f64, spec.digital_max as f64);
    let scale = (dmax - dmin) / (spec.physical_max - spec.physical_min);
    physical
        .iter()
        .map(|&p| {
            let d = ((p as f64 - spec.physical_min) * scale + dmin).round();
            d.clamp(dmin, dmax) as i16
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(label: &str, spr: usize) -> SignalSpec {
        SignalSpec {
            label: label.into(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -3276.8,
            physical_max: 3276.7,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record: spr,
            reserved: String::new(),
        }
    }

    fn two_by_two() -> EdfFile {
        EdfFile {
            header: EdfHeader {
                version: "0".into(),
                patient_id: "X".into(),
                recording_id: "Y".into(),
                start_date: "01.01.01".into(),
                start_time: "00.00.00".into(),
                header_bytes: 768,
                reserved: String::new(),
                num_records: 2,
                record_duration: 1.0,
                signals: vec![signal("FP1-F7", 3), signal("F7-T7", 2)],
            },
            samples: vec![vec![1, -2, 3, 4, i16::MIN, i16::MAX], vec![7, 8, 9, 10]],
        }
    }

    #[test]
    fn round_trip_and_interleaving() {
        let f = two_by_two();
        let bytes = write_edf(&f).unwrap();
        assert_eq!(bytes.len(), 768 + 2 * 10);
        // record 0: signal 0 (3 samples), then signal 1 (2 samples)
        assert_eq!(&bytes[768..774], &[1, 0, 0xfe, 0xff, 3, 0]);
        assert_eq!(&bytes[774..778], &[7, 0, 8, 0]);
        assert_eq!(parse_edf(&bytes).unwrap(), f);
    }

    #[test]
    fn truncation_names_byte_counts() {
        let bytes = write_edf(&two_by_two()).unwrap();
        let err = parse_edf(&bytes[..bytes.len() - 3]).unwrap_err().to_string();
        assert!(err.contains("expected 788 bytes, found 785"), "{err}");
    }

    #[test]
    fn header_size_mismatch() {
        let mut bytes = write_edf(&two_by_two()).unwrap();
        bytes[184..192].copy_from_slice(b"256     ");
        let err = parse_edf(&bytes).unwrap_err().to_string();
        assert!(err.contains("byte 184"), "{err}");
    }

    #[test]
    fn bad_digital_range() {
        let mut f = two_by_two();
        f.header.signals[1].digital_min = 5;
        f.header.signals[1].digital_max = 5;
        let bytes = write_edf(&f).unwrap();
        assert!(parse_edf(&bytes).is_err());
    }

    #[test]
    fn non_numeric_field() {
        let mut bytes = write_edf(&two_by_two()).unwrap();
        bytes[236..244].copy_from_slice(b"two     ");
        let err = parse_edf(&bytes).unwrap_err().to_string();
        assert!(err.contains("byte 236"), "{err}");
    }

    #[test]
    fn calibration() {
        let s = signal("A", 1);
        let p = digital_to_physical(&[0, -32768, 32767], &s);
        assert!(p[0].abs() < 1e-9);
        assert_eq!(p[1], -3276.8f32);
        assert_eq!(p[2], 3276.7f32);
        assert_eq!(physical_to_digital(&p, &s), vec![0, -32768, 32767]);
    }
}
