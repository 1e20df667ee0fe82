//! Binary model checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic         8 bytes "IRNNCKPT"
//! version       u32     1
//! kind          u8      0 indrnn, 1 lstm, 2 cnn
//! dtype         u8      element width in bytes (4 or 8)
//! config        u32 length + JSON model specification
//! preprocess    u32 length + JSON preprocessing block
//! params        u32 count, then per tensor:
//!                 u16 length + UTF-8 name, u32 rank, u64 per dimension, elements
//! layer state   per layer in order: batch norm writes u8 ready flag, running
//!               mean and running variance (tensor encoding without name);
//!               IndRNN writes its f64 recurrent clip; other layers write nothing
//! ```

use crate::error::{Error, Result};
use crate::experiments::Preprocess;
use crate::layers::Layer;
use crate::model::{Model, ModelSpec};
use crate::numerics::{Scalar, SeededRng, Tensor};

const MAGIC: &[u8; 8] = b"IRNNCKPT";
pub const FORMAT_VERSION: u32 = 1;

fn kind_tag(spec: &ModelSpec) -> u8 {
    match spec {
        ModelSpec::IndRnn(_) => 0,
        ModelSpec::Lstm(_) => 1,
        ModelSpec::Cnn(_) => 2,
    }
}

fn put_blob(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

fn put_tensor<T: Scalar>(out: &mut Vec<u8>, t: &Tensor<T>) {
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(out);
    }
}

pub fn encode_checkpoint<T: Scalar>(model: &Model<T>, preprocess: &Preprocess) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind_tag(model.spec()));
    out.push(T::BYTES);
    put_blob(&mut out, &to_json(model.spec())?);
    put_blob(&mut out, &to_json(preprocess)?);
    let blocks = model.param_blocks();
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, t) in blocks {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        put_tensor(&mut out, t);
    }
    for layer in model.layers() {
        match layer {
            Layer::BatchNorm(bn) => {
                out.push(u8::from(bn.stats_ready));
                put_tensor(&mut out, &bn.running_mean);
                put_tensor(&mut out, &bn.running_var);
            }
            Layer::IndRnn(p) => out.extend_from_slice(&p.recurrent_clip.to_le_bytes()),
            _ => {}
        }
    }
    Ok(out)
}

fn to_json<S: serde::Serialize>(v: &S) -> Result<Vec<u8>> {
    serde_json::to_vec(v).map_err(|e| bad(e.to_string()))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| bad(format!(
            "truncated at byte {} (need {n} more)",
            self.pos
        )))?;
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

    fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn tensor<T: Scalar>(&mut self) -> Result<Tensor<T>> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(bad(format!("tensor rank {rank} at byte {}", self.pos - 4)));
        }
        let shape = (0..rank).map(|_| Ok(self.u64()? as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let w = T::BYTES as usize;
        let raw = self.take(n.checked_mul(w).ok_or_else(|| bad("tensor size overflow".into()))?)?;
        Tensor::new(shape, raw.chunks_exact(w).map(T::read_le).collect())
    }
}

fn bad(reason: String) -> Error {
    Error::Format {
        kind: "checkpoint",
        reason,
    }
}

/// Decodes a checkpoint written with element type `T`.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(Model<T>, Preprocess)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind = r.u8()?;
    let dtype = r.u8()?;
    if dtype != T::BYTES {
        return Err(bad(format!("stored with {dtype}-byte elements, requested {}", T::BYTES)));
    }
    let spec: ModelSpec = serde_json::from_slice(r.blob()?).map_err(|e| bad(format!("config block: {e}")))?;
    if kind_tag(&spec) != kind {
        return Err(bad(format!("kind tag {kind} disagrees with config {}", spec.kind_name())));
    }
    let pre: Preprocess =
        serde_json::from_slice(r.blob()?).map_err(|e| bad(format!("preprocessing block: {e}")))?;
    let mut model = Model::<T>::build(&spec, &mut SeededRng::new(0))?;
    let names: Vec<String> = model.param_blocks().into_iter().map(|(n, _)| n).collect();
    let count = r.u32()? as usize;
    if count != names.len() {
        return Err(bad(format!("{count} parameter tensors, model has {}", names.len())));
    }
    let mut loaded = Vec::with_capacity(count);
    for expected in &names {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| bad("parameter name not UTF-8".into()))?;
        if name != expected {
            return Err(bad(format!("parameter {name:?} where {expected:?} was expected")));
        }
        loaded.push(r.tensor::<T>()?);
    }
    for ((dst, src), name) in model.params_mut().into_iter().zip(loaded).zip(&names) {
        if dst.shape() != src.shape() {
            return Err(bad(format!("{name}: shape {:?}, model expects {:?}", src.shape(), dst.shape())));
        }
        *dst = src;
    }
    for layer in model.layers_mut() {
        match layer {
            Layer::BatchNorm(bn) => {
                let ready = r.u8()? != 0;
                let mean = r.tensor::<T>()?;
                let var = r.tensor::<T>()?;
                bn.load_running_stats(mean, var)?;
                bn.stats_ready = ready;
            }
            Layer::IndRnn(p) => p.recurrent_clip = f64::from_le_bytes(r.take(8)?.try_into().unwrap()),
            _ => {}
        }
    }
    if r.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((model, pre))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Mode;
    use crate::model::{CnnConfig, LstmConfig, ModelConfig};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = SeededRng::new(4);
        let mut cfg = ModelConfig::with_depth(2);
        cfg.block_hidden_sizes = vec![5, 4];
        cfg.input_channels = 3;
        cfg.fc1_hidden = 6;
        let mut m = Model::<f32>::build(&ModelSpec::IndRnn(cfg), &mut rng).unwrap();
        let x = Tensor::from_fn(&[8, 4, 3], |i| ((i * 37 % 11) as f32 - 5.0) / 3.0);
        let (_, cache) = m.forward(&x, Mode::Train).unwrap();
        m.commit_running_stats(&cache);
        let pre = Preprocess {
            decimation: 16,
            channel_mean: vec![0.1, -2.5, 1e-7],
            channel_std: vec![1.0, 3.3, 0.7],
        };
        let bytes = encode_checkpoint(&m, &pre).unwrap();
        let (back, pre2) = decode_checkpoint::<f32>(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(pre2, pre);
        assert_eq!(encode_checkpoint(&back, &pre2).unwrap(), bytes);
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
        assert!(decode_checkpoint::<f64>(&bytes).is_err());
        assert!(decode_checkpoint::<f32>(&bytes[..bytes.len() - 2]).is_err());
    }

    #[test]
    fn baselines_round_trip() {
        let mut rng = SeededRng::new(1);
        let specs = [
            ModelSpec::Lstm(LstmConfig {
                input_channels: 2,
                hidden: 3,
                dense: 4,
                num_classes: 2,
            }),
            ModelSpec::Cnn(CnnConfig {
                input_channels: 2,
                conv_channels: vec![3, 4],
                fc_hidden: vec![5],
                ..CnnConfig::default()
            }),
        ];
        for spec in specs {
            let m = Model::<f64>::build(&spec, &mut rng).unwrap();
            let bytes = encode_checkpoint(&m, &Preprocess::identity(1)).unwrap();
            assert_eq!(decode_checkpoint::<f64>(&bytes).unwrap().0, m);
        }
    }
}
