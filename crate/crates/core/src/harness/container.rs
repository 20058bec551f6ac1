//! Binary containers.
//!
//! `SBT1` (one tensor):
//! ```text
//! "SBT1" | dtype: u8 (0 = f32) | rank: u8 | dims: rank × u32 LE | payload: row-major LE
//! ```
//!
//! `SBP1` (path logits):
//! ```text
//! "SBP1" | records: u32 LE
//! per record:
//!   x1 id, x2 id, band name   (each u32 LE byte length + UTF-8)
//!   target class: u32 | n: u32 | K: u32 | norm_distance: f64
//!   lambdas: n × f64 | logits: n·K × f64 (row-major)
//! ```
//!
//! `SBM1` (model): `"SBM1" | u32 length + JSON architecture | u32 count |
//! per parameter: u32 length + UTF-8 name, then an SBT1 blob`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::EncoderModel;
use crate::sbmetrics::PathLogits;
use crate::spectral::PairId;
use crate::tensor::Tensor;

pub const TENSOR_MAGIC: &[u8; 4] = b"SBT1";
pub const PATH_LOGITS_MAGIC: &[u8; 4] = b"SBP1";
pub const MODEL_MAGIC: &[u8; 4] = b"SBM1";
pub const DTYPE_F32: u8 = 0;

struct Reader<R> {
    inner: R,
    format: &'static str,
    record: Option<usize>,
}

impl<R: Read> Reader<R> {
    fn new(inner: R, format: &'static str) -> Self {
        Self {
            inner,
            format,
            record: None,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(self.format, self.record, msg)
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| self.err(format!("truncated input: {e}")))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = Vec::new();
        (&mut self.inner)
            .take(len as u64)
            .read_to_end(&mut buf)
            .map_err(|e| self.err(e.to_string()))?;
        if buf.len() != len {
            return Err(self.err("truncated string"));
        }
        String::from_utf8(buf).map_err(|_| self.err("string is not valid UTF-8"))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got: [u8; 4] = self.bytes()?;
        if &got != expected {
            return Err(self.err(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::format(self.format, None, "trailing bytes after last record")),
            Err(e) => Err(self.err(e.to_string())),
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Domain(format!("{what} {v} does not fit in 32 bits")))
}

/// Serializes `tensor` as SBT1 with 32-bit payload.
pub fn encode_tensor(tensor: &Tensor) -> Result<Vec<u8>> {
    if tensor.rank() > u8::MAX as usize {
        return Err(Error::Domain(format!("rank {} too large", tensor.rank())));
    }
    let mut out = Vec::with_capacity(6 + 4 * tensor.rank() + 4 * tensor.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(DTYPE_F32);
    out.push(tensor.rank() as u8);
    for &d in &tensor.shape {
        put_u32(&mut out, to_u32(d, "dimension")?);
    }
    for &v in &tensor.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn read_tensor_body<R: Read>(r: &mut Reader<R>) -> Result<Tensor> {
    r.magic(TENSOR_MAGIC)?;
    let dtype = r.u8()?;
    if dtype != DTYPE_F32 {
        return Err(r.err(format!("unsupported dtype code {dtype}")));
    }
    let rank = r.u8()? as usize;
    let shape = (0..rank)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| r.err("tensor size overflows"))?;
    let mut data = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        data.push(f64::from(r.f32()?));
    }
    Tensor::new(shape, data)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut r = Reader::new(bytes, "SBT1");
    let t = read_tensor_body(&mut r)?;
    r.expect_eof()?;
    Ok(t)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_tensor(tensor)?).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    decode_tensor(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn encode_path_logits(records: &[PathLogits]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(PATH_LOGITS_MAGIC);
    put_u32(&mut out, to_u32(records.len(), "record count")?);
    for (i, p) in records.iter().enumerate() {
        p.validate().map_err(|msg| Error::format("SBP1", Some(i), msg))?;
        put_str(&mut out, &p.pair.first);
        put_str(&mut out, &p.pair.second);
        put_str(&mut out, &p.band);
        put_u32(&mut out, to_u32(p.target_class, "target class")?);
        put_u32(&mut out, to_u32(p.steps(), "step count")?);
        put_u32(&mut out, to_u32(p.classes(), "class count")?);
        put_f64(&mut out, p.norm_distance);
        for &l in &p.lambdas {
            put_f64(&mut out, l);
        }
        for &v in p.logits.iter().flatten() {
            put_f64(&mut out, v);
        }
    }
    Ok(out)
}

fn read_path_logits<R: Read>(inner: R) -> Result<Vec<PathLogits>> {
    let mut r = Reader::new(inner, "SBP1");
    r.magic(PATH_LOGITS_MAGIC)?;
    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        r.record = Some(i);
        let first = r.string()?;
        let second = r.string()?;
        let band = r.string()?;
        let target_class = r.u32()? as usize;
        let n = r.u32()? as usize;
        let k = r.u32()? as usize;
        let norm_distance = r.f64()?;
        if n < 2 {
            return Err(r.err(format!("path has {n} step(s); at least 2 are required")));
        }
        if k == 0 {
            return Err(r.err("record has zero classes"));
        }
        let lambdas = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let mut logits = Vec::with_capacity(n);
        for _ in 0..n {
            logits.push((0..k).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        }
        let record = PathLogits {
            lambdas,
            logits,
            target_class,
            pair: PairId { first, second },
            band,
            norm_distance,
        };
        record.validate().map_err(|msg| r.err(msg))?;
        records.push(record);
    }
    r.record = None;
    r.expect_eof()?;
    Ok(records)
}

pub fn decode_path_logits(bytes: &[u8]) -> Result<Vec<PathLogits>> {
    read_path_logits(bytes)
}

pub fn write_path_logits(path: impl AsRef<Path>, records: &[PathLogits]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_path_logits(records)?;
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    f.write_all(&bytes)
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads and validates every record of an SBP1 file.
pub fn ingest_path_logits(path: impl AsRef<Path>) -> Result<Vec<PathLogits>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_path_logits(BufReader::new(f))
}

pub fn encode_model(model: &EncoderModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    let arch = serde_json::to_string(model)?;
    put_str(&mut out, &arch);
    let mut copy = model.clone();
    let params = copy.params_mut();
    put_u32(&mut out, to_u32(params.len(), "parameter count")?);
    for (name, t) in params {
        put_str(&mut out, &name);
        out.extend(encode_tensor(t)?);
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<EncoderModel> {
    let mut r = Reader::new(bytes, "SBM1");
    r.magic(MODEL_MAGIC)?;
    let arch = r.string()?;
    let mut model: EncoderModel = serde_json::from_str(&arch)?;
    let count = r.u32()? as usize;
    let mut loaded = Vec::with_capacity(count);
    for i in 0..count {
        r.record = Some(i);
        let name = r.string()?;
        let t = read_tensor_body(&mut r)?;
        loaded.push((name, t));
    }
    r.record = None;
    r.expect_eof()?;
    {
        let slots = model.params_mut();
        if slots.len() != loaded.len() {
            return Err(Error::format(
                "SBM1",
                None,
                format!("architecture has {} parameters, file has {}", slots.len(), loaded.len()),
            ));
        }
        for (i, ((name, slot), (got_name, t))) in slots.into_iter().zip(loaded).enumerate() {
            if name != got_name || slot.shape != t.shape {
                return Err(Error::format(
                    "SBM1",
                    Some(i),
                    format!("expected {name} {:?}, found {got_name} {:?}", slot.shape, t.shape),
                ));
            }
            *slot = t;
        }
    }
    EncoderModel::new(model.name, model.input_shape, model.layers)
}

pub fn save_model(path: impl AsRef<Path>, model: &EncoderModel) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EncoderModel> {
    let path = path.as_ref();
    decode_model(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
