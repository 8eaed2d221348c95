//! `SPDS` interchange file: preprocessed vectors plus pair indices.
//!
//! Little-endian layout: magic `SPDS`, version `u32 = 1`, `dim: u32`,
//! `n_vectors: u64`, `n_vectors × dim` `f32` values, `n_pairs: u64`, then
//! `n_pairs` records of `(a: u64, b: u64, y: u8)`.

use std::path::Path;

use crate::dataio::{Dataset, PairIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"SPDS";
pub const VERSION: u32 = 1;

pub fn encode_dataset<T: Scalar>(ds: &Dataset<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + ds.raw_vectors().len() * 4 + ds.pairs().len() * 17);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for v in ds.raw_vectors() {
        out.extend_from_slice(&(v.widen() as f32).to_le_bytes());
    }
    out.extend_from_slice(&(ds.pairs().len() as u64).to_le_bytes());
    for p in ds.pairs() {
        out.extend_from_slice(&(p.a as u64).to_le_bytes());
        out.extend_from_slice(&(p.b as u64).to_le_bytes());
        out.push(p.is_match as u8);
    }
    out
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "{}: truncated at byte offset {} (needed {n} more bytes, {} left)",
                self.what,
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes after offset {}",
                self.what,
                self.buf.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }

    pub(crate) fn fail(&self, at: usize, msg: impl std::fmt::Display) -> Error {
        Error::Format(format!("{}: {msg} at byte offset {at}", self.what))
    }
}

pub fn decode_dataset<T: Scalar>(bytes: &[u8]) -> Result<Dataset<T>> {
    let mut r = Reader::new(bytes, "dataset file");
    if r.take(4)? != MAGIC {
        return Err(r.fail(0, "bad magic (expected SPDS)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.fail(4, format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(r.fail(8, "zero dimension"));
    }
    let n_vectors = r.u64()? as usize;
    let needed = n_vectors.checked_mul(dim).and_then(|v| v.checked_mul(4));
    if needed.is_none_or(|n| n > bytes.len()) {
        return Err(r.fail(r.offset(), format!("{n_vectors} vectors of dimension {dim} exceed file size")));
    }
    let mut vectors = Vec::with_capacity(n_vectors * dim);
    for _ in 0..n_vectors * dim {
        let at = r.offset();
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(r.fail(at, "non-finite value"));
        }
        vectors.push(T::narrow(v as f64));
    }
    let n_pairs = r.u64()? as usize;
    if n_pairs.checked_mul(17).is_none_or(|n| n > bytes.len()) {
        return Err(r.fail(r.offset(), format!("{n_pairs} pairs exceed file size")));
    }
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let at = r.offset();
        let a = r.u64()? as usize;
        let b = r.u64()? as usize;
        let y = r.u8()?;
        if a >= n_vectors || b >= n_vectors {
            return Err(r.fail(at, format!("pair ({a}, {b}) out of range for {n_vectors} vectors")));
        }
        if y > 1 {
            return Err(r.fail(at + 16, format!("label {y} is not 0 or 1")));
        }
        pairs.push(PairIndex::new(a, b, y == 1));
    }
    r.finish()?;
    Dataset::new(dim, vectors, pairs)
}

pub fn write_dataset<T: Scalar>(path: &Path, ds: &Dataset<T>) -> Result<()> {
    crate::pipeline::write_atomic(path, &encode_dataset(ds))
}

pub fn read_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}
