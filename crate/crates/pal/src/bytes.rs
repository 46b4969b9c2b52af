//! Little-endian cursor that reports where decoding failed.

use std::path::{Path, PathBuf};

use crate::error::PalError;

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], path: &Path) -> Self {
        Reader {
            buf,
            pos: 0,
            path: path.to_path_buf(),
        }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    /// Format error located at `offset`.
    pub fn error_at(&self, offset: u64, message: impl Into<String>) -> PalError {
        PalError::Format {
            path: self.path.clone(),
            offset,
            message: message.into(),
        }
    }

    pub fn error(&self, message: impl Into<String>) -> PalError {
        self.error_at(self.offset(), message)
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], PalError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(self.error(format!(
                "truncated {what}: need {n} bytes, {} left",
                self.buf.len() - self.pos
            ))),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N], PalError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self, what: &str) -> Result<u8, PalError> {
        Ok(self.array::<1>(what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32, PalError> {
        self.array(what).map(u32::from_le_bytes)
    }

    pub fn u64(&mut self, what: &str) -> Result<u64, PalError> {
        self.array(what).map(u64::from_le_bytes)
    }

    pub fn f32(&mut self, what: &str) -> Result<f32, PalError> {
        self.array(what).map(f32::from_le_bytes)
    }

    pub fn f64(&mut self, what: &str) -> Result<f64, PalError> {
        self.array(what).map(f64::from_le_bytes)
    }
}

pub(crate) fn write_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn write_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// `usize` to a `u32` header field.
pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32, PalError> {
    u32::try_from(v).map_err(|_| PalError::Config(format!("{what} {v} does not fit in 32 bits")))
}
