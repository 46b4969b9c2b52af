//! Binary feature files: per-video frame features for one split, with a
//! JSON sidecar carrying the class names.
//!
//! Layout, all little-endian: magic `FSFE`, version `u32`, split tag `u8`,
//! class count `u32`, sample count `u32`, `d_raw` `u32`, then per sample
//! id `u64`, label `u32`, frame count `u32` and `frames * d_raw` `f32`
//! values in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use pal_core::data::{Dataset, Split, VideoSample};
use pal_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::bytes::{to_u32, write_u32, write_u64, Reader};
use crate::error::{PalError, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"FSFE";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub classes: Vec<String>,
    pub split: Split,
    /// Free-form description of where the features came from.
    pub source: String,
}

/// Sidecar path for a feature file: the same path with a `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Serialize the frame features. Values are stored as `f32`.
pub fn encode_features(ds: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(FEATURE_MAGIC);
    write_u32(&mut out, FEATURE_VERSION);
    out.push(ds.split().tag());
    write_u32(&mut out, to_u32(ds.classes().len(), "class count")?);
    write_u32(&mut out, to_u32(ds.len(), "sample count")?);
    write_u32(&mut out, to_u32(ds.d_raw(), "d_raw")?);
    for s in ds.samples() {
        write_u64(&mut out, s.id);
        write_u32(&mut out, s.label);
        write_u32(&mut out, to_u32(s.frames.rows(), "frame count")?);
        for &v in s.frames.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parse a feature file given the class names from its sidecar.
pub fn decode_features(bytes: &[u8], classes: Vec<String>, path: &Path) -> Result<Dataset> {
    let mut r = Reader::new(bytes, path);
    if r.take(4, "magic")? != FEATURE_MAGIC {
        return Err(r.error_at(0, "not a feature file (bad magic)"));
    }
    let at = r.offset();
    let version = r.u32("version")?;
    if version != FEATURE_VERSION {
        return Err(r.error_at(at, format!("unsupported version {version}, expected {FEATURE_VERSION}")));
    }
    let at = r.offset();
    let tag = r.u8("split tag")?;
    let split = Split::from_tag(tag).ok_or_else(|| r.error_at(at, format!("unknown split tag {tag}")))?;
    let at = r.offset();
    let class_count = r.u32("class count")? as usize;
    if class_count != classes.len() {
        return Err(r.error_at(
            at,
            format!("header declares {class_count} classes, sidecar names {}", classes.len()),
        ));
    }
    let sample_count = r.u32("sample count")? as usize;
    let at = r.offset();
    let d_raw = r.u32("d_raw")? as usize;
    if d_raw == 0 {
        return Err(r.error_at(at, "d_raw must be >= 1"));
    }

    let mut samples = Vec::with_capacity(sample_count.min(1 << 20));
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..sample_count {
        let at = r.offset();
        let id = r.u64("sample id")?;
        if !seen.insert(id) {
            return Err(r.error_at(at, format!("duplicate sample id {id}")));
        }
        let at = r.offset();
        let label = r.u32("label")?;
        if label as usize >= class_count {
            return Err(r.error_at(at, format!("sample {i}: label {label} out of range")));
        }
        let at = r.offset();
        let frames = r.u32("frame count")? as usize;
        if frames == 0 {
            return Err(r.error_at(at, format!("sample {i} has no frames")));
        }
        let values = frames
            .checked_mul(d_raw)
            .ok_or_else(|| r.error_at(at, "frame block too large"))?;
        let mut data = Vec::with_capacity(values.min(1 << 24));
        for _ in 0..values {
            let at = r.offset();
            let v = r.f32("frame values")?;
            if !v.is_finite() {
                return Err(r.error_at(at, format!("sample {i}: non-finite value")));
            }
            data.push(f64::from(v));
        }
        samples.push(VideoSample {
            id,
            label,
            frames: Matrix::new(frames, d_raw, data)?,
        });
    }
    if !r.at_end() {
        return Err(r.error(format!("{} trailing bytes", bytes.len() as u64 - r.offset())));
    }
    Dataset::new(classes, split, d_raw, samples).map_err(|e| r.error(e.to_string()))
}

/// Write the feature file and its sidecar.
pub fn save_features(ds: &Dataset, path: &Path, source: &str) -> Result<()> {
    let bytes = encode_features(ds)?;
    fs::write(path, bytes).map_err(|e| PalError::io(path, e))?;
    let sidecar = Sidecar {
        classes: ds.classes().to_vec(),
        split: ds.split(),
        source: source.to_string(),
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&side, json + "\n").map_err(|e| PalError::io(&side, e))
}

pub fn load_sidecar(path: &Path) -> Result<Sidecar> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| PalError::io(&side, e))?;
    serde_json::from_str(&text).map_err(|e| PalError::parse(&side, e))
}

/// Read a feature file and its sidecar; the two must agree on the split.
pub fn load_features(path: &Path) -> Result<Dataset> {
    let sidecar = load_sidecar(path)?;
    let bytes = fs::read(path).map_err(|e| PalError::io(path, e))?;
    let ds = decode_features(&bytes, sidecar.classes, path)?;
    if ds.split() != sidecar.split {
        return Err(PalError::Format {
            path: path.to_path_buf(),
            offset: 8,
            message: format!(
                "file is {} but sidecar says {}",
                ds.split().name(),
                sidecar.split.name()
            ),
        });
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let samples = vec![
            VideoSample {
                id: 7,
                label: 1,
                frames: Matrix::from_rows(&[[0.5, -1.25], [2.0, 0.0]]).unwrap(),
            },
            VideoSample {
                id: 9,
                label: 0,
                frames: Matrix::from_rows(&[[1.0, 3.0]]).unwrap(),
            },
        ];
        Dataset::new(vec!["a".into(), "b".into()], Split::MetaVal, 2, samples).unwrap()
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn header_layout() {
        let b = encode_features(&tiny()).unwrap();
        assert_eq!(&b[..4], b"FSFE");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(b[8], 1);
        assert_eq!(u32::from_le_bytes(b[9..13].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[13..17].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[17..21].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[21..29].try_into().unwrap()), 7);
        assert_eq!(b.len(), 21 + (8 + 4 + 4 + 16) + (8 + 4 + 4 + 8));
    }

    #[test]
    fn round_trip() {
        let ds = tiny();
        let b = encode_features(&ds).unwrap();
        assert_eq!(decode_features(&b, names(), Path::new("x")).unwrap(), ds);
    }

    #[test]
    fn errors_carry_offsets() {
        let b = encode_features(&tiny()).unwrap();
        let p = Path::new("f");
        let offset = |bytes: &[u8], n: Vec<String>| match decode_features(bytes, n, p) {
            Err(PalError::Format { offset, .. }) => offset,
            other => panic!("{other:?}"),
        };
        let mut bad = b.clone();
        bad[0] = b'X';
        assert_eq!(offset(&bad, names()), 0);
        let mut bad = b.clone();
        bad[4] = 2;
        assert_eq!(offset(&bad, names()), 4);
        let mut bad = b.clone();
        bad[8] = 9;
        assert_eq!(offset(&bad, names()), 8);
        assert_eq!(offset(&b, vec!["a".into()]), 9);
        assert_eq!(offset(&b[..30], names()), 29);
        let mut long = b.clone();
        long.push(0);
        assert_eq!(offset(&long, names()), b.len() as u64);
        let mut bad = b.clone();
        bad[29] = 5; // label of sample 0
        assert_eq!(offset(&bad, names()), 29);
        let mut bad = b.clone();
        bad[37..41].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(offset(&bad, names()), 37);
    }
}
