//! Versioned binary container for model checkpoints and vector indexes.
//!
//! Layout: magic `BLCK`, a little-endian u32 format version, a
//! length-prefixed JSON header (kind tag, typed metadata, named array
//! shapes), then the arrays as little-endian f32 in registration order.
//! Writing is byte-stable: equal inputs produce equal files.

use crate::error::{Error, Result};
use crate::nn::{ParamLayout, ParamSet};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"BLCK";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    arrays: Vec<ArraySpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    shape: Vec<usize>,
}

/// Serializes a kind tag, typed metadata and the parameter buffer.
pub fn save<M: Serialize>(
    path: &Path,
    kind: &str,
    meta: &M,
    params: &ParamSet<f32>,
) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write(&mut file, kind, meta, params)?;
    file.flush()?;
    Ok(())
}

pub fn write<W: Write, M: Serialize>(
    writer: &mut W,
    kind: &str,
    meta: &M,
    params: &ParamSet<f32>,
) -> Result<()> {
    let header = Header {
        kind: kind.to_string(),
        meta: serde_json::to_value(meta).map_err(|e| Error::Checkpoint(e.to_string()))?,
        arrays: params
            .layout
            .specs()
            .iter()
            .map(|s| ArraySpec {
                name: s.name.clone(),
                shape: s.shape.clone(),
            })
            .collect(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    writer.write_all(MAGIC)?;
    writer.write_all(&VERSION.to_le_bytes())?;
    writer.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    writer.write_all(&header_bytes)?;
    writer.write_all(&(params.data.len() as u64).to_le_bytes())?;
    for v in &params.data {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a checkpoint of the expected kind, checking the array table against
/// `expected_layout` (produced by rebuilding the model from the metadata).
pub fn load<M: DeserializeOwned>(
    path: &Path,
    expected_kind: &str,
) -> Result<(M, RawArrays)> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read(&mut file, expected_kind)
}

pub fn read<R: Read, M: DeserializeOwned>(
    reader: &mut R,
    expected_kind: &str,
) -> Result<(M, RawArrays)> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut buf4 = [0u8; 4];
    reader.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut buf8 = [0u8; 8];
    reader.read_exact(&mut buf8)?;
    let header_len = u64::from_le_bytes(buf8) as usize;
    let mut header_bytes = vec![0u8; header_len];
    reader.read_exact(&mut header_bytes)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if header.kind != expected_kind {
        return Err(Error::Incompatible(format!(
            "checkpoint kind `{}`, expected `{expected_kind}`",
            header.kind
        )));
    }
    let meta: M = serde_json::from_value(header.meta)
        .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
    reader.read_exact(&mut buf8)?;
    let data_len = u64::from_le_bytes(buf8) as usize;
    let mut data = vec![0f32; data_len];
    let mut chunk = [0u8; 4];
    for v in data.iter_mut() {
        reader.read_exact(&mut chunk)?;
        *v = f32::from_le_bytes(chunk);
    }
    Ok((
        meta,
        RawArrays {
            arrays: header.arrays,
            data,
        },
    ))
}

/// Array table and raw values awaiting shape verification.
pub struct RawArrays {
    arrays: Vec<ArraySpec>,
    data: Vec<f32>,
}

impl RawArrays {
    /// Checks names and shapes against a freshly built layout and moves the
    /// values into a parameter set. Mismatches are refused, never coerced.
    pub fn into_params(self, layout: std::sync::Arc<ParamLayout>) -> Result<ParamSet<f32>> {
        if layout.total() != self.data.len() {
            return Err(Error::Incompatible(format!(
                "parameter count {} != expected {}",
                self.data.len(),
                layout.total()
            )));
        }
        if layout.specs().len() != self.arrays.len() {
            return Err(Error::Incompatible("array table mismatch".into()));
        }
        for (spec, array) in layout.specs().iter().zip(&self.arrays) {
            if spec.name != array.name || spec.shape != array.shape {
                return Err(Error::Incompatible(format!(
                    "array `{}` {:?} != expected `{}` {:?}",
                    array.name, array.shape, spec.name, spec.shape
                )));
            }
        }
        Ok(ParamSet {
            layout,
            data: self.data,
        })
    }
}

/// SHA-256 of a file, hex-encoded. Used by manifests and index provenance.
pub fn file_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)?;
    let out = hasher.finalize();
    Ok(out.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Meta {
        note: String,
        value: u32,
    }

    fn sample() -> (ParamSet<f32>, Meta) {
        let mut b = ParamLayout::builder();
        let a = b.add("a", &[2, 2]);
        let mut ps = ParamSet::<f32>::zeros(b.build());
        ps.get_mut(a).copy_from_slice(&[1.0, 2.5, -3.0, 0.125]);
        (
            ps,
            Meta {
                note: "x".into(),
                value: 7,
            },
        )
    }

    #[test]
    fn round_trip_and_byte_stability() {
        let (ps, meta) = sample();
        let mut buf1 = Vec::new();
        write(&mut buf1, "test", &meta, &ps).unwrap();
        let mut buf2 = Vec::new();
        write(&mut buf2, "test", &meta, &ps).unwrap();
        assert_eq!(buf1, buf2);
        let (meta2, raw): (Meta, _) = read(&mut buf1.as_slice(), "test").unwrap();
        assert_eq!(meta2, meta);
        let ps2 = raw.into_params(ps.layout.clone()).unwrap();
        assert_eq!(ps2.data, ps.data);
    }

    #[test]
    fn kind_and_shape_mismatches_refused() {
        let (ps, meta) = sample();
        let mut buf = Vec::new();
        write(&mut buf, "test", &meta, &ps).unwrap();
        assert!(read::<_, Meta>(&mut buf.as_slice(), "other").is_err());

        let (_, raw): (Meta, _) = read(&mut buf.as_slice(), "test").unwrap();
        let mut b = ParamLayout::builder();
        b.add("a", &[4]); // same length, different shape
        assert!(raw.into_params(b.build()).is_err());
    }
}
