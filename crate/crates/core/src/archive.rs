//! Self-describing tensor archive with an integrity trailer.
//!
//! Layout: magic `SPAIARCH`, format version (u32 LE), header length (u64 LE),
//! JSON header, raw little-endian tensor data in header order, then the
//! SHA-256 of everything before it.

use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spai_autograd::{ParamSet, Scalar, Tensor};

const MAGIC: &[u8; 8] = b"SPAIARCH";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("checksum mismatch in {0}")]
    Checksum(PathBuf),
    #[error("malformed archive {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("i/o failure on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Entry {
    group: String,
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header<M> {
    kind: String,
    dtype: String,
    meta: M,
    tensors: Vec<Entry>,
}

/// Decoded archive: metadata plus named parameter groups.
pub struct Archive<M, T: Scalar> {
    pub kind: String,
    /// Scalar type the tensors were stored as.
    pub dtype: String,
    pub meta: M,
    pub groups: Vec<(String, ParamSet<T>)>,
    /// Hex SHA-256 trailer.
    pub digest: String,
}

impl<M, T: Scalar> Archive<M, T> {
    pub fn group(&self, name: &str) -> Option<&ParamSet<T>> {
        self.groups.iter().find(|(g, _)| g == name).map(|(_, p)| p)
    }

    pub fn take_group(&mut self, name: &str) -> Option<ParamSet<T>> {
        let i = self.groups.iter().position(|(g, _)| g == name)?;
        Some(self.groups.remove(i).1)
    }
}

/// Serializes to bytes; returns them with the hex digest.
pub fn encode<M: Serialize, T: Scalar>(kind: &str, meta: &M, groups: &[(&str, &ParamSet<T>)]) -> (Vec<u8>, String) {
    let tensors: Vec<Entry> = groups
        .iter()
        .flat_map(|(g, set)| {
            set.iter().map(move |(n, t)| Entry { group: g.to_string(), name: n.to_string(), shape: t.shape().to_vec() })
        })
        .collect();
    let header = Header { kind: kind.to_string(), dtype: T::DTYPE.to_string(), meta, tensors };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, set) in groups {
        for (_, t) in set.iter() {
            for v in t.data() {
                if T::DTYPE == "f32" {
                    out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
                } else {
                    out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
                }
            }
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    (out, hex::encode(digest))
}

pub fn write<M: Serialize, T: Scalar>(
    path: &Path,
    kind: &str,
    meta: &M,
    groups: &[(&str, &ParamSet<T>)],
) -> Result<String, ArchiveError> {
    let (bytes, digest) = encode(kind, meta, groups);
    std::fs::write(path, bytes).map_err(|e| ArchiveError::Io { path: path.into(), source: e })?;
    Ok(digest)
}

/// Decodes bytes, converting stored values to `T`.
pub fn decode<M: DeserializeOwned, T: Scalar>(bytes: &[u8], path: &Path) -> Result<Archive<M, T>, ArchiveError> {
    let fmt = |reason: String| ArchiveError::Format { path: path.into(), reason };
    if bytes.len() < 8 + 4 + 8 + 32 || &bytes[..8] != MAGIC {
        return Err(fmt("missing archive magic".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(ArchiveError::Checksum(path.into()));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != ARCHIVE_VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
    let json = body.get(20..20 + hlen).ok_or_else(|| fmt("truncated header".into()))?;
    let header: Header<M> = serde_json::from_slice(json).map_err(|e| fmt(e.to_string()))?;
    let width = match header.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(fmt(format!("unknown dtype {other}"))),
    };
    let mut data = &body[20 + hlen..];
    let mut groups: Vec<(String, ParamSet<T>)> = Vec::new();
    for e in header.tensors {
        let n: usize = e.shape.iter().product();
        if data.len() < n * width {
            return Err(fmt(format!("truncated tensor {}", e.name)));
        }
        let (raw, rest) = data.split_at(n * width);
        data = rest;
        let vals: Vec<T> = if width == 4 {
            raw.chunks_exact(4).map(|b| T::of(f32::from_le_bytes(b.try_into().unwrap()) as f64)).collect()
        } else {
            raw.chunks_exact(8).map(|b| T::of(f64::from_le_bytes(b.try_into().unwrap()))).collect()
        };
        if !groups.iter().any(|(g, _)| *g == e.group) {
            groups.push((e.group.clone(), ParamSet::new()));
        }
        let set = &mut groups.iter_mut().find(|(g, _)| *g == e.group).expect("just inserted").1;
        set.insert(e.name, Tensor::new(e.shape, vals));
    }
    if !data.is_empty() {
        return Err(fmt(format!("{} trailing bytes", data.len())));
    }
    Ok(Archive { kind: header.kind, dtype: header.dtype, meta: header.meta, groups, digest: hex::encode(trailer) })
}

pub fn read<M: DeserializeOwned, T: Scalar>(path: &Path) -> Result<Archive<M, T>, ArchiveError> {
    let bytes = std::fs::read(path).map_err(|e| ArchiveError::Io { path: path.into(), source: e })?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamSet<f32> {
        let mut p = ParamSet::new();
        p.insert("a", Tensor::new([2, 2], vec![1.0, -2.0, 3.5, 0.25]));
        p.insert("b", Tensor::new([3], vec![0.1, 0.2, 0.3]));
        p
    }

    #[test]
    fn round_trip_and_corruption() {
        let p = sample();
        let (mut bytes, digest) = encode("test", &serde_json::json!({"k": 1}), &[("g", &p)]);
        let back: Archive<serde_json::Value, f32> = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.digest, digest);
        assert_eq!(back.group("g").unwrap(), &p);
        assert_eq!(back.meta["k"], 1);
        let wide: Archive<serde_json::Value, f64> = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(wide.group("g").unwrap().get("a").unwrap().data(), &[1.0, -2.0, 3.5, 0.25]);

        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(decode::<serde_json::Value, f32>(&bytes, Path::new("mem")), Err(ArchiveError::Checksum(_))));
        assert!(decode::<serde_json::Value, f32>(&bytes[..10], Path::new("mem")).is_err());
    }
}
