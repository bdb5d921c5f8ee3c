use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CorpusError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum EyeSide {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Bonafide,
    Attack,
    Synthetic,
}

macro_rules! display_snake {
    ($t:ty, $($v:ident => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s),+ })
            }
        }
    };
}
display_snake!(EyeSide, Left => "left", Right => "right");
display_snake!(Gender, Female => "female", Male => "male", Unknown => "unknown");
display_snake!(ClassLabel, Bonafide => "bonafide", Attack => "attack", Synthetic => "synthetic");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub eye_side: EyeSide,
    pub gender: Gender,
    pub class_label: ClassLabel,
    pub width: u32,
    pub height: u32,
}

/// An ordered list of image records plus a content checksum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    /// Most common `(width, height)` among the records.
    pub source_resolution: (u32, u32),
    pub records: Vec<ImageRecord>,
    pub checksum: String,
}

impl Manifest {
    /// Builds a manifest; ids must be unique and dimensions positive.
    pub fn new(records: Vec<ImageRecord>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::Manifest(format!("duplicate id {}", r.id)));
            }
            if r.width == 0 || r.height == 0 {
                return Err(CorpusError::Manifest(format!("record {} has zero size", r.id)));
            }
        }
        let mut counts: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        for r in &records {
            *counts.entry((r.width, r.height)).or_default() += 1;
        }
        let source_resolution = counts
            .iter()
            .max_by_key(|(res, n)| (**n, std::cmp::Reverse(**res)))
            .map(|(res, _)| *res)
            .unwrap_or((0, 0));
        let checksum = Self::checksum_of(&records);
        Ok(Self { schema_version: MANIFEST_SCHEMA_VERSION, source_resolution, records, checksum })
    }

    /// Hex SHA-256 over the canonical JSON of `records`.
    pub fn checksum_of(records: &[ImageRecord]) -> String {
        let bytes = serde_json::to_vec(records).expect("records serialize");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn verify(&self) -> Result<(), CorpusError> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CorpusError::Manifest(format!(
                "unsupported schema version {} (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let computed = Self::checksum_of(&self.records);
        if computed != self.checksum {
            return Err(CorpusError::ChecksumMismatch { stored: self.checksum.clone(), computed });
        }
        Ok(())
    }

    /// Records matching `pred`, as a new manifest.
    pub fn filter(&self, pred: impl Fn(&ImageRecord) -> bool) -> Result<Self, CorpusError> {
        Self::new(self.records.iter().filter(|r| pred(r)).cloned().collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CorpusError> {
        let m: Self = serde_json::from_str(s).map_err(|e| CorpusError::Manifest(e.to_string()))?;
        m.verify()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_json()).map_err(|e| CorpusError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let s = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, w: u32, h: u32) -> ImageRecord {
        ImageRecord {
            id: id.into(),
            path: PathBuf::from(format!("/data/{id}")),
            eye_side: EyeSide::Left,
            gender: Gender::Female,
            class_label: ClassLabel::Bonafide,
            width: w,
            height: h,
        }
    }

    #[test]
    fn json_round_trip_and_checksum() {
        let m = Manifest::new(vec![rec("a", 640, 480), rec("b", 640, 480), rec("c", 320, 240)]).unwrap();
        assert_eq!(m.source_resolution, (640, 480));
        let back = Manifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);

        let mut tampered = m.clone();
        tampered.records[0].gender = Gender::Male;
        assert!(matches!(tampered.verify(), Err(CorpusError::ChecksumMismatch { .. })));
    }

    #[test]
    fn rejects_duplicate_ids_and_unknown_fields() {
        assert!(Manifest::new(vec![rec("a", 1, 1), rec("a", 1, 1)]).is_err());
        let m = Manifest::new(vec![rec("a", 1, 1)]).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(Manifest::from_json(&v.to_string()).is_err());
    }
}
