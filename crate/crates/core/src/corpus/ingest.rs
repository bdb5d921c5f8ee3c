use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ClassLabel, CorpusError, EyeSide, Gender, ImageRecord, Manifest};

const IMAGE_EXTENSIONS: &[&str] = &["png", "bmp", "jpg", "jpeg", "tif", "tiff", "pgm"];

/// Maps a relative file path to a label when `pattern` matches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRule<L> {
    pub pattern: String,
    pub value: L,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelDefaults {
    #[serde(default)]
    pub eye_side: Option<EyeSide>,
    #[serde(default = "unknown_gender")]
    pub gender: Option<Gender>,
    #[serde(default = "bonafide")]
    pub class_label: Option<ClassLabel>,
}

fn unknown_gender() -> Option<Gender> {
    Some(Gender::Unknown)
}

fn bonafide() -> Option<ClassLabel> {
    Some(ClassLabel::Bonafide)
}

impl Default for LabelDefaults {
    fn default() -> Self {
        Self { eye_side: None, gender: unknown_gender(), class_label: bonafide() }
    }
}

/// Regex rules over the path relative to the ingested directory (with `/`
/// separators). The first matching rule per field wins; otherwise the
/// default applies, and a field with neither makes the file unlabelable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelingRules {
    #[serde(default)]
    pub eye_side: Vec<LabelRule<EyeSide>>,
    #[serde(default)]
    pub gender: Vec<LabelRule<Gender>>,
    #[serde(default)]
    pub class_label: Vec<LabelRule<ClassLabel>>,
    #[serde(default)]
    pub defaults: LabelDefaults,
}

impl Default for LabelingRules {
    /// Case-insensitive `left`/`right`, `_L`/`_R`, `female`/`male`, `_F`/`_M`
    /// tokens; everything bona fide.
    fn default() -> Self {
        let r = |p: &str| p.to_string();
        Self {
            eye_side: vec![
                LabelRule { pattern: r(r"(?i)(^|[/_\-.])(l|left)([/_\-.]|$)"), value: EyeSide::Left },
                LabelRule { pattern: r(r"(?i)(^|[/_\-.])(r|right)([/_\-.]|$)"), value: EyeSide::Right },
            ],
            gender: vec![
                LabelRule { pattern: r(r"(?i)(^|[/_\-.])(f|female)([/_\-.]|$)"), value: Gender::Female },
                LabelRule { pattern: r(r"(?i)(^|[/_\-.])(m|male)([/_\-.]|$)"), value: Gender::Male },
            ],
            class_label: vec![
                LabelRule { pattern: r(r"(?i)(^|[/_\-.])(attack|print|pai)([/_\-.]|$)"), value: ClassLabel::Attack },
                LabelRule { pattern: r(r"(?i)(^|[/_\-.])(synthetic|fake|gan)([/_\-.]|$)"), value: ClassLabel::Synthetic },
            ],
            defaults: LabelDefaults::default(),
        }
    }
}

struct Compiled<L> {
    rules: Vec<(Regex, L)>,
    default: Option<L>,
}

impl<L: Copy> Compiled<L> {
    fn new(rules: &[LabelRule<L>], default: Option<L>) -> Result<Self, CorpusError> {
        let rules = rules
            .iter()
            .map(|r| {
                Regex::new(&r.pattern)
                    .map(|re| (re, r.value))
                    .map_err(|e| CorpusError::InvalidRule(format!("{}: {e}", r.pattern)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rules, default })
    }

    fn label(&self, rel: &str) -> Option<L> {
        self.rules.iter().find(|(re, _)| re.is_match(rel)).map(|(_, v)| *v).or(self.default)
    }
}

impl LabelingRules {
    pub fn from_json(s: &str) -> Result<Self, CorpusError> {
        let rules: Self = serde_json::from_str(s).map_err(|e| CorpusError::InvalidRule(e.to_string()))?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        self.compile().map(|_| ())
    }

    fn compile(&self) -> Result<(Compiled<EyeSide>, Compiled<Gender>, Compiled<ClassLabel>), CorpusError> {
        Ok((
            Compiled::new(&self.eye_side, self.defaults.eye_side)?,
            Compiled::new(&self.gender, self.defaults.gender)?,
            Compiled::new(&self.class_label, self.defaults.class_label)?,
        ))
    }
}

/// A file that was found but not admitted to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct IngestReport {
    pub manifest: Manifest,
    pub failures: Vec<IngestFailure>,
}

/// Walks `dir` recursively, decodes every image and labels it by `rules`.
/// Undecodable or unlabelable files are reported, never silently dropped.
pub fn ingest_directory(dir: &Path, rules: &LabelingRules) -> Result<IngestReport, CorpusError> {
    let (side_rules, gender_rules, class_rules) = rules.compile()?;
    let root = dir.canonicalize().map_err(|e| CorpusError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(&root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.clone());
            CorpusError::io(path, e.into())
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for path in files {
        let rel = path.strip_prefix(&root).expect("walk stays under root");
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
        if !ext.as_deref().is_some_and(|e| IMAGE_EXTENSIONS.contains(&e)) {
            failures.push(IngestFailure { path, reason: "not an image file extension".into() });
            continue;
        }
        let dims = match image::open(&path) {
            Ok(img) => (img.width(), img.height()),
            Err(e) => {
                failures.push(IngestFailure { path, reason: format!("undecodable: {e}") });
                continue;
            }
        };
        let (Some(eye_side), Some(gender), Some(class_label)) =
            (side_rules.label(&rel), gender_rules.label(&rel), class_rules.label(&rel))
        else {
            failures.push(IngestFailure { path, reason: "no labeling rule matched".into() });
            continue;
        };
        records.push(ImageRecord { id: rel, path, eye_side, gender, class_label, width: dims.0, height: dims.1 });
    }
    for f in &failures {
        log::warn!("skipping {}: {}", f.path.display(), f.reason);
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus(root));
    }
    Ok(IngestReport { manifest: Manifest::new(records)?, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rules_label_common_names() {
        let (s, g, c) = LabelingRules::default().compile().unwrap();
        assert_eq!(s.label("subj01_L_F.png"), Some(EyeSide::Left));
        assert_eq!(s.label("right/subj01.png"), Some(EyeSide::Right));
        assert_eq!(s.label("subj01.png"), None);
        assert_eq!(g.label("female/x_L.png"), Some(Gender::Female));
        assert_eq!(g.label("male/x_L.png"), Some(Gender::Male));
        assert_eq!(g.label("x_L.png"), Some(Gender::Unknown));
        assert_eq!(c.label("print_attack/x.png"), Some(ClassLabel::Attack));
        assert_eq!(c.label("x.png"), Some(ClassLabel::Bonafide));
    }

    #[test]
    fn bad_regex_is_rejected() {
        let json = r#"{"eye_side": [{"pattern": "(", "value": "left"}]}"#;
        assert!(matches!(LabelingRules::from_json(json), Err(CorpusError::InvalidRule(_))));
    }
}
