//! Tab-separated sample manifests.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bfm::pgm;
use crate::error::{Error, Result};
use crate::evaluation::Label;

pub const MANIFEST_HEADER: &str = "#bssdl-manifest v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SampleLabel {
    Benign,
    Malignant,
    Unlabeled,
}

impl SampleLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleLabel::Benign => "benign",
            SampleLabel::Malignant => "malignant",
            SampleLabel::Unlabeled => "unlabeled",
        }
    }

    pub fn label(self) -> Option<Label> {
        match self {
            SampleLabel::Benign => Some(Label::Benign),
            SampleLabel::Malignant => Some(Label::Malignant),
            SampleLabel::Unlabeled => None,
        }
    }
}

impl From<Label> for SampleLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Benign => SampleLabel::Benign,
            Label::Malignant => SampleLabel::Malignant,
        }
    }
}

impl FromStr for SampleLabel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "benign" => Ok(SampleLabel::Benign),
            "malignant" => Ok(SampleLabel::Malignant),
            "unlabeled" => Ok(SampleLabel::Unlabeled),
            _ => Err(format!("invalid label {s:?} (expected benign, malignant or unlabeled)")),
        }
    }
}

impl fmt::Display for SampleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fixed train/test assignment; `None` lets the workflow split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
    None,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            _ => Err(format!("invalid split {s:?} (expected train, test or none)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub id: String,
    /// As written in the manifest; relative paths resolve against the
    /// manifest's directory.
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub label: SampleLabel,
    pub split: Split,
    pub dataset_tag: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Distinct dataset tags in order of first appearance.
    pub fn tags(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for r in &self.records {
            if !seen.contains(&r.dataset_tag) {
                seen.push(r.dataset_tag.clone());
            }
        }
        seen
    }
}

fn field_ok(s: &str) -> bool {
    !s.is_empty() && !s.contains(['\t', '\n', '\r'])
}

pub fn manifest_text(records: &[SampleRecord]) -> Result<String> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in records {
        let img = r.image_path.to_str().ok_or_else(|| Error::Usage("non UTF-8 image path".into()))?;
        let msk = r.mask_path.to_str().ok_or_else(|| Error::Usage("non UTF-8 mask path".into()))?;
        for f in [r.id.as_str(), img, msk, r.dataset_tag.as_str()] {
            if !field_ok(f) {
                return Err(Error::Usage(format!("manifest field {f:?} is empty or contains a tab")));
            }
        }
        out.push_str(&[r.id.as_str(), img, msk, r.label.as_str(), r.split.as_str(), r.dataset_tag.as_str()].join("\t"));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let text = manifest_text(records)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parses manifest text without touching the referenced files.
pub fn parse_manifest(path: &Path, text: &str) -> Result<Vec<SampleRecord>> {
    let err = |line: usize, msg: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == MANIFEST_HEADER => {}
        Some((_, h)) => return Err(err(1, format!("expected header {MANIFEST_HEADER:?}, found {h:?}"))),
        None => return Err(err(1, format!("missing header {MANIFEST_HEADER:?}"))),
    }
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(err(n, format!("expected 6 tab-separated fields, found {}", fields.len())));
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return Err(err(n, format!("field {} is empty", pos + 1)));
        }
        let label: SampleLabel = fields[3].parse().map_err(|m| err(n, m))?;
        let split: Split = fields[4].parse().map_err(|m| err(n, m))?;
        if !ids.insert(fields[0]) {
            return Err(err(n, format!("duplicate id {:?}", fields[0])));
        }
        records.push(SampleRecord {
            id: fields[0].to_string(),
            image_path: PathBuf::from(fields[1]),
            mask_path: PathBuf::from(fields[2]),
            label,
            split,
            dataset_tag: fields[5].to_string(),
        });
    }
    Ok(records)
}

/// Parses a manifest and checks that every referenced raster pair exists
/// and agrees in size.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("cannot read manifest: {e}"),
    })?;
    let records = parse_manifest(path, &text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest { base_dir, records };
    // line numbers of data rows, skipping blanks the same way the parser does
    let line_numbers: Vec<usize> = text
        .lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1)
        .collect();
    for (rec, &n) in manifest.records.iter().zip(&line_numbers) {
        let err = |msg: String| Error::Manifest {
            path: path.to_path_buf(),
            line: n,
            msg,
        };
        let mut dims = Vec::with_capacity(2);
        for p in [&rec.image_path, &rec.mask_path] {
            let full = manifest.resolve(p);
            let bytes = fs::read(&full).map_err(|e| err(format!("cannot read {}: {e}", full.display())))?;
            let raster = pgm::decode(&bytes).map_err(|m| err(format!("{}: {m}", full.display())))?;
            dims.push((raster.0, raster.1));
        }
        if dims[0] != dims[1] {
            return Err(err(format!(
                "image is {}x{} but mask is {}x{}",
                dims[0].0, dims[0].1, dims[1].0, dims[1].1
            )));
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_name_lines() {
        let p = Path::new("m.tsv");
        let ok = format!("{MANIFEST_HEADER}\na\ti.pgm\tm.pgm\tbenign\tnone\tA\n");
        assert_eq!(parse_manifest(p, &ok).unwrap().len(), 1);
        let cases = [
            ("a\ti\tm\tbenign\tnone\tA\n".to_string(), 1),
            (format!("{MANIFEST_HEADER}\na\ti\tm\tBenign\tnone\tA\n"), 2),
            (format!("{MANIFEST_HEADER}\n\na\ti\tm\tbenign\tmaybe\tA\n"), 3),
            (format!("{MANIFEST_HEADER}\na\ti\tm\tbenign\tnone\n"), 2),
            (format!("{MANIFEST_HEADER}\na\ti\tm\tbenign\tnone\tA\na\ti\tm\tbenign\tnone\tA\n"), 3),
        ];
        for (text, line) in cases {
            match parse_manifest(p, &text) {
                Err(Error::Manifest { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{other:?}"),
            }
        }
    }
}
