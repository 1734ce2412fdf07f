//! Dataset manifests: UTF-8 CSV with header `path,person,kind`.
//!
//! Relative paths are resolved against the manifest's own directory. Lines
//! starting with `#` are comments.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Genuine,
    Simple,
    Skilled,
    Opposite,
}

impl SampleKind {
    pub const ALL: [SampleKind; 4] = [
        SampleKind::Genuine,
        SampleKind::Simple,
        SampleKind::Skilled,
        SampleKind::Opposite,
    ];
    pub const FORGERIES: [SampleKind; 3] = [SampleKind::Simple, SampleKind::Skilled, SampleKind::Opposite];

    /// Genuine is class 1; every forgery kind is class 0.
    pub fn label(self) -> usize {
        usize::from(self == SampleKind::Genuine)
    }

    pub fn name(self) -> &'static str {
        match self {
            SampleKind::Genuine => "genuine",
            SampleKind::Simple => "simple",
            SampleKind::Skilled => "skilled",
            SampleKind::Opposite => "opposite",
        }
    }
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleRef {
    /// Resolved path (manifest directory joined with the recorded path).
    pub path: PathBuf,
    pub person: String,
    pub kind: SampleKind,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    path: String,
    person: String,
    kind: SampleKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersonSamples {
    pub genuine: Vec<SampleRef>,
    pub simple: Vec<SampleRef>,
    pub skilled: Vec<SampleRef>,
    pub opposite: Vec<SampleRef>,
}

impl PersonSamples {
    pub fn of_kind(&self, kind: SampleKind) -> &[SampleRef] {
        match kind {
            SampleKind::Genuine => &self.genuine,
            SampleKind::Simple => &self.simple,
            SampleKind::Skilled => &self.skilled,
            SampleKind::Opposite => &self.opposite,
        }
    }

    fn push(&mut self, sample: SampleRef) {
        match sample.kind {
            SampleKind::Genuine => self.genuine.push(sample),
            SampleKind::Simple => self.simple.push(sample),
            SampleKind::Skilled => self.skilled.push(sample),
            SampleKind::Opposite => self.opposite.push(sample),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetCatalog {
    entries: Vec<SampleRef>,
}

impl DatasetCatalog {
    pub fn new(entries: Vec<SampleRef>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.path) {
                return Err(Error::Config(format!("duplicate sample path {}", e.path.display())));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SampleRef] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Samples grouped per person (sorted by id), each group sorted by path.
    pub fn by_person(&self) -> BTreeMap<String, PersonSamples> {
        let mut sorted = self.entries.clone();
        sorted.sort();
        let mut out: BTreeMap<String, PersonSamples> = BTreeMap::new();
        for s in sorted {
            out.entry(s.person.clone()).or_default().push(s);
        }
        out
    }

    pub fn read(path: &Path) -> Result<Self> {
        let manifest_err = |reason: String| Error::Manifest {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| manifest_err(e.to_string()))?;
        if headers != vec!["path", "person", "kind"] {
            return Err(manifest_err(format!("expected header `path,person,kind`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut entries = Vec::new();
        for (line, rec) in reader.deserialize::<Record>().enumerate() {
            let rec = rec.map_err(|e| manifest_err(format!("record {}: {e}", line + 1)))?;
            if rec.person.is_empty() || rec.path.is_empty() {
                return Err(manifest_err(format!("record {}: empty path or person", line + 1)));
            }
            entries.push(SampleRef {
                path: base.join(&rec.path),
                person: rec.person,
                kind: rec.kind,
            });
        }
        Self::new(entries).map_err(|e| manifest_err(e.to_string()))
    }

    /// Writes `samples` as a manifest at `path`. Paths under the manifest's
    /// directory are recorded relative to it, others as absolute paths.
    pub fn write(path: &Path, samples: &[SampleRef]) -> Result<()> {
        Self::write_annotated(path, samples, &[])
    }

    /// Like [`DatasetCatalog::write`], preceded by one `# ` line per comment.
    pub fn write_annotated(path: &Path, samples: &[SampleRef], comments: &[String]) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut writer = csv::Writer::from_writer(Vec::new());
        for s in samples {
            let recorded = match s.path.strip_prefix(base) {
                Ok(rel) if !base.as_os_str().is_empty() => rel.to_path_buf(),
                _ if base.as_os_str().is_empty() && s.path.is_relative() => s.path.clone(),
                _ => std::path::absolute(&s.path).map_err(|e| Error::io(&s.path, e))?,
            };
            writer
                .serialize(Record {
                    path: recorded.to_string_lossy().replace('\\', "/"),
                    person: s.person.clone(),
                    kind: s.kind,
                })
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut bytes: Vec<u8> = comments.iter().flat_map(|c| format!("# {c}\n").into_bytes()).collect();
        bytes.extend(writer.into_inner().map_err(|e| Error::Config(e.to_string()))?);
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Order-independent fingerprint of a sample list. Paths are made
    /// absolute first, so it does not depend on how a manifest spelled them.
    pub fn fingerprint(samples: &[SampleRef]) -> String {
        let mut keyed: Vec<(PathBuf, &SampleRef)> = samples
            .iter()
            .map(|s| (std::path::absolute(&s.path).unwrap_or_else(|_| s.path.clone()), s))
            .collect();
        keyed.sort();
        let mut hasher = Sha256::new();
        for (path, s) in keyed {
            hasher.update(path.to_string_lossy().as_bytes());
            hasher.update([0]);
            hasher.update(s.person.as_bytes());
            hasher.update([0]);
            hasher.update(s.kind.name().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(SampleKind::Genuine.label(), 1);
        for k in SampleKind::FORGERIES {
            assert_eq!(k.label(), 0);
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("data.manifest");
        std::fs::write(
            &manifest,
            "path,person,kind\nimg/a.pgm,p1,genuine\nimg/b.pgm,p1,opposite\nimg/c.pgm,p2,simple\n",
        )
        .unwrap();
        let catalog = DatasetCatalog::read(&manifest).unwrap();
        assert_eq!(catalog.len(), 3);
        assert_eq!(catalog.entries()[0].path, dir.path().join("img/a.pgm"));
        let groups = catalog.by_person();
        assert_eq!(groups["p1"].opposite.len(), 1);
        assert_eq!(groups["p2"].simple.len(), 1);

        let copy = dir.path().join("copy.manifest");
        DatasetCatalog::write(&copy, catalog.entries()).unwrap();
        assert_eq!(std::fs::read_to_string(&copy).unwrap(), std::fs::read_to_string(&manifest).unwrap());

        let annotated = dir.path().join("annotated.manifest");
        DatasetCatalog::write_annotated(&annotated, catalog.entries(), &["seed = 4".into()]).unwrap();
        assert!(std::fs::read_to_string(&annotated).unwrap().starts_with("# seed = 4\npath,person,kind\n"));
        assert_eq!(DatasetCatalog::read(&annotated).unwrap(), catalog);
    }

    #[test]
    fn rejects_bad_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "path,person,kind\na.pgm,p,forged\n").unwrap();
        assert!(matches!(DatasetCatalog::read(&m), Err(Error::Manifest { .. })));
        std::fs::write(&m, "file,who,kind\na.pgm,p,genuine\n").unwrap();
        assert!(matches!(DatasetCatalog::read(&m), Err(Error::Manifest { .. })));
        std::fs::write(&m, "path,person,kind\na.pgm,p,genuine\na.pgm,q,simple\n").unwrap();
        assert!(matches!(DatasetCatalog::read(&m), Err(Error::Manifest { .. })));
    }

    #[test]
    fn fingerprint_ignores_order() {
        let a = SampleRef {
            path: "x".into(),
            person: "p".into(),
            kind: SampleKind::Genuine,
        };
        let b = SampleRef {
            path: "y".into(),
            person: "p".into(),
            kind: SampleKind::Skilled,
        };
        assert_eq!(
            DatasetCatalog::fingerprint(&[a.clone(), b.clone()]),
            DatasetCatalog::fingerprint(&[b.clone(), a.clone()])
        );
        assert_ne!(DatasetCatalog::fingerprint(std::slice::from_ref(&a)), DatasetCatalog::fingerprint(&[b]));
    }
}
