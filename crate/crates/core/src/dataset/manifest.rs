//! JSON Lines manifests, one entry per line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    Clean,
    Noise,
    Noisy,
    UltrasoundFeature,
    MelFeature,
}

/// Provenance of a generated mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixRecord {
    pub clean_id: String,
    pub noise_id: String,
    pub snr_db: f64,
    pub noise_offset: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub speaker_id: String,
    pub path: PathBuf,
    pub duration_s: f64,
    pub kind: EntryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixRecord>,
}

impl ManifestEntry {
    pub fn new(
        id: impl Into<String>,
        speaker_id: impl Into<String>,
        path: impl Into<PathBuf>,
        duration_s: f64,
        kind: EntryKind,
    ) -> Self {
        Self {
            id: id.into(),
            speaker_id: speaker_id.into(),
            path: path.into(),
            duration_s,
            kind,
            mix: None,
        }
    }
}

/// Ordered list of entries; order is taken as chronological within a speaker.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Self { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Unique ids and positive durations.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Dataset(format!("duplicate id {:?}", e.id)));
            }
            if !(e.duration_s > 0.0 && e.duration_s.is_finite()) {
                return Err(Error::Dataset(format!(
                    "entry {:?} has non-positive duration {}",
                    e.id, e.duration_s
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::Dataset(format!("line {}: {e}", n + 1)))
            })
            .collect::<Result<_>>()?;
        Self::new(entries)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let line = serde_json::to_string(e).expect("manifest entries serialize");
            writeln!(out, "{line}").expect("writing to a String");
        }
        out
    }

    /// Reads a manifest and checks that every relative path resolves against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let m = Self::parse(&fs::read_to_string(path)?).map_err(|e| match e {
            Error::Dataset(msg) => Error::Dataset(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &m.entries {
            let resolved = resolve(base, &e.path);
            if !resolved.exists() {
                return Err(Error::Dataset(format!(
                    "entry {:?} points to missing file {}",
                    e.id,
                    resolved.display()
                )));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// `path` relative to `base` unless already absolute.
pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
