//! Corpus manifest: the CSV index tying audio files to speaker labels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::load_wav;
use crate::error::{Error, Result};

/// Train/validation split tag for a manifest entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    fn parse(s: &str) -> Result<Option<Split>> {
        match s {
            "" => Ok(None),
            "train" => Ok(Some(Split::Train)),
            "validation" | "val" => Ok(Some(Split::Validation)),
            other => Err(Error::Manifest(format!("unknown split tag '{other}'"))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

/// One row of the corpus manifest.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub speaker: usize,
    pub split: Option<Split>,
}

/// Index of a labeled audio corpus.
///
/// Speaker labels are canonicalized to the contiguous range `0..S-1` on
/// load; `original_labels[s]` records what label `s` was in the file.
#[derive(Debug, Clone, Default)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub original_labels: Vec<usize>,
}

impl CorpusManifest {
    /// Builds a manifest from entries, remapping speaker labels onto `0..S-1`
    /// in ascending order of the original labels.
    pub fn from_entries(raw: Vec<ManifestEntry>) -> Self {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &raw {
            seen.entry(e.speaker).or_insert(0);
        }
        let original_labels: Vec<usize> = seen.keys().copied().collect();
        for (canon, (_, v)) in seen.iter_mut().enumerate() {
            *v = canon;
        }
        let entries = raw
            .into_iter()
            .map(|mut e| {
                e.speaker = seen[&e.speaker];
                e
            })
            .collect();
        Self {
            entries,
            original_labels,
        }
    }

    /// Number of distinct speakers.
    pub fn num_speakers(&self) -> usize {
        self.original_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries carrying the given split tag (untagged entries count as train).
    pub fn split_entries(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries
            .iter()
            .filter(move |e| e.split.unwrap_or(Split::Train) == split)
    }

    /// Parses a `path,speaker,split` CSV. Relative paths are resolved
    /// against the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;

        let headers = reader
            .headers()
            .map_err(|e| Error::Manifest(e.to_string()))?
            .clone();
        let expected = ["path", "speaker", "split"];
        if headers.len() < 2 || &headers[0] != expected[0] || &headers[1] != expected[1] {
            return Err(Error::Manifest(format!(
                "expected header 'path,speaker,split', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut raw = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Manifest(format!("row {}: {e}", i + 2)))?;
            let file: PathBuf = record
                .get(0)
                .ok_or_else(|| Error::Manifest(format!("row {}: missing path", i + 2)))?
                .into();
            let speaker: usize = record
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Manifest(format!("row {}: bad speaker label", i + 2)))?;
            let split = Split::parse(record.get(2).unwrap_or(""))?;
            let resolved = if file.is_absolute() {
                file
            } else {
                base.join(file)
            };
            raw.push(ManifestEntry {
                path: resolved,
                speaker,
                split,
            });
        }
        if raw.is_empty() {
            return Err(Error::Manifest(format!("{}: no entries", path.display())));
        }
        Ok(Self::from_entries(raw))
    }

    /// Checks that every entry's path decodes as audio.
    pub fn validate_audio(&self) -> Result<()> {
        for e in &self.entries {
            load_wav(&e.path)?;
        }
        Ok(())
    }

    /// Writes the manifest as `path,speaker,split` CSV. Paths under `base`
    /// are written relative to it.
    pub fn save(&self, path: impl AsRef<Path>, base: Option<&Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        writer
            .write_record(["path", "speaker", "split"])
            .map_err(|e| Error::Manifest(e.to_string()))?;
        for e in &self.entries {
            let p = match base.and_then(|b| e.path.strip_prefix(b).ok()) {
                Some(rel) => rel.to_path_buf(),
                None => e.path.clone(),
            };
            writer
                .write_record([
                    p.to_string_lossy().as_ref(),
                    &e.speaker.to_string(),
                    e.split.map(Split::as_str).unwrap_or(""),
                ])
                .map_err(|e| Error::Manifest(e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
