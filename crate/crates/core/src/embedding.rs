//! Batch embedding extraction over a clip's 1 s windows.
//!
//! Every window becomes a log-mel snippet, runs through the trained CNN, and
//! yields the activations of the last hidden dense layer as its embedding.
//! An [`EmbeddingSet`] keeps the vectors together with each window's start
//! time, source clip id, and optional speaker label, and persists as a raw
//! little-endian f32 matrix plus a JSON sidecar.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{enumerate_windows, AudioClip};
use crate::error::{Error, Result};
use crate::features::log_mel_snippet;
use crate::nn::{CnnModel, Real};

/// 2-D diagnostic projection of an embedding set, row-aligned with it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection2D {
    /// One (x, y) per embedding row.
    pub points: Vec<[f64; 2]>,
    pub method: ProjectionMethod,
}

/// Which algorithm produced a [`Projection2D`], with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ProjectionMethod {
    Pca {
        /// Fraction of the total variance each component carries.
        explained_variance: [f64; 2],
    },
    Tsne {
        perplexity: f64,
        iters: usize,
        seed: u64,
    },
}

/// N embedding vectors of one width, row-aligned with window metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    /// Row-major N×dim matrix.
    vectors: Vec<f32>,
    /// Start time of each window within its source clip, in seconds.
    window_times: Vec<f64>,
    /// Source clip id per row.
    clip_refs: Vec<String>,
    /// Optional per-row speaker labels.
    labels: Option<Vec<usize>>,
}

/// Row metadata stored next to the vector blob.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    rows: usize,
    window_times: Vec<f64>,
    clip_refs: Vec<String>,
    labels: Option<Vec<usize>>,
}

impl EmbeddingSet {
    pub fn new(
        dim: usize,
        vectors: Vec<f32>,
        window_times: Vec<f64>,
        clip_refs: Vec<String>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("embedding width must be positive".into()));
        }
        let rows = window_times.len();
        if vectors.len() != rows * dim {
            return Err(Error::Dimension(format!(
                "{} matrix values do not fill {rows} rows of width {dim}",
                vectors.len()
            )));
        }
        if clip_refs.len() != rows {
            return Err(Error::Dimension(format!(
                "{} clip refs for {rows} rows",
                clip_refs.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != rows {
                return Err(Error::Dimension(format!(
                    "{} labels for {rows} rows",
                    l.len()
                )));
            }
        }
        Ok(Self {
            dim,
            vectors,
            window_times,
            clip_refs,
            labels,
        })
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.window_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window_times.is_empty()
    }

    /// Embedding width.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One embedding row.
    pub fn vector(&self, row: usize) -> &[f32] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    pub fn window_times(&self) -> &[f64] {
        &self.window_times
    }

    pub fn clip_refs(&self) -> &[String] {
        &self.clip_refs
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn set_labels(&mut self, labels: Option<Vec<usize>>) -> Result<()> {
        if let Some(l) = &labels {
            if l.len() != self.len() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} rows",
                    l.len(),
                    self.len()
                )));
            }
        }
        self.labels = labels;
        Ok(())
    }

    /// Appends all rows of `other`. Both sets must share the width and either
    /// both carry labels or neither does.
    pub fn extend(&mut self, other: &EmbeddingSet) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Dimension(format!(
                "cannot extend width-{} set with width-{} rows",
                self.dim, other.dim
            )));
        }
        if self.labels.is_some() != other.labels.is_some() {
            return Err(Error::Dimension(
                "cannot mix labeled and unlabeled embedding rows".into(),
            ));
        }
        self.vectors.extend_from_slice(&other.vectors);
        self.window_times.extend_from_slice(&other.window_times);
        self.clip_refs.extend_from_slice(&other.clip_refs);
        if let (Some(mine), Some(theirs)) = (&mut self.labels, &other.labels) {
            mine.extend_from_slice(theirs);
        }
        Ok(())
    }

    /// Sidecar file that travels with a vector blob: `x.f32` → `x.f32.json`.
    pub fn sidecar_path(blob_path: &Path) -> PathBuf {
        let mut name = blob_path.file_name().unwrap_or_default().to_os_string();
        name.push(".json");
        blob_path.with_file_name(name)
    }

    /// Writes the little-endian f32 matrix to `blob_path` and the row
    /// metadata to the sidecar next to it.
    pub fn save(&self, blob_path: &Path) -> Result<()> {
        let mut blob = Vec::with_capacity(self.vectors.len() * 4);
        for v in &self.vectors {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(blob_path, blob).map_err(|e| Error::io(blob_path, e))?;

        let sidecar = Sidecar {
            dim: self.dim,
            rows: self.len(),
            window_times: self.window_times.clone(),
            clip_refs: self.clip_refs.clone(),
            labels: self.labels.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Format(format!("sidecar encoding failed: {e}")))?;
        let sidecar_path = Self::sidecar_path(blob_path);
        std::fs::write(&sidecar_path, json).map_err(|e| Error::io(sidecar_path, e))
    }

    pub fn load(blob_path: &Path) -> Result<Self> {
        let sidecar_path = Self::sidecar_path(blob_path);
        let json =
            std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&json)
            .map_err(|e| Error::Format(format!("{}: bad sidecar: {e}", sidecar_path.display())))?;

        let blob = std::fs::read(blob_path).map_err(|e| Error::io(blob_path, e))?;
        let expected = sidecar.rows * sidecar.dim * 4;
        if blob.len() != expected {
            return Err(Error::Format(format!(
                "{}: blob holds {} bytes, sidecar promises {expected}",
                blob_path.display(),
                blob.len()
            )));
        }
        let vectors = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(
            sidecar.dim,
            vectors,
            sidecar.window_times,
            sidecar.clip_refs,
            sidecar.labels,
        )
    }

    /// CSV export: one row per embedding with `clip,start,label` then the
    /// vector components.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| {
            Error::Format(format!("{}: cannot write csv: {e}", path.display()))
        })?;
        let mut header = vec!["clip".to_string(), "start".to_string(), "label".to_string()];
        header.extend((0..self.dim).map(|i| format!("e{i}")));
        let io_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
        writer.write_record(&header).map_err(io_err)?;
        for row in 0..self.len() {
            let label = self
                .labels
                .as_ref()
                .map_or(String::new(), |l| l[row].to_string());
            let mut record = vec![
                self.clip_refs[row].clone(),
                format!("{}", self.window_times[row]),
                label,
            ];
            record.extend(self.vector(row).iter().map(|v| format!("{v}")));
            writer.write_record(&record).map_err(io_err)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

/// Embeds every 1 s window of a 16 kHz clip, in time order.
///
/// `hop` is the window stride in seconds. The rows carry no labels; callers
/// that know the speakers attach them with [`EmbeddingSet::set_labels`].
pub fn embed_clip<T: Real>(
    model: &CnnModel<T>,
    clip: &AudioClip,
    hop: f64,
) -> Result<EmbeddingSet> {
    let windows = enumerate_windows(clip, hop)?;
    let dim = model.arch.dense2_units;
    let rows: Vec<Vec<f32>> = windows
        .par_iter()
        .map(|w| {
            let snippet = log_mel_snippet(clip, w)?;
            let embedding = model.extract_embedding(&snippet)?;
            Ok(embedding.into_iter().map(|v| v.as_f64() as f32).collect())
        })
        .collect::<Result<_>>()?;

    let mut vectors = Vec::with_capacity(rows.len() * dim);
    for row in rows {
        vectors.extend_from_slice(&row);
    }
    EmbeddingSet::new(
        dim,
        vectors,
        windows.iter().map(|w| w.start_time).collect(),
        windows.iter().map(|w| w.clip_ref.clone()).collect(),
        None,
    )
}

/// Wraps bare vectors in an [`EmbeddingSet`] with placeholder metadata.
#[cfg(test)]
pub(crate) fn set_for_tests(vectors: &[Vec<f32>]) -> EmbeddingSet {
    let dim = vectors[0].len();
    let n = vectors.len();
    EmbeddingSet::new(
        dim,
        vectors.iter().flatten().copied().collect(),
        (0..n).map(|i| i as f64).collect(),
        vec!["test".to_string(); n],
        None,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::cosine_distance;
    use crate::manifest::Split;
    use crate::nn::{sgd_train, snippet_dataset, Architecture, TrainConfig};
    use crate::synth::{concat_speakers, synth_speaker_corpus};

    fn tiny_model(seed: u64) -> CnnModel<f32> {
        CnnModel::init(Architecture::reduced(2), seed).unwrap()
    }

    #[test]
    fn three_second_clip_gives_three_rows_in_time_order() {
        let model = tiny_model(7);
        let (clip, _) = concat_speakers(11, &[(0, 3.0)]);
        let set = embed_clip(&model, &clip, 1.0).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.dim(), model.arch.dense2_units);
        assert_eq!(set.window_times(), &[0.0, 1.0, 2.0]);
        assert!(set.clip_refs().iter().all(|r| r == &clip.source_id));
        for row in 0..set.len() {
            assert!(set.vector(row).iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn embedding_is_deterministic() {
        let model = tiny_model(7);
        let (clip, _) = concat_speakers(11, &[(0, 2.0), (1, 2.0)]);
        let a = embed_clip(&model, &clip, 1.0).unwrap();
        let b = embed_clip(&model, &clip, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_clip_is_rejected() {
        let model = tiny_model(7);
        let (clip, _) = concat_speakers(11, &[(0, 0.5)]);
        assert!(matches!(
            embed_clip(&model, &clip, 1.0),
            Err(Error::ClipTooShort { .. })
        ));
    }

    #[test]
    fn same_speaker_windows_are_closer_than_cross_speaker() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = synth_speaker_corpus(2, 6, 2.0, 90, dir.path()).unwrap();
        let train = snippet_dataset::<f32>(&manifest, Split::Train, 1.0).unwrap();
        let mut model = tiny_model(3);
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 8,
            ..TrainConfig::default()
        };
        sgd_train(&mut model, &train, &[], &cfg).unwrap();

        let (clip, _) = concat_speakers(90, &[(0, 4.0), (1, 4.0)]);
        let set = embed_clip(&model, &clip, 1.0).unwrap();
        assert_eq!(set.len(), 8);

        let mut within = Vec::new();
        let mut between = Vec::new();
        for i in 0..set.len() {
            for j in (i + 1)..set.len() {
                let d = cosine_distance(set.vector(i), set.vector(j));
                if (i < 4) == (j < 4) {
                    within.push(d);
                } else {
                    between.push(d);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&within) < mean(&between),
            "within {} should be below between {}",
            mean(&within),
            mean(&between)
        );
    }

    #[test]
    fn save_load_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let set = EmbeddingSet::new(
            3,
            vec![0.0, 1.5, -2.25, 0.125, 3.0, 4.0],
            vec![0.0, 1.0],
            vec!["a".into(), "b".into()],
            Some(vec![0, 1]),
        )
        .unwrap();
        let blob = dir.path().join("emb.f32");
        set.save(&blob).unwrap();
        let back = EmbeddingSet::load(&blob).unwrap();
        assert_eq!(set, back);

        let csv_path = dir.path().join("emb.csv");
        set.write_csv(&csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("clip,start,label,e0,e1,e2"));
        assert!(lines[1].starts_with("a,0,0,"));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        assert!(EmbeddingSet::new(3, vec![0.0; 5], vec![0.0], vec!["a".into()], None).is_err());
        assert!(
            EmbeddingSet::new(3, vec![0.0; 3], vec![0.0], vec!["a".into(), "b".into()], None)
                .is_err()
        );
        assert!(
            EmbeddingSet::new(3, vec![0.0; 3], vec![0.0], vec!["a".into()], Some(vec![0, 1]))
                .is_err()
        );

        let mut labeled =
            EmbeddingSet::new(2, vec![0.0; 2], vec![0.0], vec!["a".into()], Some(vec![0])).unwrap();
        let unlabeled = EmbeddingSet::new(2, vec![0.0; 2], vec![0.0], vec!["a".into()], None).unwrap();
        assert!(labeled.extend(&unlabeled).is_err());
    }
}
