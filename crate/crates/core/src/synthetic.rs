//! Synthetic datasets whose targets are a known linear map of the pooled
//! embeddings. Used for smoke tests, benchmarks and end-to-end checks.

use std::path::{Path, PathBuf};

use crate::dataset::{DIMENSIONS, NUM_DIMENSIONS};
use crate::embedding_store::{file_name, save_manifest, write_embedding_file, EmbeddingSequence, ManifestEntry};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub pieces: usize,
    pub segments_per_piece: usize,
    pub renditions: usize,
    /// Layers stored per file; each holds `layer_width` columns.
    pub layers: Vec<u32>,
    pub layer_width: usize,
    /// Must be even: frames come in `z ± δ` pairs so the mean is `z`.
    pub frames: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            pieces: 10,
            segments_per_piece: 4,
            renditions: 1,
            layers: vec![1, 2],
            layer_width: 2,
            frames: 6,
            noise_sd: 0.01,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPaths {
    pub manifest: PathBuf,
    pub labels: PathBuf,
    pub embeddings: Vec<PathBuf>,
}

/// Writes `embeddings/*.pemb`, `manifest.json` and `labels.csv` under `dir`.
///
/// Per segment a latent `z ~ U(−1, 1)^dim` is drawn (shared by its
/// renditions); targets are `0.5 + A z + N(0, noise_sd²)` clamped to [0, 1],
/// with `A_ij ~ U(−1, 1)/dim`.
pub fn write_synthetic(dir: &Path, spec: &SyntheticSpec) -> Result<SyntheticPaths> {
    if spec.frames == 0 || spec.frames % 2 != 0 {
        return Err(Error::Config("synthetic frames must be even and positive".into()));
    }
    let dim = spec.layers.len() * spec.layer_width;
    if dim == 0 {
        return Err(Error::Config("synthetic embeddings need at least one column".into()));
    }
    let emb_dir = dir.join("embeddings");
    std::fs::create_dir_all(&emb_dir).map_err(|e| Error::file(&emb_dir, e))?;

    let mut map_rng = SplitMix64::new(derive_seed(spec.seed, "map"));
    let a: Vec<f64> = (0..NUM_DIMENSIONS * dim)
        .map(|_| map_rng.uniform(-1.0, 1.0) / dim as f64)
        .collect();
    let mut rng = SplitMix64::new(derive_seed(spec.seed, "data"));

    let mut labels = csv::Writer::from_path(dir.join("labels.csv"))?;
    let header: Vec<&str> = ["segment_id", "piece_id", "rendition"].into_iter().chain(DIMENSIONS).collect();
    labels.write_record(&header)?;
    let mut manifest = Vec::new();
    let mut embeddings = Vec::new();
    for p in 0..spec.pieces {
        for s in 0..spec.segments_per_piece {
            let segment = format!("piece{p:02}_seg{s:02}");
            // f32 storage is what the harness reads back, so the map acts on it.
            let z: Vec<f32> = (0..dim).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
            let targets: Vec<f64> = (0..NUM_DIMENSIONS)
                .map(|o| {
                    let lin: f64 = (0..dim).map(|i| a[o * dim + i] * f64::from(z[i])).sum();
                    (0.5 + lin + spec.noise_sd * rng.normal()).clamp(0.0, 1.0)
                })
                .collect();
            for r in 0..spec.renditions {
                let rendition = format!("sf{r}");
                let mut data = Vec::with_capacity(spec.frames * dim);
                for _ in 0..spec.frames / 2 {
                    let delta: Vec<f32> = (0..dim).map(|_| rng.uniform(-0.25, 0.25) as f32).collect();
                    data.extend(z.iter().zip(&delta).map(|(v, d)| v + d));
                    data.extend(z.iter().zip(&delta).map(|(v, d)| v - d));
                }
                let seq = EmbeddingSequence::new(&segment, &rendition, spec.layers.clone(), dim, data)?;
                let rel = PathBuf::from("embeddings").join(file_name(&segment, &rendition));
                write_embedding_file(&seq, &dir.join(&rel))?;
                let mut record = vec![segment.clone(), format!("piece{p:02}"), rendition.clone()];
                record.extend(targets.iter().map(f64::to_string));
                labels.write_record(&record)?;
                manifest.push(ManifestEntry {
                    segment_id: segment.clone(),
                    rendition,
                    embedding_path: rel,
                });
                embeddings.push(dir.join(&manifest.last().expect("just pushed").embedding_path));
            }
        }
    }
    labels.flush().map_err(|source| Error::Io { offset: 0, source })?;
    let manifest_path = dir.join("manifest.json");
    save_manifest(&manifest_path, &manifest)?;
    Ok(SyntheticPaths {
        manifest: manifest_path,
        labels: dir.join("labels.csv"),
        embeddings,
    })
}
