//! Checkpoint persistence: a JSON manifest line (version, config,
//! vocabularies, tensor names and shapes) followed by the raw tensor
//! payload. Values are stored as little-endian bits, so a reloaded model
//! reproduces forward outputs bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::model::HistGen;
use crate::params::ParamStore;
use crate::tensor::{read_tensor, write_tensor, Real, PRECISION};
use crate::trainer::{Provenance, TrainConfig};

pub const CHECKPOINT_VERSION: &str = "histgen-ckpt-v1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint manifest: {0}")]
    BadManifest(String),
    #[error("checkpoint version {found:?} does not match {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("checkpoint precision {found:?} does not match build precision {expected:?}")]
    PrecisionMismatch { found: String, expected: String },
    #[error("tensor {name}: payload shape {found:?} does not match manifest {expected:?}")]
    ShapeMismatch {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: String,
    precision: String,
    config: TrainConfig,
    doc_vocab: Vocabulary,
    head_vocab: Vocabulary,
    best_dev_ppl: Real,
    provenance: Provenance,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

/// A trained model snapshot plus everything needed to run it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub doc_vocab: Vocabulary,
    pub head_vocab: Vocabulary,
    pub best_dev_ppl: Real,
    pub provenance: Provenance,
    pub store: ParamStore,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let wrap = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        let manifest = Manifest {
            version: CHECKPOINT_VERSION.into(),
            precision: PRECISION.into(),
            config: self.config.clone(),
            doc_vocab: self.doc_vocab.clone(),
            head_vocab: self.head_vocab.clone(),
            best_dev_ppl: self.best_dev_ppl,
            provenance: self.provenance.clone(),
            tensors: self
                .store
                .iter()
                .map(|(_, p)| TensorMeta {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                })
                .collect(),
        };
        let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
        serde_json::to_writer(&mut w, &manifest)
            .map_err(|e| CheckpointError::BadManifest(e.to_string()))?;
        w.write_all(b"\n").map_err(wrap)?;
        for (_, p) in self.store.iter() {
            write_tensor(&mut w, &p.shape, &p.data).map_err(wrap)?;
        }
        w.flush().map_err(wrap)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let wrap = |source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut r = BufReader::new(File::open(path).map_err(wrap)?);
        let mut line = String::new();
        r.read_line(&mut line).map_err(wrap)?;
        let mut manifest: Manifest = serde_json::from_str(line.trim_end())
            .map_err(|e| CheckpointError::BadManifest(e.to_string()))?;
        if manifest.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: manifest.version,
                expected: CHECKPOINT_VERSION.into(),
            });
        }
        if manifest.precision != PRECISION {
            return Err(CheckpointError::PrecisionMismatch {
                found: manifest.precision,
                expected: PRECISION.into(),
            });
        }
        manifest.doc_vocab.rebuild_index();
        manifest.head_vocab.rebuild_index();

        let mut store = ParamStore::new();
        for meta in &manifest.tensors {
            let (shape, data) = read_tensor(&mut r).map_err(wrap)?;
            if shape != meta.shape {
                return Err(CheckpointError::ShapeMismatch {
                    name: meta.name.clone(),
                    found: shape,
                    expected: meta.shape.clone(),
                });
            }
            store.insert(&meta.name, shape, data);
        }
        let mut trailing = Vec::new();
        r.read_to_end(&mut trailing).map_err(wrap)?;
        if !trailing.is_empty() {
            return Err(CheckpointError::BadManifest(format!(
                "{} trailing bytes after tensor payload",
                trailing.len()
            )));
        }
        Ok(Checkpoint {
            config: manifest.config,
            doc_vocab: manifest.doc_vocab,
            head_vocab: manifest.head_vocab,
            best_dev_ppl: manifest.best_dev_ppl,
            provenance: manifest.provenance,
            store,
        })
    }

    /// Rebuild the runnable model. Parameter registration order is
    /// deterministic, so the stored tensors drop into place by name.
    pub fn model(&self) -> HistGen {
        let mut model = HistGen::init(
            self.config.model.clone(),
            self.doc_vocab.len(),
            self.head_vocab.len(),
            self.config.seed,
        );
        let names: Vec<String> = model.store.iter().map(|(_, p)| p.name.clone()).collect();
        for name in names {
            let dst = model.store.id_of(&name).expect("name from same store");
            let src = self
                .store
                .id_of(&name)
                .unwrap_or_else(|| panic!("checkpoint is missing tensor {name}"));
            let data = self.store.get(src).data.clone();
            assert_eq!(
                self.store.get(src).shape,
                model.store.get(dst).shape,
                "shape drift for {name}"
            );
            *model.store.data_mut(dst) = data;
        }
        model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncodedExample, ModelConfig};
    use crate::trainer;

    fn sample_checkpoint() -> Checkpoint {
        let corpus: Vec<crate::corpus::OutlineExample> = (0..6)
            .map(|i| crate::corpus::OutlineExample {
                id: format!("d{i}"),
                category: "mixture".into(),
                paragraphs: vec![vec!["aa".into(), "bb".into()], vec!["cc".into()]],
                labels: vec![0, 1],
                headings: vec![vec!["aa".into()]],
            })
            .collect();
        let cfg = trainer::TrainConfig {
            learning_rate: 0.01,
            batch_size: 4,
            clip_norm: 5.0,
            max_epochs: 1,
            seed: 9,
            model: ModelConfig {
                doc_vocab: 20,
                head_vocab: 10,
                embed_dim: 3,
                hidden: 2,
                ..ModelConfig::default()
            },
        };
        trainer::train(&corpus, &corpus[..2].to_vec(), &cfg)
            .unwrap()
            .checkpoint
    }

    #[test]
    fn round_trip_reproduces_forward_outputs_bit_exactly() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();

        let probe = EncodedExample {
            id: "probe".into(),
            paragraphs: vec![vec![4, 5], vec![4]],
            labels: vec![0, 1],
            headings: vec![vec![4]],
        };
        let before = ckpt.model().example_loss(&probe).unwrap().total;
        let after = loaded.model().example_loss(&probe).unwrap().total;
        assert_eq!(before.to_bits(), after.to_bits());
        assert_eq!(ckpt.provenance, loaded.provenance);
        assert_eq!(ckpt.best_dev_ppl, loaded.best_dev_ppl);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        ckpt.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let tampered = String::from_utf8_lossy(&bytes).replace("histgen-ckpt-v1", "histgen-ckpt-v0");
        std::fs::write(&path, tampered.as_bytes()).unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(CheckpointError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let ckpt = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        ckpt.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
