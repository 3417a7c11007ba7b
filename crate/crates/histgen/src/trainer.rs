//! Teacher-forced MLE training: Adam with bias correction, global-norm
//! gradient clipping, shuffled mini-batches and perplexity-based model
//! selection on the development split.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::corpus::{build_vocab, CorpusError, OutlineExample, Side, Vocabulary};
use crate::model::{encode_example, EncodedExample, HistGen, ModelConfig, ModelError};
use crate::params::{GradBuffer, ParamStore};
use crate::tensor::{Real, Rng};

pub const ADAM_BETA1: Real = 0.9;
pub const ADAM_BETA2: Real = 0.999;
pub const ADAM_EPS: Real = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("non-finite loss in epoch {epoch}, batch {batch}: {source}")]
    Diverged {
        epoch: usize,
        batch: usize,
        #[source]
        source: ModelError,
    },
    #[error("development split is empty")]
    EmptyDev,
}

/// Optimizer and schedule settings plus the model configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: Real,
    pub batch_size: usize,
    pub clip_norm: Real,
    pub max_epochs: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::paper()
    }
}

impl TrainConfig {
    /// Full-scale hyperparameters.
    pub fn paper() -> Self {
        TrainConfig {
            learning_rate: 0.0005,
            batch_size: 64,
            clip_norm: 5.0,
            max_epochs: 12,
            seed: 1,
            model: ModelConfig::default(),
        }
    }

    /// Laptop-scale preset: small dimensions, capped vocabularies.
    pub fn desk() -> Self {
        TrainConfig {
            model: ModelConfig {
                doc_vocab: 2000,
                head_vocab: 500,
                embed_dim: 32,
                hidden: 32,
                ..ModelConfig::default()
            },
            ..TrainConfig::paper()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            (self.learning_rate > 0.0, "learning_rate"),
            (self.batch_size > 0, "batch_size"),
            (self.clip_norm > 0.0, "clip_norm"),
            (self.max_epochs > 0, "max_epochs"),
            (self.model.doc_vocab > 0, "model.doc_vocab"),
            (self.model.head_vocab > 0, "model.head_vocab"),
            (self.model.embed_dim > 0, "model.embed_dim"),
            (self.model.hidden > 0, "model.hidden"),
            (self.model.max_heading_len > 0, "model.max_heading_len"),
            (self.model.boundary_loss_weight > 0.0, "model.boundary_loss_weight"),
        ];
        for (ok, name) in positive {
            if !ok {
                return Err(TrainError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

// ── Optimizer ───────────────────────────────────────────────────────

/// Per-parameter Adam moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<Real>>,
    v: Vec<Vec<Real>>,
    pub step: usize,
}

impl AdamState {
    pub fn zeros_like(store: &ParamStore) -> Self {
        AdamState {
            m: store.iter().map(|(_, p)| vec![0.0; p.data.len()]).collect(),
            v: store.iter().map(|(_, p)| vec![0.0; p.data.len()]).collect(),
            step: 0,
        }
    }
}

/// Standard bias-corrected Adam update.
pub fn adam_step(store: &mut ParamStore, grads: &GradBuffer, state: &mut AdamState, lr: Real) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        let g = grads.get(id);
        let m = &mut state.m[id.0];
        let v = &mut state.v[id.0];
        let data = store.data_mut(id);
        for i in 0..data.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Scale all gradients so the global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm. The small tolerance keeps clipping idempotent
/// under floating-point rounding.
pub fn clip_gradients(grads: &mut GradBuffer, max_norm: Real) -> Real {
    let norm = grads.global_norm();
    if norm > max_norm * (1.0 + 1e-12) {
        grads.scale(max_norm / norm);
    }
    norm
}

// ── Training loop ───────────────────────────────────────────────────

/// One line of the training log. Wallclock is reported on the console but
/// kept out of the persisted log so fixed-seed reruns are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Real,
    pub dev_ppl: Real,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub corpus_hash: String,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    /// Wallclock seconds per epoch, console-only.
    pub epoch_secs: Vec<f64>,
}

impl TrainOutcome {
    /// Line-delimited training log, one record per epoch.
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for rec in &self.history {
            out.push_str(&serde_json::to_string(rec).expect("serializable record"));
            out.push('\n');
        }
        out
    }
}

/// 64-bit FNV-1a, hex-encoded. Used for provenance stamps.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn corpus_hash(examples: &[OutlineExample]) -> String {
    let mut buf = Vec::new();
    for ex in examples {
        buf.extend_from_slice(serde_json::to_string(ex).expect("serializable").as_bytes());
        buf.push(b'\n');
    }
    fnv1a_hex(&buf)
}

pub fn config_hash(cfg: &TrainConfig) -> String {
    fnv1a_hex(serde_json::to_string(cfg).expect("serializable").as_bytes())
}

/// Mean per-token heading NLL (teacher forcing, gold boundaries),
/// exponentiated. EOS steps count as tokens.
pub fn perplexity(model: &HistGen, examples: &[EncodedExample]) -> Result<Real, TrainError> {
    let mut nll = 0.0;
    let mut steps = 0usize;
    for ex in examples {
        let values = model.example_loss(ex).map_err(|source| TrainError::Diverged {
            epoch: 0,
            batch: 0,
            source,
        })?;
        nll += values.heading_nll;
        steps += values.heading_steps;
    }
    if steps == 0 {
        return Err(TrainError::EmptyDev);
    }
    Ok((nll / steps as Real).exp())
}

/// Train an already-built model. Single-worker and fully deterministic:
/// examples are visited in seeded shuffle order and gradients accumulate in
/// batch order.
pub fn run_training(
    model: &mut HistGen,
    train: &[EncodedExample],
    dev: &[EncodedExample],
    cfg: &TrainConfig,
) -> Result<(ParamStore, Real, Vec<EpochRecord>, Vec<f64>), TrainError> {
    if dev.is_empty() {
        return Err(TrainError::EmptyDev);
    }
    // Separate stream from parameter init, which consumes Rng::new(seed).
    let mut rng = Rng::new(cfg.seed ^ SHUFFLE_SALT);
    let mut adam = AdamState::zeros_like(&model.store);
    let mut history = Vec::new();
    let mut epoch_secs = Vec::new();
    let mut best: Option<(ParamStore, Real)> = None;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = GradBuffer::zeros_like(&model.store);
            for &i in batch {
                let values = model
                    .loss_and_gradients(&train[i], &mut grads)
                    .map_err(|source| TrainError::Diverged {
                        epoch,
                        batch: batch_idx,
                        source,
                    })?;
                epoch_loss += values.total;
            }
            grads.scale(1.0 / batch.len() as Real);
            if !grads.all_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: batch_idx,
                    source: ModelError::NonFiniteLoss {
                        example_id: "<gradient>".into(),
                        value: Real::NAN,
                    },
                });
            }
            clip_gradients(&mut grads, cfg.clip_norm);
            adam_step(&mut model.store, &grads, &mut adam, cfg.learning_rate);
        }
        let train_loss = epoch_loss / train.len().max(1) as Real;
        let dev_ppl = perplexity(model, dev)?;
        if best.as_ref().map_or(true, |(_, b)| dev_ppl < *b) {
            best = Some((model.store.clone(), dev_ppl));
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            dev_ppl,
        });
        epoch_secs.push(started.elapsed().as_secs_f64());
    }
    let (best_store, best_ppl) = best.expect("at least one epoch ran");
    Ok((best_store, best_ppl, history, epoch_secs))
}

const SHUFFLE_SALT: u64 = 0x5348_5546;

/// Build vocabularies, encode the splits, train and package the best model.
pub fn train(
    train_examples: &[OutlineExample],
    dev_examples: &[OutlineExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let doc_vocab = build_vocab(train_examples, Side::Document, cfg.model.doc_vocab)?;
    let head_vocab = build_vocab(train_examples, Side::Heading, cfg.model.head_vocab)?;
    let enc = |exs: &[OutlineExample]| -> Vec<EncodedExample> {
        exs.iter()
            .map(|e| encode_example(e, &doc_vocab, &head_vocab))
            .collect()
    };
    let enc_train = enc(train_examples);
    let enc_dev = enc(dev_examples);

    let mut model = HistGen::init(
        cfg.model.clone(),
        doc_vocab.len(),
        head_vocab.len(),
        cfg.seed,
    );
    let (best_store, best_ppl, history, epoch_secs) =
        run_training(&mut model, &enc_train, &enc_dev, cfg)?;

    let mut corpus_bytes = Vec::new();
    for ex in train_examples.iter().chain(dev_examples) {
        corpus_bytes.extend_from_slice(serde_json::to_string(ex).unwrap().as_bytes());
        corpus_bytes.push(b'\n');
    }
    let checkpoint = Checkpoint {
        config: cfg.clone(),
        doc_vocab,
        head_vocab,
        best_dev_ppl: best_ppl,
        provenance: Provenance {
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            corpus_hash: fnv1a_hex(&corpus_bytes),
        },
        store: best_store,
    };
    Ok(TrainOutcome {
        checkpoint,
        history,
        epoch_secs,
    })
}

/// Run inference on one example and express the result as an
/// `OutlineExample` (predicted labels and decoded heading strings).
pub fn predict_outline(
    model: &HistGen,
    doc_vocab: &Vocabulary,
    head_vocab: &Vocabulary,
    ex: &OutlineExample,
) -> Result<(OutlineExample, crate::model::DecodeTrace), ModelError> {
    let paragraphs: Vec<Vec<usize>> = ex.paragraphs.iter().map(|p| doc_vocab.encode(p)).collect();
    let trace = model.generate_outline(&paragraphs)?;
    let headings: Vec<Vec<String>> = trace
        .headings
        .iter()
        .map(|ids| head_vocab.decode(ids))
        .collect();
    let predicted = OutlineExample {
        id: ex.id.clone(),
        category: ex.category.clone(),
        paragraphs: ex.paragraphs.clone(),
        labels: trace.labels.clone(),
        headings,
    };
    Ok((predicted, trace))
}
