//! Hierarchical structured outline generation.
//!
//! Given a multi-paragraph document, the model segments it into sections and
//! generates a short heading per section. The library contains everything
//! needed to reproduce that pipeline end to end on a single machine:
//!
//! - [`tensor`]: a minimal dense-tensor engine with tape-based reverse-mode
//!   differentiation (enough for GRUs, bilinear forms, attention, softmax).
//! - [`corpus`]: building `<paragraphs, boundary labels, headings>` triples
//!   from heading-annotated articles, plus tokenization, vocabularies and
//!   train/dev/test splits.
//! - [`encoder`], [`boundary`], [`decoder`], [`model`]: the hierarchical
//!   encoder, the section boundary predictors (Markov paragraph dependency,
//!   current-paragraph-only, global attention, linear-chain CRF) and the
//!   heading decoder with section-aware attention, Markov/global heading
//!   dependency and a review mechanism.
//! - [`trainer`]: teacher-forced MLE training with Adam, gradient clipping
//!   and perplexity-based model selection; [`checkpoint`] for persistence.
//! - [`metrics`]: exact-match and Rouge-1 heading metrics with paired
//!   significance testing.
//! - [`baselines`]: TextRank headings and the identify-then-generate /
//!   generate-then-aggregate step-wise pipelines.
//! - [`cli`]: the `histgen` command-line surface.

pub mod baselines;
pub mod boundary;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod decoder;
pub mod encoder;
pub mod metrics;
pub mod model;
pub mod params;
pub mod synthetic;
pub mod tensor;
pub mod trainer;

pub use tensor::Real;
