//! End-to-end model: hierarchical encoder, boundary predictor and heading
//! decoder wired into one parameter store, with the teacher-forced training
//! loss and the inference path.

use serde::{Deserialize, Serialize};

use crate::boundary::{
    crf_loglik, current_only_logit, gpd_logit, mpd_logit, predict_boundaries, BoundaryParams,
    BoundarySequence, BoundaryVariant,
};
use crate::corpus::{spans_from_labels, OutlineExample, Vocabulary};
use crate::decoder::{
    greedy_decode_heading, teacher_force_heading, DecoderFlags, DecoderParams,
    DocumentDecodeState, HeadingDependency,
};
use crate::encoder::{encode_document, encode_paragraph, GruCell};
use crate::params::{Graph, GradBuffer, ParamId, ParamStore};
use crate::tensor::{grad_check, GradCheckReport, Real, Rng, Tape, TensorId, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("document has no non-empty paragraphs")]
    EmptyDocument,
    #[error("non-finite loss on example {example_id}: {value}")]
    NonFiniteLoss { example_id: String, value: Real },
}

/// Architecture and variant configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Document-side vocabulary cap (specials excluded).
    pub doc_vocab: usize,
    /// Heading-side vocabulary cap (specials excluded).
    pub head_vocab: usize,
    pub embed_dim: usize,
    /// Encoder GRU hidden size per direction; paragraph states and the
    /// decoder hidden carry 2x this.
    pub hidden: usize,
    pub boundary: BoundaryVariant,
    pub section_attention: bool,
    pub review: bool,
    pub heading_dependency: HeadingDependency,
    pub boundary_threshold: Real,
    pub max_heading_len: usize,
    /// Weight of the boundary term in the training loss.
    pub boundary_loss_weight: Real,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            doc_vocab: 130_000,
            head_vocab: 16_000,
            embed_dim: 300,
            hidden: 300,
            boundary: BoundaryVariant::Mpd,
            section_attention: true,
            review: true,
            heading_dependency: HeadingDependency::Markov,
            boundary_threshold: 0.5,
            max_heading_len: 8,
            boundary_loss_weight: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn state_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Apply ablation letters: P (boundary from the current paragraph only),
    /// S (no section attention), H (no heading dependency), R (no review).
    pub fn ablate(mut self, letters: &str) -> Self {
        for c in letters.chars() {
            match c.to_ascii_uppercase() {
                'P' => self.boundary = BoundaryVariant::CurrentOnly,
                'S' => self.section_attention = false,
                'H' => self.heading_dependency = HeadingDependency::None,
                'R' => self.review = false,
                _ => panic!("unknown ablation letter {c:?} (expected P, S, H or R)"),
            }
        }
        self
    }

    pub fn decoder_flags(&self) -> DecoderFlags {
        DecoderFlags {
            section_attention: self.section_attention,
            review: self.review,
            dependency: self.heading_dependency,
        }
    }
}

/// An example with vocabulary-encoded token ids.
#[derive(Debug, Clone)]
pub struct EncodedExample {
    pub id: String,
    pub paragraphs: Vec<Vec<usize>>,
    pub labels: Vec<u8>,
    pub headings: Vec<Vec<usize>>,
}

pub fn encode_example(
    ex: &OutlineExample,
    doc_vocab: &Vocabulary,
    head_vocab: &Vocabulary,
) -> EncodedExample {
    EncodedExample {
        id: ex.id.clone(),
        paragraphs: ex.paragraphs.iter().map(|p| doc_vocab.encode(p)).collect(),
        labels: ex.labels.clone(),
        headings: ex.headings.iter().map(|h| head_vocab.encode(h)).collect(),
    }
}

/// The model: all parameters plus the configuration that shaped them.
#[derive(Debug, Clone)]
pub struct HistGen {
    pub config: ModelConfig,
    pub store: ParamStore,
    doc_embed: ParamId,
    word_fwd: GruCell,
    word_bwd: GruCell,
    para_fwd: GruCell,
    para_bwd: GruCell,
    pub boundary: BoundaryParams,
    pub dec: DecoderParams,
}

impl HistGen {
    /// Build a model with fresh uniformly initialized parameters. The
    /// vocabulary sizes are table sizes including the four specials.
    pub fn init(config: ModelConfig, doc_vocab_len: usize, head_vocab_len: usize, seed: u64) -> Self {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(seed);
        let d = config.state_dim();
        let doc_embed =
            store.init_uniform("enc.embed", &[doc_vocab_len, config.embed_dim], &mut rng);
        let word_fwd = GruCell::init(&mut store, "enc.word.fwd", config.embed_dim, config.hidden, &mut rng);
        let word_bwd = GruCell::init(&mut store, "enc.word.bwd", config.embed_dim, config.hidden, &mut rng);
        let para_fwd = GruCell::init(&mut store, "enc.para.fwd", d, config.hidden, &mut rng);
        let para_bwd = GruCell::init(&mut store, "enc.para.bwd", d, config.hidden, &mut rng);
        let boundary = BoundaryParams::init(&mut store, config.boundary, d, &mut rng);
        let dec = DecoderParams::init(&mut store, head_vocab_len, config.embed_dim, d, d, &mut rng);
        HistGen {
            config,
            store,
            doc_embed,
            word_fwd,
            word_bwd,
            para_fwd,
            para_bwd,
            boundary,
            dec,
        }
    }

    /// Hierarchical encoding: paragraph states h_1..h_M (each 2H wide).
    pub fn encode(&self, g: &mut Graph, paragraphs: &[Vec<usize>]) -> Vec<TensorId> {
        assert!(!paragraphs.is_empty());
        let table = g.param(self.doc_embed);
        let rs: Vec<TensorId> = paragraphs
            .iter()
            .map(|tokens| {
                assert!(!tokens.is_empty(), "empty paragraph reached the encoder");
                let embs: Vec<TensorId> = tokens
                    .iter()
                    .map(|&t| g.tape.select_row(table, t))
                    .collect();
                encode_paragraph(g, &self.word_fwd, &self.word_bwd, &embs).1
            })
            .collect();
        encode_document(g, &self.para_fwd, &self.para_bwd, &rs)
    }

    fn boundary_logit_at(&self, g: &mut Graph, states: &[TensorId], m: usize) -> TensorId {
        match &self.boundary {
            BoundaryParams::Mpd(p) => mpd_logit(
                g,
                p,
                (m > 0).then(|| states[m - 1]),
                states[m],
                (m + 1 < states.len()).then(|| states[m + 1]),
            ),
            BoundaryParams::CurrentOnly(p) => current_only_logit(g, p, states[m]),
            BoundaryParams::Gpd(p) => gpd_logit(g, p, states, m),
            BoundaryParams::Crf(_) => unreachable!("CRF boundary loss is sequence-level"),
        }
    }

    /// Boundary term of the loss: per-paragraph binary cross-entropy for the
    /// sigmoid variants, negative sequence log-likelihood for the CRF.
    fn boundary_loss(&self, g: &mut Graph, states: &[TensorId], labels: &[u8]) -> TensorId {
        if let BoundaryParams::Crf(p) = &self.boundary {
            let ll = crf_loglik(g, p, states, labels);
            return g.tape.scale(ll, -1.0);
        }
        let mut total = g.tape.scalar(0.0);
        for (m, &l) in labels.iter().enumerate() {
            let logit = self.boundary_logit_at(g, states, m);
            // bce(x, l) = logsumexp([0, x]) - l*x, stable for either label
            let zero = g.tape.scalar(0.0);
            let cat = g.tape.concat(&[zero, logit]);
            let lse = g.tape.logsumexp(cat);
            let lx = g.tape.scale(logit, l as Real);
            let bce = g.tape.sub(lse, lx);
            total = g.tape.add(total, bce);
        }
        total
    }

    /// Teacher-forced loss graph: summed heading NLL (EOS steps included)
    /// plus the weighted boundary term. Also reports the per-token pieces
    /// perplexity needs.
    pub fn loss_graph(&self, g: &mut Graph, ex: &EncodedExample) -> LossBreakdown {
        let states = self.encode(g, &ex.paragraphs);
        let boundary_term = self.boundary_loss(g, &states, &ex.labels);

        let flags = self.config.decoder_flags();
        let mut doc = DocumentDecodeState::new();
        let spans = spans_from_labels(&ex.labels);
        assert_eq!(spans.len(), ex.headings.len(), "labels and headings disagree");
        let mut heading_sum = g.tape.scalar(0.0);
        let mut heading_steps = 0usize;
        for (span, gold) in spans.iter().zip(&ex.headings) {
            let section = &states[span.0..=span.1];
            let pairs =
                teacher_force_heading(g, &self.dec, &flags, &mut doc, section, states[span.1], gold);
            heading_steps += pairs.len();
            for (logits, target) in pairs {
                let lse = g.tape.logsumexp(logits);
                let gold_logit = g.tape.index(logits, target);
                let nll = g.tape.sub(lse, gold_logit);
                heading_sum = g.tape.add(heading_sum, nll);
            }
        }

        let weighted = g.tape.scale(boundary_term, self.config.boundary_loss_weight);
        let total = g.tape.add(heading_sum, weighted);
        LossBreakdown {
            total,
            heading_nll: heading_sum,
            boundary: boundary_term,
            heading_steps,
        }
    }

    /// Forward-only loss evaluation with a finiteness check.
    pub fn example_loss(&self, ex: &EncodedExample) -> Result<LossValues, ModelError> {
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &self.store);
        let breakdown = self.loss_graph(&mut g, ex);
        let total = tape.scalar_value(breakdown.total);
        if !total.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                example_id: ex.id.clone(),
                value: total,
            });
        }
        Ok(LossValues {
            total,
            heading_nll: tape.scalar_value(breakdown.heading_nll),
            boundary: tape.scalar_value(breakdown.boundary),
            heading_steps: breakdown.heading_steps,
        })
    }

    /// Loss, backward pass and gradient harvest for one example.
    pub fn loss_and_gradients(
        &self,
        ex: &EncodedExample,
        grads: &mut GradBuffer,
    ) -> Result<LossValues, ModelError> {
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &self.store);
        let breakdown = self.loss_graph(&mut g, ex);
        let total = g.tape.scalar_value(breakdown.total);
        if !total.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                example_id: ex.id.clone(),
                value: total,
            });
        }
        let values = LossValues {
            total,
            heading_nll: g.tape.scalar_value(breakdown.heading_nll),
            boundary: g.tape.scalar_value(breakdown.boundary),
            heading_steps: breakdown.heading_steps,
        };
        g.tape.backward(breakdown.total);
        debug_assert!(g.tape.grads_finite());
        g.harvest(grads);
        Ok(values)
    }

    /// Boundary prediction alone (the identify step of step-wise systems).
    pub fn predict_boundary_labels(
        &self,
        paragraphs: &[Vec<usize>],
    ) -> Result<BoundarySequence, ModelError> {
        if paragraphs.is_empty() || paragraphs.iter().any(|p| p.is_empty()) {
            return Err(ModelError::EmptyDocument);
        }
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &self.store);
        let states = self.encode(&mut g, paragraphs);
        Ok(predict_boundaries(
            &mut g,
            &self.boundary,
            &states,
            self.config.boundary_threshold,
        ))
    }

    /// Greedy-decode one heading per section of a fixed segmentation.
    pub fn decode_headings_for_labels(
        &self,
        paragraphs: &[Vec<usize>],
        labels: &[u8],
        probs: Vec<Real>,
    ) -> Result<DecodeTrace, ModelError> {
        if paragraphs.is_empty() || paragraphs.iter().any(|p| p.is_empty()) {
            return Err(ModelError::EmptyDocument);
        }
        assert_eq!(paragraphs.len(), labels.len());
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &self.store);
        let states = self.encode(&mut g, paragraphs);
        let labels = labels.to_vec();
        let flags = self.config.decoder_flags();
        let mut doc = DocumentDecodeState::new();
        let mut headings = Vec::new();
        let mut attention = Vec::new();
        let mut review_sizes = Vec::new();
        let mut degenerate_headings = 0usize;
        for (start, end) in spans_from_labels(&labels) {
            let section = &states[start..=end];
            let decoded = greedy_decode_heading(
                &mut g,
                &self.dec,
                &flags,
                &mut doc,
                section,
                states[end],
                self.config.max_heading_len,
            );
            review_sizes.push(decoded.review_size_at_start);
            attention.push(decoded.attention);
            degenerate_headings += usize::from(decoded.degenerate);
            headings.push(decoded.tokens);
        }
        Ok(DecodeTrace {
            labels,
            boundary_probs: probs,
            headings,
            attention,
            review_sizes,
            attention_calls: doc.attention_calls,
            review_calls: doc.review_calls,
            degenerate_headings,
        })
    }

    /// Full inference: encode, predict boundaries, then greedy-decode one
    /// heading per section with review and heading-dependency threading.
    pub fn generate_outline(&self, paragraphs: &[Vec<usize>]) -> Result<DecodeTrace, ModelError> {
        let BoundarySequence { labels, probs } = self.predict_boundary_labels(paragraphs)?;
        self.decode_headings_for_labels(paragraphs, &labels, probs)
    }

    /// Central-difference check of the full loss over every parameter.
    pub fn grad_check_example(
        &self,
        ex: &EncodedExample,
        eps: Real,
        tol: Real,
    ) -> Result<GradCheckReport, TensorError> {
        let flat = self.store.flat();
        grad_check(&flat, eps, tol, |tape, leaves| {
            let mut g = Graph::with_leaves(tape, &self.store, leaves);
            self.loss_graph(&mut g, ex).total
        })
    }
}

/// Loss tensors of one teacher-forced example.
pub struct LossBreakdown {
    pub total: TensorId,
    pub heading_nll: TensorId,
    pub boundary: TensorId,
    /// Number of heading decode steps (EOS steps counted).
    pub heading_steps: usize,
}

/// Loss values of one teacher-forced example.
#[derive(Debug, Clone, Copy)]
pub struct LossValues {
    pub total: Real,
    pub heading_nll: Real,
    pub boundary: Real,
    pub heading_steps: usize,
}

/// Per-document inference record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub labels: Vec<u8>,
    pub boundary_probs: Vec<Real>,
    /// Heading token ids per predicted section.
    pub headings: Vec<Vec<usize>>,
    /// Section attention weights per section, per decode step.
    pub attention: Vec<Vec<Vec<Real>>>,
    /// Review-set size at the start of each heading.
    pub review_sizes: Vec<usize>,
    pub attention_calls: u64,
    pub review_calls: u64,
    pub degenerate_headings: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(hidden: usize) -> ModelConfig {
        ModelConfig {
            doc_vocab: 10,
            head_vocab: 8,
            embed_dim: 2,
            hidden,
            ..ModelConfig::default()
        }
    }

    fn toy_example() -> EncodedExample {
        EncodedExample {
            id: "toy".into(),
            paragraphs: vec![vec![4, 5], vec![6], vec![5, 7], vec![8]],
            labels: vec![0, 1, 0, 1],
            headings: vec![vec![4, 5], vec![6]],
        }
    }

    #[test]
    fn loss_is_finite_and_positive() {
        let model = HistGen::init(tiny_config(2), 10, 8, 7);
        let values = model.example_loss(&toy_example()).unwrap();
        assert!(values.total.is_finite());
        assert!(values.total > 0.0);
        assert!(values.heading_nll > 0.0);
        assert_eq!(values.heading_steps, 3 + 2); // (2+1) + (1+1)
    }

    #[test]
    fn uniform_output_layer_costs_ln_v_per_token() {
        let mut model = HistGen::init(tiny_config(2), 10, 8, 7);
        let w = model.dec.w_out;
        let n = model.store.get(w).data.len();
        *model.store.data_mut(w) = vec![0.0; n];
        let b = model.dec.b_out;
        *model.store.data_mut(b) = vec![0.0; 8];
        let values = model.example_loss(&toy_example()).unwrap();
        let per_token = values.heading_nll / values.heading_steps as Real;
        assert!((per_token - (8.0 as Real).ln()).abs() < 1e-10);
    }

    #[test]
    fn gradients_accumulate_for_used_parameters() {
        let model = HistGen::init(tiny_config(2), 10, 8, 7);
        let mut grads = GradBuffer::zeros_like(&model.store);
        model.loss_and_gradients(&toy_example(), &mut grads).unwrap();
        assert!(grads.all_finite());
        assert!(grads.global_norm() > 0.0);
        // unused embedding rows keep zero gradients
        let emb_grad = grads.get(model.doc_embed);
        let dim = model.config.embed_dim;
        assert!(emb_grad[..dim].iter().all(|&v| v == 0.0)); // <unk> row unused
        assert!(emb_grad[4 * dim..5 * dim].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn generate_satisfies_structural_contracts() {
        for seed in [1u64, 2, 3] {
            let model = HistGen::init(tiny_config(2), 10, 8, seed);
            let paragraphs = vec![vec![4, 5], vec![6, 7], vec![8]];
            let trace = model.generate_outline(&paragraphs).unwrap();
            assert_eq!(trace.labels.len(), 3);
            assert_eq!(*trace.labels.last().unwrap(), 1);
            let sections = trace.labels.iter().filter(|&&l| l == 1).count();
            assert_eq!(trace.headings.len(), sections);
            assert_eq!(trace.boundary_probs.len(), 3);
            assert!(trace.headings.iter().all(|h| !h.is_empty()));
        }
    }

    #[test]
    fn single_paragraph_document_yields_one_section() {
        let model = HistGen::init(tiny_config(2), 10, 8, 11);
        let trace = model.generate_outline(&[vec![4, 5, 6]]).unwrap();
        assert_eq!(trace.labels, vec![1]);
        assert_eq!(trace.headings.len(), 1);
    }

    #[test]
    fn empty_document_is_an_error() {
        let model = HistGen::init(tiny_config(2), 10, 8, 11);
        assert!(matches!(
            model.generate_outline(&[]),
            Err(ModelError::EmptyDocument)
        ));
    }

    #[test]
    fn ablation_letters_toggle_variants() {
        let cfg = tiny_config(2).ablate("PSHR");
        assert_eq!(cfg.boundary, BoundaryVariant::CurrentOnly);
        assert!(!cfg.section_attention);
        assert!(!cfg.review);
        assert_eq!(cfg.heading_dependency, HeadingDependency::None);
    }

    #[test]
    fn pshr_model_never_calls_attention() {
        let model = HistGen::init(tiny_config(2).ablate("PSHR"), 10, 8, 5);
        let trace = model
            .generate_outline(&[vec![4, 5], vec![6], vec![7, 8]])
            .unwrap();
        assert_eq!(trace.attention_calls, 0);
        assert_eq!(trace.review_calls, 0);
    }

    #[cfg(not(feature = "f32"))]
    #[test]
    fn full_loss_gradients_match_central_differences() {
        // Exercises every mechanism: MPD boundary, section attention,
        // Markov heading dependency and review, across two headings.
        let model = HistGen::init(tiny_config(2), 10, 8, 13);
        let report = model
            .grad_check_example(&toy_example(), 1e-5, 1e-4)
            .unwrap();
        assert!(report.passed(), "{report}");
    }

    #[cfg(not(feature = "f32"))]
    #[test]
    fn variant_loss_gradients_match_central_differences() {
        for (cfg, name) in [
            (tiny_config(1).ablate("P"), "current-only"),
            (
                ModelConfig {
                    boundary: BoundaryVariant::Gpd,
                    ..tiny_config(1)
                },
                "gpd",
            ),
            (
                ModelConfig {
                    boundary: BoundaryVariant::Crf,
                    ..tiny_config(1)
                },
                "crf",
            ),
            (
                ModelConfig {
                    heading_dependency: HeadingDependency::Global,
                    ..tiny_config(1)
                },
                "ghd",
            ),
        ] {
            let model = HistGen::init(cfg, 10, 8, 17);
            let report = model
                .grad_check_example(&toy_example(), 1e-5, 1e-4)
                .unwrap();
            assert!(report.passed(), "{name}: {report}");
        }
    }

    /// Independent scalar-arithmetic oracle for the full loss on a
    /// two-paragraph, one-heading document with one-dimensional cells.
    #[test]
    fn loss_matches_independent_scalar_trace() {
        let cfg = ModelConfig {
            doc_vocab: 6,
            head_vocab: 5,
            embed_dim: 1,
            hidden: 1,
            ..ModelConfig::default()
        };
        let model = HistGen::init(cfg, 6, 5, 23);
        let ex = EncodedExample {
            id: "trace".into(),
            paragraphs: vec![vec![4], vec![5]],
            labels: vec![0, 1],
            headings: vec![vec![4]],
        };
        let got = model.example_loss(&ex).unwrap();

        // -- oracle: plain f64 arithmetic over the stored parameters --
        let p = |name: &str| model.store.get(model.store.id_of(name).unwrap()).data.clone();
        let sig = |x: Real| 1.0 / (1.0 + (-x).exp());
        let gru1 = |pre: &str, x: Real, h: Real| {
            let v = |n: &str| p(&format!("{pre}.{n}"))[0];
            let z = sig(v("wz") * x + v("uz") * h + v("bz"));
            let r = sig(v("wr") * x + v("ur") * h + v("br"));
            let cand = (v("wh") * x + v("uh") * (r * h) + v("bh")).tanh();
            (1.0 - z) * h + z * cand
        };
        // word encodings (single-token paragraphs): r_m = [fwd, bwd] of one step
        let e4 = p("enc.embed")[4];
        let e5 = p("enc.embed")[5];
        let r1 = [gru1("enc.word.fwd", e4, 0.0), gru1("enc.word.bwd", e4, 0.0)];
        let r2 = [gru1("enc.word.fwd", e5, 0.0), gru1("enc.word.bwd", e5, 0.0)];
        // paragraph-level bi-GRU (input dim 2, hidden 1)
        let gru2 = |pre: &str, x: [Real; 2], h: Real| {
            let v = |n: &str| p(&format!("{pre}.{n}"));
            let dotx = |w: &[Real]| w[0] * x[0] + w[1] * x[1];
            let z = sig(dotx(&v("wz")) + v("uz")[0] * h + v("bz")[0]);
            let r = sig(dotx(&v("wr")) + v("ur")[0] * h + v("br")[0]);
            let cand = (dotx(&v("wh")) + v("uh")[0] * (r * h) + v("bh")[0]).tanh();
            (1.0 - z) * h + z * cand
        };
        let f1 = gru2("enc.para.fwd", r1, 0.0);
        let f2 = gru2("enc.para.fwd", r2, f1);
        let b2 = gru2("enc.para.bwd", r2, 0.0);
        let b1 = gru2("enc.para.bwd", r1, b2);
        let h1 = [f1, b1];
        let h2 = [f2, b2];
        // boundary BCE under MPD with zero-vector edge neighbours
        let w1 = p("boundary.w1");
        let w2 = p("boundary.w2");
        let bilinear = |a: [Real; 2], w: &[Real], b: [Real; 2]| {
            a[0] * (w[0] * b[0] + w[1] * b[1]) + a[1] * (w[2] * b[0] + w[3] * b[1])
        };
        let logit1 = bilinear([0.0, 0.0], &w1, h1) + bilinear(h1, &w2, h2);
        let logit2 = bilinear(h1, &w1, h2) + bilinear(h2, &w2, [0.0, 0.0]);
        let bce = |x: Real, l: Real| (1.0 as Real + x.exp()).ln() - l * x;
        let boundary = bce(logit1, 0.0) + bce(logit2, 1.0);
        // decoder: section = [h1, h2], closing state h2, gold heading [4]
        let dot2 = |a: [Real; 2], b: [Real; 2]| a[0] * b[0] + a[1] * b[1];
        let mat2 = |w: &[Real], x: [Real; 2]| [w[0] * x[0] + w[1] * x[1], w[2] * x[0] + w[3] * x[1]];
        let wp = p("dec.w_para");
        let bi = p("dec.b_init");
        let mut h = [
            mat2(&wp, h2)[0] + bi[0],
            mat2(&wp, h2)[1] + bi[1],
        ];
        let emb = p("dec.embed");
        // Decoder GRU, traced gate by gate (hidden dim 2, input dim 5).
        let dec_step = |x: [Real; 5], h: [Real; 2]| {
            let v = |n: &str| p(&format!("dec.cell.{n}"));
            let row = |w: &[Real], j: usize| (0..5).map(|i| w[j * 5 + i] * x[i]).sum::<Real>();
            let rec = |u: &[Real], j: usize, hh: [Real; 2]| u[j * 2] * hh[0] + u[j * 2 + 1] * hh[1];
            let mut z = [0.0; 2];
            let mut r = [0.0; 2];
            for j in 0..2 {
                z[j] = sig(row(&v("wz"), j) + rec(&v("uz"), j, h) + v("bz")[j]);
                r[j] = sig(row(&v("wr"), j) + rec(&v("ur"), j, h) + v("br")[j]);
            }
            let rh = [r[0] * h[0], r[1] * h[1]];
            let mut out = [0.0; 2];
            for j in 0..2 {
                let cand = (row(&v("wh"), j) + rec(&v("uh"), j, rh) + v("bh")[j]).tanh();
                out[j] = (1.0 - z[j]) * h[j] + z[j] * cand;
            }
            out
        };

        let head_vocab = 5;
        let w_out = p("dec.w_out");
        let b_out = p("dec.b_out");
        let logits = |u: [Real; 6]| -> Vec<Real> {
            (0..head_vocab)
                .map(|k| (0..6).map(|r| w_out[r * head_vocab + k] * u[r]).sum::<Real>() + b_out[k])
                .collect()
        };
        let nll = |lg: &[Real], t: usize| {
            let mx = lg.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
            let lse = mx + lg.iter().map(|&v| (v - mx).exp()).sum::<Real>().ln();
            lse - lg[t]
        };
        let attend = |hq: [Real; 2]| {
            let s1 = dot2(h1, hq);
            let s2 = dot2(h2, hq);
            let mx = s1.max(s2);
            let (x1, x2) = ((s1 - mx).exp(), (s2 - mx).exp());
            let a1 = x1 / (x1 + x2);
            [a1 * h1[0] + (1.0 - a1) * h2[0], a1 * h1[1] + (1.0 - a1) * h2[1]]
        };
        let mut heading_nll = 0.0;
        // step 1: prev = BOS (id 1), review empty -> cD = 0
        let c = attend(h);
        let x1v = [emb[1], c[0], c[1], 0.0, 0.0];
        h = dec_step(x1v, h);
        heading_nll += nll(&logits([h[0], h[1], c[0], c[1], 0.0, 0.0]), 4);
        // step 2: prev = gold token 4, review = {h}, beta = [1] -> cD = h
        let h_first = h;
        let c2 = attend(h);
        let x2v = [emb[4], c2[0], c2[1], h_first[0], h_first[1]];
        let h2s = dec_step(x2v, h);
        heading_nll += nll(
            &logits([h2s[0], h2s[1], c2[0], c2[1], h_first[0], h_first[1]]),
            crate::corpus::EOS,
        );

        let expect = heading_nll + boundary;
        assert!(
            (got.total - expect).abs() < 1e-9,
            "model {} vs oracle {}",
            got.total,
            expect
        );
    }
}
