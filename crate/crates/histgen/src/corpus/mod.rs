//! Corpus construction: `<paragraphs, boundary labels, headings>` triples
//! from heading-annotated articles, plus tokenization, vocabularies and
//! deterministic splits.

mod wikitext;

pub use wikitext::{read_article_file, read_dump, read_input_dir, WikitextFormat};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tensor::Rng;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary size must be at least 1 (got {0})")]
    BadVocabSize(usize),
    #[error("need at least 10 examples to split, got {0}")]
    TooFewExamples(usize),
    #[error("invalid record at {path}:{line}: {reason}")]
    InvalidRecord {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Why an article was excluded from the corpus. Not an error: rejection is
/// part of the construction rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    /// No first-level headings, or no section kept any paragraphs.
    NoSections,
    /// More than ten first-level headings.
    TooManySections(usize),
    /// A heading preprocessed to an empty token sequence.
    EmptyHeading,
}

/// One block of a source article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Block {
    /// level >= 1; level 1 corresponds to top-level sections.
    Heading { level: usize, text: String },
    Paragraph(String),
}

/// A heading-annotated source article.
#[derive(Debug, Clone)]
pub struct RawArticle {
    pub id: String,
    pub category: String,
    pub blocks: Vec<Block>,
}

/// The `<paragraphs, boundary labels, headings>` triple. Label 1 marks the
/// last paragraph of a section; the final paragraph always carries label 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlineExample {
    pub id: String,
    pub category: String,
    pub paragraphs: Vec<Vec<String>>,
    pub labels: Vec<u8>,
    pub headings: Vec<Vec<String>>,
}

impl OutlineExample {
    /// Check the structural invariants: label/heading consistency, final
    /// boundary, non-empty headings.
    pub fn validate(&self) -> Result<(), String> {
        let m = self.paragraphs.len();
        let n = self.headings.len();
        if self.labels.len() != m {
            return Err(format!("{} paragraphs but {} labels", m, self.labels.len()));
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err("labels must be 0 or 1".into());
        }
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        if ones != n {
            return Err(format!("{} boundary labels but {} headings", ones, n));
        }
        if n == 0 || m < n {
            return Err(format!("invalid section count: M={m}, N={n}"));
        }
        if *self.labels.last().unwrap() != 1 {
            return Err("final paragraph must close a section".into());
        }
        if self.headings.iter().any(|h| h.is_empty()) {
            return Err("empty heading".into());
        }
        if self.paragraphs.iter().any(|p| p.is_empty()) {
            return Err("empty paragraph".into());
        }
        Ok(())
    }

    pub fn section_count(&self) -> usize {
        self.headings.len()
    }

    /// (start, end) inclusive paragraph index spans of the sections.
    pub fn section_spans(&self) -> Vec<(usize, usize)> {
        spans_from_labels(&self.labels)
    }
}

/// Maximal runs ending at 1-labels. The trailing run is always closed.
pub fn spans_from_labels(labels: &[u8]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, &l) in labels.iter().enumerate() {
        if l == 1 {
            spans.push((start, i));
            start = i + 1;
        }
    }
    if start < labels.len() {
        spans.push((start, labels.len() - 1));
    }
    spans
}

// ── Tokenization ────────────────────────────────────────────────────

/// Whitespace-tokenize, lowercase, drop pure digit words, then strip
/// characters outside [a-z0-9'-], dropping tokens that become empty.
pub fn preprocess_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            if !lower.is_empty() && lower.chars().all(|c| c.is_ascii_digit()) {
                return None;
            }
            let kept: String = lower
                .chars()
                .filter(|&c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\'' || c == '-')
                .collect();
            if kept.is_empty() {
                None
            } else {
                Some(kept)
            }
        })
        .collect()
}

// ── Article parsing ─────────────────────────────────────────────────

/// Turn a raw article into an outline example. Only first-level headings
/// start sections; deeper headings are dropped and their paragraphs stay in
/// the enclosing section. Paragraphs before the first heading are prepended
/// to the first section. Articles failing the section-count filter are
/// rejected.
pub fn parse_article(raw: &RawArticle) -> Result<OutlineExample, Rejection> {
    let mut preamble: Vec<Vec<String>> = Vec::new();
    let mut sections: Vec<(Vec<String>, Vec<Vec<String>>)> = Vec::new();

    for block in &raw.blocks {
        match block {
            Block::Heading { level, text } if *level == 1 => {
                let tokens = preprocess_tokens(text);
                if tokens.is_empty() {
                    return Err(Rejection::EmptyHeading);
                }
                sections.push((tokens, Vec::new()));
            }
            Block::Heading { .. } => {} // deeper level: dropped
            Block::Paragraph(text) => {
                let tokens = preprocess_tokens(text);
                if tokens.is_empty() {
                    continue;
                }
                match sections.last_mut() {
                    Some((_, paras)) => paras.push(tokens),
                    None => preamble.push(tokens),
                }
            }
        }
    }

    sections.retain(|(_, paras)| !paras.is_empty());
    if let Some((_, paras)) = sections.first_mut() {
        for p in preamble.into_iter().rev() {
            paras.insert(0, p);
        }
    }
    if sections.is_empty() {
        return Err(Rejection::NoSections);
    }

    let mut example = OutlineExample {
        id: raw.id.clone(),
        category: raw.category.clone(),
        paragraphs: Vec::new(),
        labels: Vec::new(),
        headings: Vec::new(),
    };
    for (heading, paras) in sections {
        let k = paras.len();
        example.paragraphs.extend(paras);
        example.labels.extend(std::iter::repeat(0).take(k - 1));
        example.labels.push(1);
        example.headings.push(heading);
    }
    filter_article(&example)?;
    debug_assert!(example.validate().is_ok());
    Ok(example)
}

/// Keep iff 1 <= N <= 10.
pub fn filter_article(example: &OutlineExample) -> Result<(), Rejection> {
    let n = example.section_count();
    if n == 0 {
        Err(Rejection::NoSections)
    } else if n > 10 {
        Err(Rejection::TooManySections(n))
    } else {
        Ok(())
    }
}

// ── Vocabulary ──────────────────────────────────────────────────────

pub const UNK: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const PAD: usize = 3;
pub const SPECIALS: [&str; 4] = ["<unk>", "<bos>", "<eos>", "<pad>"];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Rebuild the token->index map after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Document,
    Heading,
}

/// Top-`size` tokens by corpus frequency (ties broken lexicographically)
/// plus the four specials at fixed indices. Built from the training split.
pub fn build_vocab(
    examples: &[OutlineExample],
    side: Side,
    size: usize,
) -> Result<Vocabulary, CorpusError> {
    if size < 1 {
        return Err(CorpusError::BadVocabSize(size));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for ex in examples {
        let seqs: &[Vec<String>] = match side {
            Side::Document => &ex.paragraphs,
            Side::Heading => &ex.headings,
        };
        for seq in seqs {
            for tok in seq {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    tokens.extend(ranked.into_iter().take(size).map(|(t, _)| t.to_string()));
    Ok(Vocabulary::from_tokens(tokens))
}

// ── Splits ──────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct CorpusSplits {
    pub train: Vec<OutlineExample>,
    pub dev: Vec<OutlineExample>,
    pub test: Vec<OutlineExample>,
}

/// Deterministic shuffled 80/10/10 partition. Dev and test take floor(10%)
/// each; the remainder goes to train.
pub fn split_corpus(
    examples: Vec<OutlineExample>,
    seed: u64,
) -> Result<CorpusSplits, CorpusError> {
    let n = examples.len();
    if n < 10 {
        return Err(CorpusError::TooFewExamples(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut order);

    let n_dev = n / 10;
    let n_test = n / 10;
    let n_train = n - n_dev - n_test;

    let mut slots: Vec<Option<OutlineExample>> = examples.into_iter().map(Some).collect();
    let take = |slots: &mut Vec<Option<OutlineExample>>, idxs: &[usize]| {
        idxs.iter().map(|&i| slots[i].take().unwrap()).collect::<Vec<_>>()
    };
    Ok(CorpusSplits {
        train: take(&mut slots, &order[..n_train]),
        dev: take(&mut slots, &order[n_train..n_train + n_dev]),
        test: take(&mut slots, &order[n_train + n_dev..]),
    })
}

// ── Line-delimited persistence ──────────────────────────────────────

pub fn write_examples(path: &Path, examples: &[OutlineExample]) -> Result<(), CorpusError> {
    let wrap = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    for ex in examples {
        serde_json::to_writer(&mut w, ex).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(wrap)?;
    }
    w.flush().map_err(wrap)?;
    Ok(())
}

/// Load a line-delimited example file, re-checking every record's
/// label/heading consistency.
pub fn load_examples(path: &Path) -> Result<Vec<OutlineExample>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: OutlineExample =
            serde_json::from_str(&line).map_err(|e| CorpusError::InvalidRecord {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        ex.validate().map_err(|reason| CorpusError::InvalidRecord {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        })?;
        out.push(ex);
    }
    Ok(out)
}
