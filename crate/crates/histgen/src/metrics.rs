//! Evaluation metrics: document-level exact match of section boundaries
//! (EM_sec), of boundaries plus headings (EM_outline), uni-gram recall of
//! headings on correctly predicted sections (Rouge_head), and a paired
//! two-tailed t-test for system comparisons.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{spans_from_labels, OutlineExample};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least 2 paired scores, got {0}")]
    TooFewPairs(usize),
    #[error("paired score vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("prediction/gold mismatch at index {index}: id {pred:?} vs {gold:?}")]
    DocumentMismatch {
        index: usize,
        pred: String,
        gold: String,
    },
}

/// 1 iff the predicted boundary sequence matches the gold one exactly.
pub fn em_sec(pred: &[u8], gold: &[u8]) -> bool {
    assert_eq!(
        pred.len(),
        gold.len(),
        "label sequences differ in length: {} vs {}",
        pred.len(),
        gold.len()
    );
    pred == gold
}

/// 1 iff boundaries match and every heading is token-identical, in order.
pub fn em_outline(
    pred_labels: &[u8],
    pred_headings: &[Vec<String>],
    gold_labels: &[u8],
    gold_headings: &[Vec<String>],
) -> bool {
    em_sec(pred_labels, gold_labels) && pred_headings == gold_headings
}

/// Rouge-1 recall: clipped uni-gram counts over the reference heading.
pub fn rouge1_recall(hypothesis: &[String], reference: &[String]) -> f64 {
    assert!(!reference.is_empty(), "empty reference heading");
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut hyp_counts: HashMap<&str, usize> = HashMap::new();
    for t in hypothesis {
        *hyp_counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let matched: usize = ref_counts
        .iter()
        .map(|(t, &c)| c.min(hyp_counts.get(t).copied().unwrap_or(0)))
        .sum();
    matched as f64 / reference.len() as f64
}

/// Per-document evaluation detail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocEval {
    pub id: String,
    pub em_sec: bool,
    pub em_outline: bool,
    /// Predicted sections whose paragraph span exists identically in gold.
    pub correct_sections: usize,
    pub predicted_sections: usize,
    /// Mean Rouge-1 recall over the correct sections; absent when none.
    pub rouge_head: Option<f64>,
    /// Per-correct-section Rouge-1 recall values.
    pub section_rouge: Vec<f64>,
}

/// Corpus-level report. Rouge_head macro-averages over documents that have
/// at least one correctly predicted section; documents with none are
/// counted separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub documents: usize,
    pub em_outline: f64,
    pub em_sec: f64,
    pub rouge_head: f64,
    pub docs_without_correct_sections: usize,
    pub correct_sections_total: usize,
    pub per_document: Vec<DocEval>,
}

/// Evaluate one prediction against its gold outline. A predicted section is
/// "correct" when its (start, end) paragraph span exists identically in the
/// gold segmentation; Rouge compares its heading against that gold section's
/// heading.
pub fn evaluate_document(pred: &OutlineExample, gold: &OutlineExample) -> DocEval {
    let pred_spans = spans_from_labels(&pred.labels);
    let gold_spans = spans_from_labels(&gold.labels);
    let gold_by_span: HashMap<(usize, usize), usize> = gold_spans
        .iter()
        .enumerate()
        .map(|(n, &s)| (s, n))
        .collect();

    let mut section_rouge = Vec::new();
    for (n, span) in pred_spans.iter().enumerate() {
        if let Some(&gold_n) = gold_by_span.get(span) {
            section_rouge.push(rouge1_recall(&pred.headings[n], &gold.headings[gold_n]));
        }
    }
    let correct = section_rouge.len();
    let rouge = if correct > 0 {
        Some(section_rouge.iter().sum::<f64>() / correct as f64)
    } else {
        None
    };
    let sec = em_sec(&pred.labels, &gold.labels);
    let outline = em_outline(&pred.labels, &pred.headings, &gold.labels, &gold.headings);
    debug_assert!(!outline || sec);
    DocEval {
        id: gold.id.clone(),
        em_sec: sec,
        em_outline: outline,
        correct_sections: correct,
        predicted_sections: pred_spans.len(),
        rouge_head: rouge,
        section_rouge,
    }
}

/// Evaluate paired prediction/gold corpora (aligned by position, ids must
/// agree).
pub fn evaluate_corpus(
    preds: &[OutlineExample],
    golds: &[OutlineExample],
) -> Result<EvalReport, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch(preds.len(), golds.len()));
    }
    let mut per_document = Vec::with_capacity(preds.len());
    for (i, (p, g)) in preds.iter().zip(golds).enumerate() {
        if p.id != g.id {
            return Err(MetricsError::DocumentMismatch {
                index: i,
                pred: p.id.clone(),
                gold: g.id.clone(),
            });
        }
        per_document.push(evaluate_document(p, g));
    }
    let n = per_document.len().max(1);
    let em_outline = per_document.iter().filter(|d| d.em_outline).count() as f64 / n as f64;
    let em_sec = per_document.iter().filter(|d| d.em_sec).count() as f64 / n as f64;
    let with_rouge: Vec<f64> = per_document.iter().filter_map(|d| d.rouge_head).collect();
    let rouge_head = if with_rouge.is_empty() {
        0.0
    } else {
        with_rouge.iter().sum::<f64>() / with_rouge.len() as f64
    };
    assert!(em_outline <= em_sec + 1e-15, "outline match implies section match");
    Ok(EvalReport {
        documents: per_document.len(),
        em_outline,
        em_sec,
        rouge_head,
        docs_without_correct_sections: per_document
            .iter()
            .filter(|d| d.rouge_head.is_none())
            .count(),
        correct_sections_total: per_document.iter().map(|d| d.correct_sections).sum(),
        per_document,
    })
}

// ── Significance testing ────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// The paired differences had zero variance with a nonzero mean; the
    /// p-value is 0 by convention.
    pub zero_variance: bool,
}

/// Two-tailed paired t-test over per-document scores.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricsError::TooFewPairs(a.len()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;

    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTestResult {
                t: 0.0,
                degrees_of_freedom: df,
                p_value: 1.0,
                zero_variance: false,
            }
        } else {
            TTestResult {
                t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                degrees_of_freedom: df,
                p_value: 0.0,
                zero_variance: true,
            }
        });
    }

    let t = mean / (var.sqrt() / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid dof");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult {
        t,
        degrees_of_freedom: df,
        p_value: p,
        zero_variance: false,
    })
}
