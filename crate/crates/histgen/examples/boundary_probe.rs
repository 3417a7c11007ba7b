use histgen::corpus::OutlineExample;
use histgen::synthetic::template_documents;
use histgen::trainer::{self, predict_outline, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let train_docs = template_documents(50, 101);
    let heldout = template_documents(20, 202);
    let mut cfg = TrainConfig::desk();
    cfg.learning_rate = 0.003;
    cfg.batch_size = 4;
    cfg.max_epochs = 200;
    cfg.seed = seed;
    let outcome = trainer::train(&train_docs, &heldout, &cfg).unwrap();
    let ckpt = outcome.checkpoint;
    let model = ckpt.model();
    let mut label_errors = 0usize;
    let mut total_labels = 0usize;
    for ex in &heldout {
        let (pred, trace) = predict_outline(&model, &ckpt.doc_vocab, &ckpt.head_vocab, ex).unwrap();
        total_labels += ex.labels.len();
        let errs: Vec<String> = ex
            .labels
            .iter()
            .zip(&pred.labels)
            .zip(&trace.boundary_probs)
            .enumerate()
            .filter(|(_, ((g, p), _))| g != p)
            .map(|(i, ((g, p), prob))| format!("pos {i}: gold {g} pred {p} prob {prob:.3}"))
            .collect();
        label_errors += errs.len();
        if !errs.is_empty() {
            let spans: Vec<usize> = ex.section_spans().iter().map(|(s, e)| e - s + 1).collect();
            println!("doc {} M={} sections(len)={:?}: {}", ex.id, ex.labels.len(), spans, errs.join("; "));
        }
    }
    println!("label errors: {label_errors}/{total_labels}");
}
