use histgen::corpus::OutlineExample;
use histgen::metrics::evaluate_corpus;
use histgen::synthetic::template_documents;
use histgen::trainer::{self, predict_outline, TrainConfig};

fn eval(ckpt: &histgen::checkpoint::Checkpoint, set: &[OutlineExample]) -> (f64, f64) {
    let model = ckpt.model();
    let preds: Vec<OutlineExample> = set
        .iter()
        .map(|ex| predict_outline(&model, &ckpt.doc_vocab, &ckpt.head_vocab, ex).unwrap().0)
        .collect();
    let r = evaluate_corpus(&preds, set).unwrap();
    (r.em_outline, r.em_sec)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.005);
    let batch: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(8);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(200);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1);

    let train_docs = template_documents(50, 101);
    let heldout = template_documents(20, 202);
    let mut cfg = TrainConfig::desk();
    cfg.learning_rate = lr;
    cfg.batch_size = batch;
    cfg.max_epochs = epochs;
    cfg.seed = seed;

    let started = std::time::Instant::now();
    let outcome = trainer::train(&train_docs, &heldout, &cfg).unwrap();
    let train_time = started.elapsed().as_secs_f64();
    let (tr_o, tr_s) = eval(&outcome.checkpoint, &train_docs);
    let (ho_o, ho_s) = eval(&outcome.checkpoint, &heldout);
    let last = outcome.history.last().unwrap();
    println!(
        "lr={lr} batch={batch} epochs={epochs} seed={seed}: train EM_outline={tr_o:.3} EM_sec={tr_s:.3} | heldout EM_outline={ho_o:.3} EM_sec={ho_s:.3} | final loss {:.3} ppl {:.3} | {train_time:.1}s",
        last.train_loss, last.dev_ppl
    );
}
