use histgen::corpus::OutlineExample;
use histgen::metrics::evaluate_corpus;
use histgen::synthetic::template_documents;
use histgen::trainer::{self, predict_outline, TrainConfig};

fn heldout_em_outline(cfg: &TrainConfig, train_docs: &[OutlineExample], heldout: &[OutlineExample]) -> f64 {
    let outcome = trainer::train(train_docs, heldout, cfg).unwrap();
    let ckpt = outcome.checkpoint;
    let model = ckpt.model();
    let preds: Vec<OutlineExample> = heldout
        .iter()
        .map(|ex| predict_outline(&model, &ckpt.doc_vocab, &ckpt.head_vocab, ex).unwrap().0)
        .collect();
    evaluate_corpus(&preds, heldout).unwrap().em_outline
}

fn main() {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let train_docs = template_documents(50, 101);
    let heldout = template_documents(20, 202);
    for seed in [11u64, 22, 33] {
        let mut base = TrainConfig::desk();
        base.learning_rate = 0.003;
        base.batch_size = 4;
        base.max_epochs = epochs;
        base.seed = seed;
        let full = heldout_em_outline(&base, &train_docs, &heldout);
        let mut p_cfg = base.clone();
        p_cfg.model = p_cfg.model.clone().ablate("P");
        let minus_p = heldout_em_outline(&p_cfg, &train_docs, &heldout);
        let mut pshr_cfg = base.clone();
        pshr_cfg.model = pshr_cfg.model.clone().ablate("PSHR");
        let minus_pshr = heldout_em_outline(&pshr_cfg, &train_docs, &heldout);
        println!("seed {seed}: full={full:.3} minus_p={minus_p:.3} minus_pshr={minus_pshr:.3}  full>=p {}  full>=pshr {}",
                 full >= minus_p, full >= minus_pshr);
    }
}
