//! Recall@k of document fact highlights on a generated claim/evidence set,
//! for a trained detector and for the encoder's `[CLS]` attention.
//!
//! ```bash
//! cargo run --release --example baseline_highlights
//! ```

use finefact::attention::top_k_highlights;
use finefact::evaluation::{
    baseline_cls_highlights, build_highlight_eval_set, mean_recall, BaselineImportance, Matcher,
};
use finefact::srl::{extract_corpus, FrameIndex};
use finefact::synthetic::{alignment_task, evidence_corpus, fixture_backend};
use finefact::training::{train, TrainConfig};
use finefact::{FactModel, ModelConfig, Sample};

fn main() -> finefact::Result<()> {
    let backend = fixture_backend();
    let train_s = alignment_task(300, 4, 1);
    let val_s = alignment_task(100, 4, 2);
    let all: Vec<_> = train_s.iter().chain(&val_s).cloned().collect();
    let frames = FrameIndex::from_records(extract_corpus(&all, &backend)?.0);
    let mut cfg = ModelConfig::toy(32, 4);
    cfg.encoder.train_adapters = false;
    let model = FactModel::new(cfg, 0)?;
    let tr = model.prepare_examples(&train_s, &frames)?;
    let va = model.prepare_examples(&val_s, &frames)?;
    let tc = TrainConfig {
        epochs: 15,
        lr: 3e-3,
        batch_size: 8,
        grad_accum: 1,
        ..TrainConfig::default()
    };
    let model = train(model, &tr, &va, &tc)?.model;

    let set = build_highlight_eval_set(&evidence_corpus(100, 6, 1, 9), &backend)?;
    let samples: Vec<Sample> = set.items.iter().map(|i| i.as_sample()).collect();
    let eval_frames = FrameIndex::from_records(extract_corpus(&samples, &backend)?.0);
    let (mut ours, mut cls) = (Vec::new(), Vec::new());
    for (s, item) in samples.iter().zip(&set.items) {
        let p = model.prepare(s, &eval_frames)?;
        let inf = model.infer(&p)?;
        let scores = &inf.importance.as_ref().expect("attention model").scores;
        ours.push((
            top_k_highlights(scores, &p.document_frames(), 5)?,
            item.gold.clone(),
        ));
        let base = baseline_cls_highlights(
            &inf.cls_attention,
            &p.doc_frames.frames,
            5,
            BaselineImportance::Mean,
        )?;
        cls.push((base, item.gold.clone()));
    }
    let ks = [1, 3, 5];
    for (name, results) in [("fact attention", &ours), ("CLS attention", &cls)] {
        let r = mean_recall(results, &ks, Matcher::Overlap)?;
        println!(
            "{name:<15} recall@1 {:.3}  recall@3 {:.3}  recall@5 {:.3}",
            r[0], r[1], r[2]
        );
    }
    Ok(())
}
