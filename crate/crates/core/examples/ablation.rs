//! Document fact attention against the mean-pooled document ablation on a
//! task whose labels depend on which document fact the summary restates.
//!
//! ```bash
//! cargo run --release --example ablation
//! ```

use finefact::model::DocContext;
use finefact::srl::{extract_corpus, FrameIndex};
use finefact::synthetic::{alignment_task, fixture_backend};
use finefact::training::{train, TrainConfig};
use finefact::{FactModel, ModelConfig};

fn main() -> finefact::Result<()> {
    let seeds = [0u64, 1];
    for ctx in [DocContext::Attention, DocContext::MeanPool] {
        let mut total = 0.0;
        for &seed in &seeds {
            let train_s = alignment_task(300, 4, 100 + seed);
            let val_s = alignment_task(200, 4, 200 + seed);
            let all: Vec<_> = train_s.iter().chain(&val_s).cloned().collect();
            let frames = FrameIndex::from_records(extract_corpus(&all, &fixture_backend())?.0);
            let mut cfg = ModelConfig::toy(32, 4);
            cfg.encoder.train_adapters = false;
            cfg.doc_context = ctx;
            let model = FactModel::new(cfg, seed)?;
            let tr = model.prepare_examples(&train_s, &frames)?;
            let va = model.prepare_examples(&val_s, &frames)?;
            let tc = TrainConfig {
                epochs: 20,
                lr: 3e-3,
                batch_size: 8,
                grad_accum: 1,
                seed,
                ..TrainConfig::default()
            };
            let out = train(model, &tr, &va, &tc)?;
            println!(
                "{ctx:?} seed {seed}: validation BACC {:.3}",
                out.best_val_bacc
            );
            total += out.best_val_bacc;
        }
        println!("{ctx:?} mean: {:.3}\n", total / seeds.len() as f64);
    }
    Ok(())
}
