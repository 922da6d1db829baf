//! Trains the toy detector on the generated fact-alignment task, saves the
//! best checkpoint and scores it on a held-out set.
//!
//! ```bash
//! cargo run --release --example train_toy
//! ```

use finefact::checkpoint::{load_model, save_model, CheckpointMeta};
use finefact::evaluation::{predict_examples, report_for};
use finefact::srl::{extract_corpus, FrameIndex};
use finefact::synthetic::{alignment_task, fixture_backend};
use finefact::training::{train, TrainConfig};
use finefact::{FactModel, ModelConfig};

fn main() -> finefact::Result<()> {
    let train_s = alignment_task(300, 4, 1);
    let val_s = alignment_task(100, 4, 2);
    let test_s = alignment_task(200, 4, 3);
    let all: Vec<_> = train_s
        .iter()
        .chain(&val_s)
        .chain(&test_s)
        .cloned()
        .collect();
    let (records, _) = extract_corpus(&all, &fixture_backend())?;
    let frames = FrameIndex::from_records(records);

    let mut model_cfg = ModelConfig::toy(32, 4);
    model_cfg.encoder.train_adapters = false;
    let model = FactModel::new(model_cfg, 0)?;
    let train_set = model.prepare_examples(&train_s, &frames)?;
    let val_set = model.prepare_examples(&val_s, &frames)?;
    let cfg = TrainConfig {
        epochs: 25,
        lr: 3e-3,
        batch_size: 8,
        grad_accum: 1,
        ..TrainConfig::default()
    };
    let outcome = train(model, &train_set, &val_set, &cfg)?;
    for e in &outcome.log {
        println!(
            "epoch {:>2}  loss {:.4}  val F1 {:.3}  val BACC {:.3}",
            e.epoch, e.train_loss, e.val_f1, e.val_bacc
        );
    }
    println!(
        "best epoch {} (BACC {:.3})",
        outcome.best_epoch, outcome.best_val_bacc
    );

    let path = std::env::temp_dir().join("finefact-train-toy.ckpt");
    let mut meta = CheckpointMeta::new(outcome.model.config.clone(), cfg.seed);
    meta.epoch = outcome.best_epoch;
    meta.val_bacc = Some(outcome.best_val_bacc);
    save_model(&path, &outcome.model, &meta)?;
    let (restored, _) = load_model(&path)?;

    let test_set = restored.prepare_examples(&test_s, &frames)?;
    let preds = predict_examples(&restored, &test_set, cfg.threshold)?;
    print!("\n{}", report_for(&preds, &test_set)?.to_table());
    Ok(())
}
