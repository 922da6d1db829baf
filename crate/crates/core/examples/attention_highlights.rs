//! Runs an untrained toy detector on one pair and prints the error-type
//! probabilities, the attention mass per document fact, and the top-3
//! highlights.
//!
//! ```bash
//! cargo run --example attention_highlights
//! ```

use finefact::attention::HighlightRecord;
use finefact::srl::{extract_corpus, render_frame, FrameIndex};
use finefact::synthetic::{alignment_task, fixture_backend};
use finefact::{ErrorType, FactModel, ModelConfig};

fn main() -> finefact::Result<()> {
    let sample = alignment_task(1, 5, 3).remove(0);
    println!(
        "document: {}\nsummary:  {}\ngold:     {}\n",
        sample.document, sample.summary, sample.labels
    );

    let (records, _) = extract_corpus(std::slice::from_ref(&sample), &fixture_backend())?;
    let frames = FrameIndex::from_records(records);
    let model = FactModel::new(ModelConfig::toy(32, 4), 0)?;
    let prepared = model.prepare(&sample, &frames)?;
    let inference = model.infer(&prepared)?;

    for ty in ErrorType::ALL {
        println!(
            "{:<10} p = {:.3}",
            ty.short_name(),
            inference.probs[ty.index()]
        );
    }
    let importance = inference.importance.as_ref().expect("attention model");
    println!(
        "\nattention mass per document fact (sums to {:.1}):",
        importance.total()
    );
    for (frame, score) in prepared.document_frames().iter().zip(&importance.scores) {
        println!("  {score:.3}  {}", render_frame(frame, &prepared.document));
    }

    let top = model.highlights(&prepared, &inference, 3)?;
    let record = HighlightRecord::render(&prepared.id, &top, &prepared.document);
    println!(
        "\n{}",
        serde_json::to_string_pretty(&record).expect("serializable")
    );
    Ok(())
}
