//! Deduplication, the random and challenging splits, and the label tables.
//!
//! ```bash
//! cargo run --example split_corpus
//! ```

use finefact::data::{corpus_stats, dedup, make_challenging_split, make_random_split, SplitSizes};
use finefact::synthetic::alignment_task;

fn main() -> finefact::Result<()> {
    let mut corpus = alignment_task(120, 3, 5);
    let mut copy = corpus[0].clone();
    copy.id = "copy".into();
    corpus.push(copy);

    let (corpus, report) = dedup(corpus);
    println!("kept {}, dropped {:?}\n", corpus.len(), report.removed);

    let random = make_random_split(
        &corpus,
        SplitSizes {
            train: 90,
            validation: 10,
            test: 20,
        },
        0,
    )?;
    println!(
        "random: {}/{}/{}",
        random.train.len(),
        random.validation.len(),
        random.test.len()
    );

    let hard = make_challenging_split(&corpus, "bart", 10, 0)?;
    println!(
        "challenging: {}/{}/{}, {} removed for sharing a test document\n",
        hard.train.len(),
        hard.validation.len(),
        hard.test.len(),
        hard.manifest.removed_overlap.len()
    );

    print!("{}", corpus_stats(&corpus).to_table());
    Ok(())
}
