//! Semantic frames from the fixture SRL backend, in bracket notation, and
//! the sidecar records written for a corpus.
//!
//! ```bash
//! cargo run --example extract_frames
//! ```

use finefact::srl::{extract_corpus, extract_frames, render_frame, FixtureBackend};
use finefact::text::TokenizedText;
use finefact::types::{FrameSource, LabelVector, Sample};

fn main() -> finefact::Result<()> {
    let backend = FixtureBackend::new(["saw", "ran", "said"]);
    let text = TokenizedText::new("David saw the flame and ran to the door. Nobody else noticed.");
    let extraction = extract_frames(&text, FrameSource::Document, &backend)?;
    for frame in &extraction.frames {
        println!(
            "sentence {}: {}",
            frame.sentence_index,
            render_frame(frame, &text)
        );
    }
    if extraction.used_fallback {
        println!("(some sentences fell back to whole-sentence frames)");
    }

    let sample = Sample::new(
        "ex-1",
        "David saw the flame and ran to the door.",
        "David said he saw smoke.",
        LabelVector::from_mask(0b0001),
    );
    let (records, warnings) = extract_corpus(&[sample], &backend)?;
    for r in &records {
        println!("{}", serde_json::to_string(r).expect("serializable"));
    }
    println!("{} warnings", warnings.len());
    Ok(())
}
