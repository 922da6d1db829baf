//! Writes a generated corpus for trying the CLI: `raw.jsonl` in the raw
//! annotation layout (with a few duplicate pairs for `ingest` to drop),
//! `corpus.jsonl` as clean samples, and `evidence.jsonl` for `recall`.
//!
//! ```bash
//! cargo run --example synthetic_corpus -- /tmp/finefact-demo
//! ```

use std::path::PathBuf;

use finefact::synthetic::{alignment_task, evidence_corpus};
use finefact::types::write_jsonl;
use finefact::ErrorType;
use serde_json::json;

const RAW_TAGS: [&str; 4] = [
    "extrinsic-np",
    "intrinsic-np",
    "extrinsic-predicate",
    "intrinsic-predicate",
];

fn main() -> finefact::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "finefact-demo".into()),
    );
    std::fs::create_dir_all(&dir).map_err(|e| finefact::Error::io(&dir, e))?;

    let corpus = alignment_task(600, 4, 7);
    write_jsonl(&dir.join("corpus.jsonl"), &corpus)?;

    let mut raw: Vec<_> = corpus
        .iter()
        .map(|s| {
            let tags: Vec<&str> = ErrorType::ALL
                .iter()
                .filter(|t| s.labels.bits()[t.index()])
                .map(|t| RAW_TAGS[t.index()])
                .collect();
            json!({
                "id": s.id,
                "doc": s.document,
                "summary": s.summary,
                "labels": if tags.is_empty() { "correct".to_string() } else { tags.join(",") },
                "model_type": s.system_category.to_string(),
                "origin": s.origin.to_string(),
                "model_name": s.system,
            })
        })
        .collect();
    for i in 0..5 {
        let mut d = raw[i].clone();
        d["id"] = json!(format!("{}-dup", corpus[i].id));
        raw.push(d);
    }
    write_jsonl(&dir.join("raw.jsonl"), &raw)?;
    write_jsonl(&dir.join("evidence.jsonl"), &evidence_corpus(100, 6, 2, 11))?;
    println!(
        "wrote {} raw rows, {} samples and 100 evidence records to {}",
        raw.len(),
        corpus.len(),
        dir.display()
    );
    Ok(())
}
