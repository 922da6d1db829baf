//! Classification metrics, per-category reports and highlight recall.

pub mod highlights;
pub mod metrics;

pub use highlights::{
    baseline_cls_highlights, build_highlight_eval_set, cls_frame_scores, frames_match, mean_recall,
    read_evidence, recall_at_k, token_f1, BaselineImportance, EvidenceRecord, HighlightEvalItem,
    HighlightEvalSet, Matcher,
};
pub use metrics::{
    balanced_accuracy, confusion, f1_score, macro_balanced_accuracy, macro_f1, ClassScores,
    Confusion, MetricReport, Scores, ALL_CATEGORY,
};

use serde::{Deserialize, Serialize};

use crate::classifier::decide;
use crate::error::Result;
use crate::model::{Example, FactModel};
use crate::types::{LabelVector, SystemCategory, NUM_ERROR_TYPES};

/// One model output as written by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub probs: [f64; NUM_ERROR_TYPES],
    pub labels: LabelVector,
}

pub fn predict_examples(
    model: &FactModel,
    examples: &[Example],
    threshold: f64,
) -> Result<Vec<Prediction>> {
    examples
        .iter()
        .map(|ex| {
            let inf = model.infer(&ex.prepared)?;
            Ok(Prediction {
                id: ex.prepared.id.clone(),
                probs: inf.probs,
                labels: decide(&inf.probs, threshold),
            })
        })
        .collect()
}

/// Scores aligned predictions against the examples' gold labels.
pub fn report_for(predictions: &[Prediction], examples: &[Example]) -> Result<MetricReport> {
    let golds: Vec<_> = examples.iter().map(|e| e.labels).collect();
    let cats: Vec<_> = examples.iter().map(|e| e.category).collect();
    report_against(predictions, &golds, &cats)
}

pub fn report_against(
    predictions: &[Prediction],
    golds: &[LabelVector],
    categories: &[SystemCategory],
) -> Result<MetricReport> {
    let preds: Vec<_> = predictions.iter().map(|p| p.labels).collect();
    MetricReport::compute(&preds, golds, categories)
}

/// Per-category report for each `(seed, model)` run, averaged over runs.
pub fn evaluate_by_category(
    runs: &[(u64, &FactModel)],
    examples: &[Example],
    threshold: f64,
) -> Result<MetricReport> {
    let reports = runs
        .iter()
        .map(|&(seed, model)| {
            let preds = predict_examples(model, examples, threshold)?;
            let mut r = report_for(&preds, examples)?;
            r.seeds = vec![seed];
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::mean(&reports)
}
