use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::{top_k_highlights, HighlightResult};
use crate::error::{Error, Result};
use crate::srl::{extract_frames, AlignedFrame, SrlBackend};
use crate::text::TokenizedText;
use crate::types::{read_jsonl, FrameSource, LabelVector, Sample, SemanticFrame};

/// When a predicted frame counts as recalling a gold frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    /// Same sentence, predicate span and argument spans.
    Exact,
    /// Token-level F1 between the frames' word sets is at least 0.5.
    #[default]
    Overlap,
}

impl FromStr for Matcher {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Matcher::Exact),
            "overlap" => Ok(Matcher::Overlap),
            other => Err(Error::Config(format!("unknown matcher {other:?}"))),
        }
    }
}

pub const OVERLAP_THRESHOLD: f64 = 0.5;

fn span_key(frame: &SemanticFrame) -> (usize, crate::types::Span, Vec<crate::types::Span>) {
    let mut args: Vec<_> = frame.arguments.iter().map(|a| a.span).collect();
    args.sort();
    (frame.sentence_index, frame.predicate, args)
}

fn word_set(frame: &SemanticFrame) -> HashSet<(usize, usize)> {
    frame
        .word_indices()
        .into_iter()
        .map(|w| (frame.sentence_index, w))
        .collect()
}

/// F1 between the word sets covered by two frames.
pub fn token_f1(a: &SemanticFrame, b: &SemanticFrame) -> f64 {
    let (sa, sb) = (word_set(a), word_set(b));
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let common = sa.intersection(&sb).count() as f64;
    2.0 * common / (sa.len() + sb.len()) as f64
}

pub fn frames_match(predicted: &SemanticFrame, gold: &SemanticFrame, matcher: Matcher) -> bool {
    match matcher {
        Matcher::Exact => span_key(predicted) == span_key(gold),
        Matcher::Overlap => token_f1(predicted, gold) >= OVERLAP_THRESHOLD,
    }
}

/// Fraction of gold frames matched by at least one of the first `k` highlights.
pub fn recall_at_k(
    predicted: &HighlightResult,
    gold: &[SemanticFrame],
    k: usize,
    matcher: Matcher,
) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Empty(
            "recall is undefined without gold frames".into(),
        ));
    }
    let top = predicted.top(k);
    let hit = gold
        .iter()
        .filter(|g| top.iter().any(|h| frames_match(&h.frame, g, matcher)))
        .count();
    Ok(hit as f64 / gold.len() as f64)
}

/// Reduction of per-token attention into a frame score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineImportance {
    #[default]
    Mean,
    Sum,
}

impl FromStr for BaselineImportance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(BaselineImportance::Mean),
            "sum" => Ok(BaselineImportance::Sum),
            other => Err(Error::Config(format!(
                "unknown baseline importance {other:?}"
            ))),
        }
    }
}

/// Frame scores from last-layer `[CLS]` attention summed over heads.
pub fn cls_frame_scores(
    cls_attention: &[Vec<f64>],
    frames: &[AlignedFrame],
    mode: BaselineImportance,
) -> Result<Vec<f64>> {
    if cls_attention.is_empty() {
        return Err(Error::Empty("no encoder attention heads".into()));
    }
    frames
        .iter()
        .map(|f| {
            let positions = f.positions();
            let mut score = 0.0;
            for head in cls_attention {
                let mut sum = 0.0;
                let mut mean = 0.0;
                for (n, &i) in positions.iter().enumerate() {
                    let a = *head.get(i).ok_or_else(|| {
                        Error::Shape(format!(
                            "frame position {i} beyond sequence of {}",
                            head.len()
                        ))
                    })?;
                    sum += a;
                    mean += (a - mean) / (n + 1) as f64;
                }
                score += match mode {
                    BaselineImportance::Sum => sum,
                    BaselineImportance::Mean => mean,
                };
            }
            Ok(score)
        })
        .collect()
}

pub fn baseline_cls_highlights(
    cls_attention: &[Vec<f64>],
    frames: &[AlignedFrame],
    k: usize,
    mode: BaselineImportance,
) -> Result<HighlightResult> {
    let scores = cls_frame_scores(cls_attention, frames, mode)?;
    let plain: Vec<SemanticFrame> = frames.iter().map(|f| f.frame.clone()).collect();
    top_k_highlights(&scores, &plain, k)
}

/// A claim with the section containing its evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub id: String,
    pub claim: String,
    pub section: String,
    /// Sentence indices of the evidence within `section`.
    pub evidence: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighlightEvalItem {
    pub id: String,
    pub claim: String,
    pub document: String,
    pub gold: Vec<SemanticFrame>,
}

impl HighlightEvalItem {
    /// The claim as a summary of the section, for running a detector.
    pub fn as_sample(&self) -> Sample {
        Sample::new(&self.id, &self.document, &self.claim, LabelVector::NO_ERROR)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HighlightEvalSet {
    pub items: Vec<HighlightEvalItem>,
    /// Records whose evidence sentences produced no frame.
    pub dropped: usize,
}

/// Gold frames are the backend's frames inside the evidence sentences,
/// excluding whole-sentence fallbacks.
pub fn build_highlight_eval_set(
    records: &[EvidenceRecord],
    backend: &dyn SrlBackend,
) -> Result<HighlightEvalSet> {
    let mut set = HighlightEvalSet::default();
    for r in records {
        let text = TokenizedText::new(&r.section);
        if let Some(&bad) = r.evidence.iter().find(|&&s| s >= text.sentences.len()) {
            return Err(Error::InvalidSample {
                id: r.id.clone(),
                reason: format!("evidence sentence {bad} of {}", text.sentences.len()),
            });
        }
        let extraction = extract_frames(&text, FrameSource::Document, backend)?;
        let gold: Vec<SemanticFrame> = extraction
            .frames
            .into_iter()
            .filter(|f| !f.is_full_sentence() && r.evidence.contains(&f.sentence_index))
            .collect();
        if gold.is_empty() {
            log::warn!("record {}: evidence yields no frames, dropped", r.id);
            set.dropped += 1;
            continue;
        }
        set.items.push(HighlightEvalItem {
            id: r.id.clone(),
            claim: r.claim.clone(),
            document: r.section.clone(),
            gold,
        });
    }
    Ok(set)
}

pub fn read_evidence(path: &Path) -> Result<Vec<EvidenceRecord>> {
    read_jsonl(path)
}

/// Mean recall@k over items, for each `k`.
pub fn mean_recall(
    results: &[(HighlightResult, Vec<SemanticFrame>)],
    ks: &[usize],
    matcher: Matcher,
) -> Result<Vec<f64>> {
    if results.is_empty() {
        return Err(Error::Empty("no highlight results".into()));
    }
    ks.iter()
        .map(|&k| {
            let mut total = 0.0;
            for (pred, gold) in results {
                total += recall_at_k(pred, gold, k, matcher)?;
            }
            Ok(total / results.len() as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::Highlight;
    use crate::srl::FixtureBackend;
    use crate::types::{Argument, Span};

    fn frame(sentence: usize, pred: (usize, usize), args: &[(usize, usize)]) -> SemanticFrame {
        SemanticFrame {
            predicate: Span::new(pred.0, pred.1),
            predicate_role: "V".into(),
            arguments: args
                .iter()
                .enumerate()
                .map(|(i, &(s, e))| Argument {
                    role: format!("ARG{i}"),
                    span: Span::new(s, e),
                })
                .collect(),
            sentence_index: sentence,
            source: FrameSource::Document,
        }
    }

    fn result(frames: &[SemanticFrame]) -> HighlightResult {
        HighlightResult {
            highlights: frames
                .iter()
                .enumerate()
                .map(|(i, f)| Highlight {
                    frame_index: i,
                    frame: f.clone(),
                    score: 1.0 / (i + 1) as f64,
                })
                .collect(),
        }
    }

    #[test]
    fn half_recall() {
        let g1 = frame(0, (1, 2), &[(0, 1)]);
        let g2 = frame(2, (1, 2), &[(0, 1)]);
        let pred = result(&[g1.clone(), frame(1, (0, 1), &[]), frame(3, (0, 1), &[])]);
        assert_eq!(
            recall_at_k(&pred, &[g1, g2], 3, Matcher::Exact).unwrap(),
            0.5
        );
    }

    #[test]
    fn gold_subset_full_recall_and_monotone() {
        let f: Vec<_> = (0..5).map(|s| frame(s, (1, 2), &[(0, 1)])).collect();
        let pred = result(&f);
        let gold = vec![f[3].clone(), f[1].clone()];
        let r: Vec<f64> = (3..=5)
            .map(|k| recall_at_k(&pred, &gold, k, Matcher::Overlap).unwrap())
            .collect();
        assert!(r[0] <= r[1] && r[1] <= r[2]);
        assert_eq!(recall_at_k(&pred, &gold, 4, Matcher::Exact).unwrap(), 1.0);
        assert!(recall_at_k(&pred, &[], 4, Matcher::Exact).is_err());
    }

    #[test]
    fn overlap_is_looser_than_exact() {
        let gold = frame(0, (2, 3), &[(0, 2), (3, 6)]);
        let near = frame(0, (2, 3), &[(0, 2), (3, 5)]);
        assert!(!frames_match(&near, &gold, Matcher::Exact));
        assert!(frames_match(&near, &gold, Matcher::Overlap));
        let other_sentence = frame(1, (2, 3), &[(0, 2), (3, 6)]);
        assert_eq!(token_f1(&other_sentence, &gold), 0.0);
    }

    fn aligned(positions: std::ops::Range<usize>) -> AlignedFrame {
        AlignedFrame {
            frame: frame(0, (positions.start, positions.end), &[]),
            predicate: positions,
            arguments: Vec::new(),
        }
    }

    #[test]
    fn uniform_cls_attention_ties_to_document_order() {
        let frames = vec![aligned(1..3), aligned(3..4), aligned(4..8)];
        let att = vec![vec![0.1; 10], vec![0.1; 10]];
        let h = baseline_cls_highlights(&att, &frames, 2, BaselineImportance::Mean).unwrap();
        assert_eq!(h.frame_indices(), vec![0, 1]);
        let h = baseline_cls_highlights(&att, &frames, 1, BaselineImportance::Sum).unwrap();
        assert_eq!(h.frame_indices(), vec![2]);
    }

    #[test]
    fn uniform_mean_scores_tie_exactly_for_any_frame_length() {
        for seq in 3..200usize {
            let frames: Vec<_> = (1..seq).map(|len| aligned(0..len)).collect();
            let att = vec![vec![1.0 / seq as f64; seq]; 3];
            let scores = cls_frame_scores(&att, &frames, BaselineImportance::Mean).unwrap();
            assert!(scores.windows(2).all(|w| w[0] == w[1]), "seq {seq}");
        }
    }

    #[test]
    fn dominant_frame_ranks_first() {
        let frames = vec![aligned(1..3), aligned(3..4), aligned(4..8)];
        let mut head = vec![0.01; 10];
        head[3] = 0.9;
        let h = baseline_cls_highlights(&[head], &frames, 3, BaselineImportance::Mean).unwrap();
        assert_eq!(h.frame_indices()[0], 1);
    }

    #[test]
    fn eval_set_gold_and_drops() {
        let backend = FixtureBackend::new(["saw"]);
        let records = vec![
            EvidenceRecord {
                id: "a".into(),
                claim: "David saw it.".into(),
                section: "Intro here. David saw the flame.".into(),
                evidence: vec![1],
            },
            EvidenceRecord {
                id: "b".into(),
                claim: "Nothing.".into(),
                section: "David saw it. No verbs here.".into(),
                evidence: vec![1],
            },
        ];
        let set = build_highlight_eval_set(&records, &backend).unwrap();
        assert_eq!(set.dropped, 1);
        assert_eq!(set.items.len(), 1);
        assert_eq!(set.items[0].gold.len(), 1);
        assert_eq!(set.items[0].gold[0].sentence_index, 1);
        let bad = EvidenceRecord {
            evidence: vec![5],
            ..records[0].clone()
        };
        assert!(build_highlight_eval_set(&[bad], &backend).is_err());
    }
}
