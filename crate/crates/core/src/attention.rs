//! Document fact attention: summary facts query the document fact matrix,
//! the received attention mass ranks document facts, and the top-k become
//! highlights.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Matrix, Var};
use crate::error::{Error, Result};
use crate::params::{Linear, ParamStore};
use crate::srl::render_frame;
use crate::text::TokenizedText;
use crate::types::SemanticFrame;

/// Scaled dot-product attention with `heads` heads over `d`-dimensional inputs.
///
/// Each head projects to `d / heads` dimensions; head outputs are
/// concatenated and passed through an output projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiHeadCrossAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub dim: usize,
}

/// Result of one attention pass, as graph nodes.
#[derive(Debug, Clone)]
pub struct AttentionVars {
    /// Context vectors, one row per query (`n_q x d`).
    pub context: Var,
    /// Per-head softmax probabilities (`n_q x n_k` each), before the output projection.
    pub probs: Vec<Var>,
}

impl MultiHeadCrossAttention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        heads: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::Config(format!(
                "hidden size {dim} is not divisible by {heads} attention heads"
            )));
        }
        Ok(Self {
            query: Linear::new(store, &format!("{name}.query"), dim, dim, trainable, rng),
            key: Linear::new(store, &format!("{name}.key"), dim, dim, trainable, rng),
            value: Linear::new(store, &format!("{name}.value"), dim, dim, trainable, rng),
            output: Linear::new(store, &format!("{name}.output"), dim, dim, trainable, rng),
            heads,
            dim,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        queries: Var,
        keys: Var,
    ) -> AttentionVars {
        let q = self.query.forward(g, store, queries);
        let k = self.key.forward(g, store, keys);
        let v = self.value.forward(g, store, keys);
        let hd = self.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (a, b) = (h * hd, (h + 1) * hd);
            let qh = g.slice_cols(q, a, b);
            let kh = g.slice_cols(k, a, b);
            let vh = g.slice_cols(v, a, b);
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt);
            let scores = g.scale(scores, scale);
            let p = g.softmax_rows(scores);
            outs.push(g.matmul(p, vh));
            probs.push(p);
        }
        let joined = if outs.len() == 1 {
            outs[0]
        } else {
            g.concat_cols(&outs)
        };
        let context = self.output.forward(g, store, joined);
        AttentionVars { context, probs }
    }
}

/// Attention probabilities indexed `[head][query][key]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub heads: Vec<Matrix>,
}

impl AttentionMap {
    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn num_queries(&self) -> usize {
        self.heads.first().map_or(0, |m| m.nrows())
    }

    pub fn num_keys(&self) -> usize {
        self.heads.first().map_or(0, |m| m.ncols())
    }
}

/// Cross-attends summary facts over document facts.
///
/// Returns the context vectors `C` (`n_s x d`) and the pre-projection
/// attention probabilities.
pub fn attend(
    f_sum: &Matrix,
    f_doc: &Matrix,
    mha: &MultiHeadCrossAttention,
    store: &ParamStore,
) -> Result<(Matrix, AttentionMap)> {
    if f_sum.nrows() == 0 || f_doc.nrows() == 0 {
        return Err(Error::Empty(
            "attention needs at least one summary and one document fact".into(),
        ));
    }
    if f_sum.ncols() != mha.dim || f_doc.ncols() != mha.dim {
        return Err(Error::Shape(format!(
            "attention expects width {}, got {} and {}",
            mha.dim,
            f_sum.ncols(),
            f_doc.ncols()
        )));
    }
    let mut g = Graph::new();
    let q = g.constant(f_sum.clone());
    let k = g.constant(f_doc.clone());
    let out = mha.forward(&mut g, store, q, k);
    let map = AttentionMap {
        heads: out.probs.iter().map(|&p| g.value(p).clone()).collect(),
    };
    Ok((g.value(out.context).clone(), map))
}

/// Attention mass received by each document fact, summed over heads and summary facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScores {
    pub scores: Vec<f64>,
    pub summary_facts: usize,
    pub heads: usize,
}

impl ImportanceScores {
    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

pub fn importance(attention: &AttentionMap) -> ImportanceScores {
    let mut scores = vec![0.0; attention.num_keys()];
    for head in &attention.heads {
        for row in head.rows() {
            for (s, &a) in scores.iter_mut().zip(row.iter()) {
                *s += a;
            }
        }
    }
    ImportanceScores {
        scores,
        summary_facts: attention.num_queries(),
        heads: attention.num_heads(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Highlight {
    /// Position of the frame in the document frame list.
    pub frame_index: usize,
    pub frame: SemanticFrame,
    pub score: f64,
}

/// Document frames ranked by importance, best first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HighlightResult {
    pub highlights: Vec<Highlight>,
}

impl HighlightResult {
    pub fn frame_indices(&self) -> Vec<usize> {
        self.highlights.iter().map(|h| h.frame_index).collect()
    }

    pub fn len(&self) -> usize {
        self.highlights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.highlights.is_empty()
    }

    pub fn top(&self, k: usize) -> &[Highlight] {
        &self.highlights[..k.min(self.highlights.len())]
    }
}

/// Ranks `scores` descending, ties going to the earlier index, and keeps `k`.
pub fn rank_top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// The `min(k, n_d)` highest-scoring document frames.
pub fn top_k_highlights(
    scores: &[f64],
    frames: &[SemanticFrame],
    k: usize,
) -> Result<HighlightResult> {
    if k == 0 {
        return Err(Error::Config("top-k must be at least 1".into()));
    }
    if scores.len() != frames.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} frames",
            scores.len(),
            frames.len()
        )));
    }
    Ok(HighlightResult {
        highlights: rank_top_k(scores, k)
            .into_iter()
            .map(|i| Highlight {
                frame_index: i,
                frame: frames[i].clone(),
                score: scores[i],
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedArg {
    pub role: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedHighlight {
    pub rank: usize,
    pub score: f64,
    pub sentence: usize,
    pub predicate: String,
    pub args: Vec<RenderedArg>,
    /// Bracketed role form, e.g. `[ARG0 David] [V saw] [ARG1 the flame]`.
    pub rendered: String,
}

/// One line of the highlight output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightRecord {
    pub sample_id: String,
    pub highlights: Vec<RenderedHighlight>,
}

impl HighlightRecord {
    pub fn render(sample_id: &str, result: &HighlightResult, document: &TokenizedText) -> Self {
        let highlights = result
            .highlights
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let f = &h.frame;
                RenderedHighlight {
                    rank: i + 1,
                    score: h.score,
                    sentence: f.sentence_index,
                    predicate: document.span_text(
                        f.sentence_index,
                        f.predicate.start,
                        f.predicate.end,
                    ),
                    args: f
                        .arguments
                        .iter()
                        .map(|a| RenderedArg {
                            role: a.role.clone(),
                            text: document.span_text(f.sentence_index, a.span.start, a.span.end),
                        })
                        .collect(),
                    rendered: render_frame(f, document),
                }
            })
            .collect();
        Self {
            sample_id: sample_id.to_string(),
            highlights,
        }
    }
}

/// Uniform attention helper used by tests and the baseline path.
pub fn uniform_attention(heads: usize, queries: usize, keys: usize) -> AttentionMap {
    AttentionMap {
        heads: vec![Array2::from_elem((queries, keys), 1.0 / keys as f64); heads],
    }
}
