//! Token encoding, layer fusion and attentive fact pooling.

mod pooling;
mod tokenizer;
mod transformer;

pub use pooling::{
    fuse_layers, fuse_layers_var, pool_fact, stack_facts, AttentivePooler, FactEmbedding,
    PooledVars,
};
pub use tokenizer::{Tokenizer, WordPieceVocab, CLS_ID, PAD_ID, SEP_ID, UNK_ID};
pub use transformer::{encode, EncodedStates, TransformerEncoder};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Graph, Matrix, Var};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::srl::{align_frames, Alignment, SpanAlignment};
use crate::text::TokenizedText;
use crate::types::{Sample, SemanticFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Small randomly initialized encoder with a hashing tokenizer.
    Toy,
    /// Frozen pretrained backbone (weights and WordPiece vocabulary from
    /// files) with trainable bottleneck adapters.
    Adapter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn: usize,
    pub adapter_dim: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    pub activation: Activation,
    pub train_adapters: bool,
    /// Backbone parameters for the `adapter` kind (checkpoint file).
    pub pretrained: Option<PathBuf>,
    /// WordPiece `vocab.txt` for the `adapter` kind.
    pub vocab: Option<PathBuf>,
    pub lowercase: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::toy(32)
    }
}

impl EncoderConfig {
    /// Two layers, two heads, hashing vocabulary.
    pub fn toy(hidden: usize) -> Self {
        Self {
            kind: EncoderKind::Toy,
            hidden,
            layers: 2,
            heads: 2,
            ffn: 2 * hidden,
            adapter_dim: 32,
            max_positions: 512,
            vocab_size: 4096,
            activation: Activation::Gelu,
            train_adapters: true,
            pretrained: None,
            vocab: None,
            lowercase: true,
        }
    }

    /// BERT-base geometry with adapters of width 32.
    pub fn adapter_base(pretrained: PathBuf, vocab: PathBuf) -> Self {
        Self {
            kind: EncoderKind::Adapter,
            hidden: 768,
            layers: 12,
            heads: 12,
            ffn: 3072,
            adapter_dim: 32,
            max_positions: 512,
            vocab_size: 30522,
            activation: Activation::Gelu,
            train_adapters: true,
            pretrained: Some(pretrained),
            vocab: Some(vocab),
            lowercase: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 || self.ffn == 0 || self.adapter_dim == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        if self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "encoder hidden size {} not divisible by {} heads",
                self.hidden, self.heads
            )));
        }
        if self.max_positions < 4 {
            return Err(Error::Config("encoder needs at least 4 positions".into()));
        }
        if self.kind == EncoderKind::Adapter && (self.pretrained.is_none() || self.vocab.is_none())
        {
            return Err(Error::Config(
                "adapter encoder needs `pretrained` weights and a `vocab` file".into(),
            ));
        }
        if self.kind == EncoderKind::Toy && self.vocab_size <= 4 {
            return Err(Error::Config("toy vocabulary too small".into()));
        }
        Ok(())
    }

    pub fn tokenizer(&self) -> Result<Tokenizer> {
        match self.kind {
            EncoderKind::Toy => Ok(Tokenizer::hashing(self.vocab_size)),
            EncoderKind::Adapter => {
                let path = self
                    .vocab
                    .as_ref()
                    .ok_or_else(|| Error::Config("adapter encoder needs a vocab file".into()))?;
                let vocab = WordPieceVocab::from_file(path, self.lowercase)?;
                if vocab.len() != self.vocab_size {
                    return Err(Error::Config(format!(
                        "vocab file has {} entries, config says {}",
                        vocab.len(),
                        self.vocab_size
                    )));
                }
                Ok(Tokenizer::WordPiece(vocab))
            }
        }
    }
}

/// Subword ids with segment ids (0 = document side, 1 = summary side).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderInput {
    pub ids: Vec<usize>,
    pub segments: Vec<usize>,
}

impl EncoderInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub struct EncoderOutput {
    /// One `seq x d` node per layer.
    pub layers: Vec<Var>,
    /// Last-layer attention probabilities, one `seq x seq` node per head.
    pub final_attention: Vec<Var>,
}

/// Produces per-layer token states for a subword sequence.
pub trait TokenEncoder {
    fn hidden_size(&self) -> usize;

    fn num_layers(&self) -> usize;

    fn max_positions(&self) -> usize;

    fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        input: &EncoderInput,
    ) -> Result<EncoderOutput>;
}

/// A sample laid out as `[CLS] document [SEP] summary [SEP]` with both frame
/// sets aligned to sequence positions.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub id: String,
    pub input: EncoderInput,
    pub document: TokenizedText,
    pub summary: TokenizedText,
    pub doc_alignment: SpanAlignment,
    pub sum_alignment: SpanAlignment,
    pub doc_frames: Alignment,
    pub sum_frames: Alignment,
}

impl PreparedSample {
    /// Document frames that survived truncation, in order.
    pub fn document_frames(&self) -> Vec<SemanticFrame> {
        self.doc_frames
            .frames
            .iter()
            .map(|f| f.frame.clone())
            .collect()
    }

    pub fn summary_frames(&self) -> Vec<SemanticFrame> {
        self.sum_frames
            .frames
            .iter()
            .map(|f| f.frame.clone())
            .collect()
    }
}

fn subword_lengths(text: &TokenizedText, tokenizer: &Tokenizer) -> (Vec<usize>, Vec<usize>) {
    let mut lengths = Vec::with_capacity(text.num_words());
    let mut ids = Vec::new();
    for w in text.words() {
        let pieces = tokenizer.encode_word(w);
        lengths.push(pieces.len());
        ids.extend(pieces);
    }
    (lengths, ids)
}

/// Tokenizes both texts, truncates to `limit` positions and aligns frames.
///
/// When the pair does not fit, the summary keeps up to half of the budget
/// (more if the document is short) and the document takes the rest.
pub fn prepare_sample(
    sample: &Sample,
    doc_frames: &[SemanticFrame],
    sum_frames: &[SemanticFrame],
    tokenizer: &Tokenizer,
    limit: usize,
) -> Result<PreparedSample> {
    if limit < 4 {
        return Err(Error::Config("truncation limit must be at least 4".into()));
    }
    let document = TokenizedText::new(&sample.document);
    let summary = TokenizedText::new(&sample.summary);
    let (doc_lengths, doc_ids) = subword_lengths(&document, tokenizer);
    let (sum_lengths, sum_ids) = subword_lengths(&summary, tokenizer);
    let available = limit - 3;
    let (doc_budget, sum_budget) = if doc_ids.len() + sum_ids.len() <= available {
        (doc_ids.len(), sum_ids.len())
    } else {
        let sum_take = sum_ids
            .len()
            .min((available / 2).max(available.saturating_sub(doc_ids.len())));
        (available - sum_take, sum_take)
    };
    let doc_alignment = SpanAlignment::from_word_lengths(
        document.sentence_offsets(),
        &doc_lengths,
        1,
        1 + doc_budget,
    );
    let doc_end = doc_alignment.end_position().unwrap_or(1);
    let sum_start = doc_end + 1;
    let sum_alignment = SpanAlignment::from_word_lengths(
        summary.sentence_offsets(),
        &sum_lengths,
        sum_start,
        sum_start + sum_budget,
    );
    let sum_end = sum_alignment.end_position().unwrap_or(sum_start);

    let mut ids = Vec::with_capacity(sum_end + 1);
    ids.push(tokenizer.cls_id());
    ids.extend_from_slice(&doc_ids[..doc_end - 1]);
    ids.push(tokenizer.sep_id());
    ids.extend_from_slice(&sum_ids[..sum_end - sum_start]);
    ids.push(tokenizer.sep_id());
    let mut segments = vec![0; sum_start];
    segments.resize(ids.len(), 1);

    let doc_aligned = align_frames(doc_frames, &doc_alignment);
    let sum_aligned = align_frames(sum_frames, &sum_alignment);
    Ok(PreparedSample {
        id: sample.id.clone(),
        input: EncoderInput { ids, segments },
        document,
        summary,
        doc_alignment,
        sum_alignment,
        doc_frames: doc_aligned,
        sum_frames: sum_aligned,
    })
}

/// Fact vectors of one sample as graph nodes.
pub struct FactVars {
    /// `n_d x d`
    pub doc: Var,
    /// `n_s x d`
    pub sum: Var,
    /// Fused token states (`seq x d`).
    pub tokens: Var,
    pub final_attention: Vec<Var>,
}

/// Pools every aligned frame of `prepared` from the fused token states `tokens`.
pub fn pool_frames(
    g: &mut Graph,
    store: &ParamStore,
    pooler: &AttentivePooler,
    tokens: Var,
    prepared: &PreparedSample,
) -> Result<(Var, Var)> {
    if prepared.sum_frames.frames.is_empty() {
        return Err(Error::InvalidSample {
            id: prepared.id.clone(),
            reason: "no summary frame survived alignment".into(),
        });
    }
    if prepared.doc_frames.frames.is_empty() {
        return Err(Error::InvalidSample {
            id: prepared.id.clone(),
            reason: "no document frame survived alignment".into(),
        });
    }
    let pool_all = |frames: &Alignment, g: &mut Graph| -> Var {
        let rows: Vec<Var> = frames
            .frames
            .iter()
            .map(|f| {
                let t = g.gather_rows(tokens, &f.positions());
                pooler.forward(g, store, t).vector
            })
            .collect();
        if rows.len() == 1 {
            rows[0]
        } else {
            g.concat_rows(&rows)
        }
    };
    let doc = pool_all(&prepared.doc_frames, g);
    let sum = pool_all(&prepared.sum_frames, g);
    Ok((doc, sum))
}

/// Encodes, fuses and pools one prepared sample on `g`.
pub fn encode_sample_vars(
    g: &mut Graph,
    store: &ParamStore,
    encoder: &dyn TokenEncoder,
    pooler: &AttentivePooler,
    prepared: &PreparedSample,
) -> Result<FactVars> {
    let out = encoder.forward(g, store, &prepared.input)?;
    let tokens = fuse_layers_var(g, &out.layers)?;
    let (doc, sum) = pool_frames(g, store, pooler, tokens, prepared)?;
    Ok(FactVars {
        doc,
        sum,
        tokens,
        final_attention: out.final_attention,
    })
}

/// Document and summary fact matrices for one sample.
pub fn encode_sample(
    store: &ParamStore,
    encoder: &dyn TokenEncoder,
    pooler: &AttentivePooler,
    prepared: &PreparedSample,
) -> Result<(Matrix, Matrix)> {
    let mut g = Graph::new();
    let vars = encode_sample_vars(&mut g, store, encoder, pooler, prepared)?;
    Ok((g.value(vars.doc).clone(), g.value(vars.sum).clone()))
}
