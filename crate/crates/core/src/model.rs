//! The full detector: encoder, fact pooling, document fact attention and
//! the classification head, sharing one parameter store.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    importance, top_k_highlights, AttentionMap, HighlightResult, ImportanceScores,
    MultiHeadCrossAttention,
};
use crate::autodiff::{Activation, Graph, Matrix, Var};
use crate::classifier::ClassifierHead;
use crate::encoder::{
    pool_frames, prepare_sample, AttentivePooler, EncoderConfig, EncoderKind, PreparedSample,
    TokenEncoder, Tokenizer, TransformerEncoder,
};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::srl::FrameIndex;
use crate::text::TokenizedText;
use crate::types::{
    FrameSource, LabelVector, Sample, SemanticFrame, SystemCategory, NUM_ERROR_TYPES,
};

/// How summary facts obtain their document context vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocContext {
    /// Multi-head cross-attention over the document fact matrix.
    Attention,
    /// Ablation: every summary fact gets the mean document fact vector.
    MeanPool,
}

/// How per-layer encoder states are combined into token vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerFusion {
    Max,
    Mean,
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Width of the pooler's hidden layer; 0 means the encoder width.
    pub pooler_hidden: usize,
    pub pooler_activation: Activation,
    /// Heads of the document fact attention.
    pub heads: usize,
    pub doc_context: DocContext,
    pub layer_fusion: LayerFusion,
    /// Maximum encoder input length in subwords.
    pub truncation: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            pooler_hidden: 0,
            pooler_activation: Activation::Gelu,
            heads: 16,
            doc_context: DocContext::Attention,
            layer_fusion: LayerFusion::Max,
            truncation: 512,
        }
    }
}

impl ModelConfig {
    pub fn toy(hidden: usize, heads: usize) -> Self {
        Self {
            encoder: EncoderConfig::toy(hidden),
            heads,
            ..Self::default()
        }
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.heads == 0 || !self.hidden().is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "fact attention: hidden size {} not divisible by {} heads",
                self.hidden(),
                self.heads
            )));
        }
        if self.truncation < 4 || self.truncation > self.encoder.max_positions {
            return Err(Error::Config(format!(
                "truncation {} must lie in [4, {}]",
                self.truncation, self.encoder.max_positions
            )));
        }
        Ok(())
    }
}

/// Graph nodes of one forward pass.
pub struct ForwardVars {
    /// `1 x 4` probabilities.
    pub probs: Var,
    pub doc_facts: Var,
    pub sum_facts: Var,
    pub context: Var,
    /// Fact attention per head (`n_s x n_d`); empty for the mean-pool ablation.
    pub fact_attention: Vec<Var>,
    /// Encoder last-layer attention per head; empty when token states were cached.
    pub encoder_attention: Vec<Var>,
}

/// Evaluation-mode output for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub probs: [f64; NUM_ERROR_TYPES],
    pub attention: Option<AttentionMap>,
    pub importance: Option<ImportanceScores>,
    /// Last-layer attention from the `[CLS]` position, per head.
    pub cls_attention: Vec<Vec<f64>>,
}

/// A prepared sample with its gold labels, ready for training or scoring.
#[derive(Debug, Clone)]
pub struct Example {
    pub prepared: PreparedSample,
    pub labels: LabelVector,
    pub category: SystemCategory,
}

#[derive(Debug, Clone)]
pub struct FactModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    encoder: TransformerEncoder,
    pooler: AttentivePooler,
    attention: MultiHeadCrossAttention,
    head: ClassifierHead,
    tokenizer: Tokenizer,
}

impl FactModel {
    /// Randomly initialized model. For the adapter encoder the frozen
    /// backbone is then loaded from `config.encoder.pretrained`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::init(config, seed)?;
        if model.config.encoder.kind == EncoderKind::Adapter {
            let path =
                model.config.encoder.pretrained.clone().ok_or_else(|| {
                    Error::Config("adapter encoder needs pretrained weights".into())
                })?;
            let backbone = crate::checkpoint::read_params(&path)?;
            let n = model.store.load_matching(&backbone)?;
            if n == 0 {
                return Err(Error::Checkpoint(format!(
                    "{} shares no parameters with the encoder",
                    path.display()
                )));
            }
        }
        Ok(model)
    }

    /// Builds the architecture with fresh random parameters only.
    pub(crate) fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let tokenizer = config.encoder.tokenizer()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.hidden();
        let encoder = TransformerEncoder::new(&config.encoder, &mut store, &mut rng)?;
        let hidden = if config.pooler_hidden == 0 {
            d
        } else {
            config.pooler_hidden
        };
        let pooler = AttentivePooler::new(
            &mut store,
            "pooler",
            d,
            hidden,
            config.pooler_activation,
            &mut rng,
        );
        let attention = MultiHeadCrossAttention::new(
            &mut store,
            "fact_attention",
            d,
            config.heads,
            true,
            &mut rng,
        )?;
        let head = ClassifierHead::new(&mut store, "classifier", d, &mut rng);
        Ok(Self {
            config,
            store,
            encoder,
            pooler,
            attention,
            head,
            tokenizer,
        })
    }

    pub fn encoder(&self) -> &TransformerEncoder {
        &self.encoder
    }

    pub fn pooler(&self) -> &AttentivePooler {
        &self.pooler
    }

    pub fn fact_attention(&self) -> &MultiHeadCrossAttention {
        &self.attention
    }

    pub fn head(&self) -> &ClassifierHead {
        &self.head
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// True when no encoder parameter is trainable, so token states can be cached.
    pub fn encoder_frozen(&self) -> bool {
        !self
            .store
            .iter()
            .any(|(_, p)| p.trainable && p.name.starts_with("encoder."))
    }

    /// Lays out a sample with its frames. When truncation removes every frame
    /// of one side, that side falls back to whole-sentence frames.
    pub fn prepare(&self, sample: &Sample, frames: &FrameIndex) -> Result<PreparedSample> {
        let (doc, sum) = frames.pair(&sample.id)?;
        let prepared = prepare_sample(sample, doc, sum, &self.tokenizer, self.config.truncation)?;
        let doc_empty = prepared.doc_frames.frames.is_empty();
        let sum_empty = prepared.sum_frames.frames.is_empty();
        if !doc_empty && !sum_empty {
            return Ok(prepared);
        }
        log::warn!(
            "sample {}: no frame survived truncation, using whole sentences",
            sample.id
        );
        let whole = |text: &TokenizedText, source| -> Vec<SemanticFrame> {
            text.sentences
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.is_empty())
                .map(|(i, s)| SemanticFrame::full_sentence(i, s.len(), source))
                .collect()
        };
        let doc_whole;
        let doc = if doc_empty {
            doc_whole = whole(&prepared.document, FrameSource::Document);
            &doc_whole[..]
        } else {
            doc
        };
        let sum_whole;
        let sum = if sum_empty {
            sum_whole = whole(&prepared.summary, FrameSource::Summary);
            &sum_whole[..]
        } else {
            sum
        };
        prepare_sample(sample, doc, sum, &self.tokenizer, self.config.truncation)
    }

    pub fn prepare_examples(
        &self,
        samples: &[Sample],
        frames: &FrameIndex,
    ) -> Result<Vec<Example>> {
        samples
            .iter()
            .map(|s| {
                Ok(Example {
                    prepared: self.prepare(s, frames)?,
                    labels: s.labels,
                    category: s.system_category,
                })
            })
            .collect()
    }

    fn fuse(&self, g: &mut Graph, layers: &[Var]) -> Result<Var> {
        match self.config.layer_fusion {
            LayerFusion::Max => crate::encoder::fuse_layers_var(g, layers),
            LayerFusion::Last => layers
                .last()
                .copied()
                .ok_or_else(|| Error::Empty("no encoder layers".into())),
            LayerFusion::Mean => {
                let mut acc = *layers
                    .first()
                    .ok_or_else(|| Error::Empty("no encoder layers".into()))?;
                for &l in &layers[1..] {
                    acc = g.add(acc, l);
                }
                Ok(g.scale(acc, 1.0 / layers.len() as f64))
            }
        }
    }

    /// Fused token states of a sample (`seq x d`), evaluated without recording.
    pub fn token_states(&self, prepared: &PreparedSample) -> Result<Matrix> {
        let mut g = Graph::new();
        let out = self.encoder.forward(&mut g, &self.store, &prepared.input)?;
        let t = self.fuse(&mut g, &out.layers)?;
        Ok(g.value(t).clone())
    }

    /// Records a full forward pass on `g`. `cached_tokens` replaces the
    /// encoder when its parameters are frozen.
    pub fn forward(
        &self,
        g: &mut Graph,
        prepared: &PreparedSample,
        cached_tokens: Option<&Matrix>,
    ) -> Result<ForwardVars> {
        let (tokens, encoder_attention) = match cached_tokens {
            Some(t) => (g.constant(t.clone()), Vec::new()),
            None => {
                let out = self.encoder.forward(g, &self.store, &prepared.input)?;
                (self.fuse(g, &out.layers)?, out.final_attention)
            }
        };
        let (doc_facts, sum_facts) = pool_frames(g, &self.store, &self.pooler, tokens, prepared)?;
        let (context, fact_attention) = match self.config.doc_context {
            DocContext::Attention => {
                let att = self.attention.forward(g, &self.store, sum_facts, doc_facts);
                (att.context, att.probs)
            }
            DocContext::MeanPool => {
                let n_s = g.value(sum_facts).nrows();
                let mean = g.mean_rows(doc_facts);
                (g.repeat_rows(mean, n_s), Vec::new())
            }
        };
        let f_bar = g.mean_rows(sum_facts);
        let c_bar = g.mean_rows(context);
        let probs = self.head.forward(g, &self.store, f_bar, c_bar);
        Ok(ForwardVars {
            probs,
            doc_facts,
            sum_facts,
            context,
            fact_attention,
            encoder_attention,
        })
    }

    pub fn infer(&self, prepared: &PreparedSample) -> Result<Inference> {
        self.infer_with(prepared, None)
    }

    pub fn infer_with(
        &self,
        prepared: &PreparedSample,
        cached_tokens: Option<&Matrix>,
    ) -> Result<Inference> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, prepared, cached_tokens)?;
        let pv = g.value(out.probs);
        let mut probs = [0.0; NUM_ERROR_TYPES];
        for (p, v) in probs.iter_mut().zip(pv.iter()) {
            *p = *v;
        }
        let attention = (!out.fact_attention.is_empty()).then(|| AttentionMap {
            heads: out
                .fact_attention
                .iter()
                .map(|&v| g.value(v).clone())
                .collect(),
        });
        let importance = attention.as_ref().map(importance);
        let cls_attention = out
            .encoder_attention
            .iter()
            .map(|&v| g.value(v).row(0).to_vec())
            .collect();
        Ok(Inference {
            probs,
            attention,
            importance,
            cls_attention,
        })
    }

    /// Top-k document facts by received attention.
    pub fn highlights(
        &self,
        prepared: &PreparedSample,
        inference: &Inference,
        k: usize,
    ) -> Result<HighlightResult> {
        let scores = inference.importance.as_ref().ok_or_else(|| {
            Error::Config("highlights need the attention document context".into())
        })?;
        top_k_highlights(&scores.scores, &prepared.document_frames(), k)
    }
}
