use ndarray::Array2;
use rand::Rng;

use crate::attention::MultiHeadCrossAttention;
use crate::autodiff::{Activation, Graph, Matrix, Var};
use crate::error::{Error, Result};
use crate::params::{uniform_matrix, Linear, ParamStore};

use super::{EncoderConfig, EncoderInput, EncoderOutput, TokenEncoder};

/// Bottleneck adapter `h + up(act(down(h)))`; `up` starts at zero so a fresh
/// adapter is the identity.
#[derive(Debug, Clone, Copy)]
struct Adapter {
    down: Linear,
    up: Linear,
}

impl Adapter {
    fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        bottleneck: usize,
        rng: &mut R,
    ) -> Self {
        let down = Linear::new(store, &format!("{name}.down"), dim, bottleneck, true, rng);
        let up = Linear::zeros(store, &format!("{name}.up"), bottleneck, dim, true);
        Self { down, up }
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, h: Var, act: Activation) -> Var {
        let d = self.down.forward(g, store, h);
        let d = g.activation(d, act);
        let u = self.up.forward(g, store, d);
        g.add(h, u)
    }
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gain: crate::params::ParamId,
    bias: crate::params::ParamId,
}

impl Norm {
    fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Array2::ones((1, dim)), false),
            bias: store.add(format!("{name}.bias"), Array2::zeros((1, dim)), false),
        }
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let gain = g.param(store, self.gain);
        let bias = g.param(store, self.bias);
        g.layer_norm(x, gain, bias, 1e-12)
    }
}

#[derive(Debug, Clone)]
struct Layer {
    attention: MultiHeadCrossAttention,
    attention_norm: Norm,
    attention_adapter: Adapter,
    ffn_in: Linear,
    ffn_out: Linear,
    ffn_norm: Norm,
    ffn_adapter: Adapter,
}

/// Post-norm transformer encoder with a bottleneck adapter after the
/// attention and feed-forward sublayers of every layer.
///
/// The backbone (embeddings, attention, feed-forward, norms) is frozen;
/// only the adapters are trainable, and only when `train_adapters` is set.
#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    config: EncoderConfig,
    token_embedding: crate::params::ParamId,
    position_embedding: crate::params::ParamId,
    segment_embedding: crate::params::ParamId,
    embedding_norm: Norm,
    layers: Vec<Layer>,
}

pub(crate) const PREFIX: &str = "encoder";

impl TransformerEncoder {
    pub fn new<R: Rng + ?Sized>(
        config: &EncoderConfig,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.hidden;
        let token_embedding = store.add(
            format!("{PREFIX}.embeddings.token"),
            uniform_matrix(rng, config.vocab_size, d, 1.0),
            false,
        );
        let position_embedding = store.add(
            format!("{PREFIX}.embeddings.position"),
            uniform_matrix(rng, config.max_positions, d, 0.1),
            false,
        );
        let segment_embedding = store.add(
            format!("{PREFIX}.embeddings.segment"),
            uniform_matrix(rng, 2, d, 0.1),
            false,
        );
        let embedding_norm = Norm::new(store, &format!("{PREFIX}.embeddings.norm"), d);
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let name = format!("{PREFIX}.layer{l}");
            let attention = MultiHeadCrossAttention::new(
                store,
                &format!("{name}.attention"),
                d,
                config.heads,
                false,
                rng,
            )?;
            let attention_norm = Norm::new(store, &format!("{name}.attention_norm"), d);
            let attention_adapter = Adapter::new(
                store,
                &format!("{name}.adapter.attention"),
                d,
                config.adapter_dim,
                rng,
            );
            let ffn_in = Linear::new(store, &format!("{name}.ffn_in"), d, config.ffn, false, rng);
            let ffn_out = Linear::new(store, &format!("{name}.ffn_out"), config.ffn, d, false, rng);
            let ffn_norm = Norm::new(store, &format!("{name}.ffn_norm"), d);
            let ffn_adapter = Adapter::new(
                store,
                &format!("{name}.adapter.ffn"),
                d,
                config.adapter_dim,
                rng,
            );
            layers.push(Layer {
                attention,
                attention_norm,
                attention_adapter,
                ffn_in,
                ffn_out,
                ffn_norm,
                ffn_adapter,
            });
        }
        store.set_trainable(&format!("{PREFIX}."), false);
        if config.train_adapters {
            for l in 0..config.layers {
                store.set_trainable(&format!("{PREFIX}.layer{l}.adapter."), true);
            }
        }
        Ok(Self {
            config: config.clone(),
            token_embedding,
            position_embedding,
            segment_embedding,
            embedding_norm,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }
}

impl TokenEncoder for TransformerEncoder {
    fn hidden_size(&self) -> usize {
        self.config.hidden
    }

    fn num_layers(&self) -> usize {
        self.config.layers
    }

    fn max_positions(&self) -> usize {
        self.config.max_positions
    }

    fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        input: &EncoderInput,
    ) -> Result<EncoderOutput> {
        let n = input.ids.len();
        if n == 0 {
            return Err(Error::Empty("encoder input".into()));
        }
        if n > self.config.max_positions {
            return Err(Error::Shape(format!(
                "sequence of {n} exceeds {} positions",
                self.config.max_positions
            )));
        }
        if input.segments.len() != n {
            return Err(Error::Shape(
                "segment ids length differs from token ids".into(),
            ));
        }
        let positions: Vec<usize> = (0..n).collect();
        let tok = g.param_rows(store, self.token_embedding, &input.ids);
        let pos = g.param_rows(store, self.position_embedding, &positions);
        let seg = g.param_rows(store, self.segment_embedding, &input.segments);
        let e = g.add(tok, pos);
        let e = g.add(e, seg);
        let mut h = self.embedding_norm.forward(g, store, e);
        let act = self.config.activation;
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut final_attention = Vec::new();
        for layer in &self.layers {
            let att = layer.attention.forward(g, store, h, h);
            let a = layer.attention_adapter.forward(g, store, att.context, act);
            let res = g.add(h, a);
            h = layer.attention_norm.forward(g, store, res);
            let f = layer.ffn_in.forward(g, store, h);
            let f = g.activation(f, act);
            let f = layer.ffn_out.forward(g, store, f);
            let f = layer.ffn_adapter.forward(g, store, f, act);
            let res = g.add(h, f);
            h = layer.ffn_norm.forward(g, store, res);
            layers.push(h);
            final_attention = att.probs;
        }
        Ok(EncoderOutput {
            layers,
            final_attention,
        })
    }
}

/// Per-layer hidden states and final-layer attention as plain matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedStates {
    pub layers: Vec<Matrix>,
    /// `[head]` of `seq x seq` probabilities from the last layer.
    pub final_attention: Vec<Matrix>,
}

/// Runs an encoder without keeping the graph.
pub fn encode(
    encoder: &dyn TokenEncoder,
    store: &ParamStore,
    input: &EncoderInput,
) -> Result<EncodedStates> {
    let mut g = Graph::new();
    let out = encoder.forward(&mut g, store, input)?;
    Ok(EncodedStates {
        layers: out.layers.iter().map(|&v| g.value(v).clone()).collect(),
        final_attention: out
            .final_attention
            .iter()
            .map(|&v| g.value(v).clone())
            .collect(),
    })
}
