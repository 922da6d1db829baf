use ndarray::{Array1, Axis};
use rand::Rng;

use crate::autodiff::{Activation, Graph, Matrix, Var};
use crate::error::{Error, Result};
use crate::params::{Linear, ParamStore};

/// Elementwise maximum over the layer axis of `L x seq x d` hidden states.
pub fn fuse_layers(per_layer: &[Matrix]) -> Result<Matrix> {
    let first = per_layer
        .first()
        .ok_or_else(|| Error::Empty("no encoder layers to fuse".into()))?;
    let mut out = first.clone();
    for (l, layer) in per_layer.iter().enumerate().skip(1) {
        if layer.dim() != first.dim() {
            return Err(Error::Shape(format!(
                "layer {l} has shape {:?}, layer 0 has {:?}",
                layer.dim(),
                first.dim()
            )));
        }
        out.zip_mut_with(layer, |a, &b| *a = a.max(b));
    }
    Ok(out)
}

/// Recorded version of [`fuse_layers`].
pub fn fuse_layers_var(g: &mut Graph, per_layer: &[Var]) -> Result<Var> {
    if per_layer.is_empty() {
        return Err(Error::Empty("no encoder layers to fuse".into()));
    }
    let dim = g.value(per_layer[0]).dim();
    if let Some(bad) = per_layer.iter().find(|&&v| g.value(v).dim() != dim) {
        return Err(Error::Shape(format!(
            "layer shape {:?} differs from {:?}",
            g.value(*bad).dim(),
            dim
        )));
    }
    Ok(if per_layer.len() == 1 {
        per_layer[0]
    } else {
        g.max_of(per_layer)
    })
}

/// Attentive pooling over the tokens of one frame.
///
/// `value_net` (φ) is a two-layer network `d -> hidden -> d`; `score_head`
/// maps φ(t) to a scalar logit. The fact vector is `Σ α_j φ(t_j)` with
/// `α = softmax(score_head(φ(t)))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentivePooler {
    pub hidden: Linear,
    pub project: Linear,
    pub score_head: Linear,
    pub activation: Activation,
}

/// A pooled fact vector with the token weights that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FactEmbedding {
    pub vector: Array1<f64>,
    pub weights: Vec<f64>,
    /// Index of the pooled frame in its document or summary frame list.
    pub frame: Option<usize>,
}

pub struct PooledVars {
    /// `1 x d`
    pub vector: Var,
    /// `1 x m`
    pub weights: Var,
}

impl AttentivePooler {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        hidden: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            hidden: Linear::new(store, &format!("{name}.phi.0"), dim, hidden, true, rng),
            project: Linear::new(store, &format!("{name}.phi.1"), hidden, dim, true, rng),
            score_head: Linear::new(store, &format!("{name}.score"), dim, 1, true, rng),
            activation,
        }
    }

    pub fn dim(&self, store: &ParamStore) -> usize {
        self.hidden.input_dim(store)
    }

    /// φ applied row-wise.
    pub fn value_net(&self, g: &mut Graph, store: &ParamStore, tokens: Var) -> Var {
        let h = self.hidden.forward(g, store, tokens);
        let h = g.activation(h, self.activation);
        self.project.forward(g, store, h)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, tokens: Var) -> PooledVars {
        let phi = self.value_net(g, store, tokens);
        let logits = self.score_head.forward(g, store, phi);
        let logits = g.transpose(logits);
        let weights = g.softmax_rows(logits);
        let vector = g.matmul(weights, phi);
        PooledVars { vector, weights }
    }
}

/// Pools an `m x d` token matrix into one fact vector.
pub fn pool_fact(
    tokens: &Matrix,
    pooler: &AttentivePooler,
    store: &ParamStore,
) -> Result<FactEmbedding> {
    if tokens.nrows() == 0 {
        return Err(Error::Empty("frame has no tokens".into()));
    }
    let d = pooler.dim(store);
    if tokens.ncols() != d {
        return Err(Error::Shape(format!(
            "pooler expects width {d}, got {}",
            tokens.ncols()
        )));
    }
    let mut g = Graph::new();
    let t = g.constant(tokens.clone());
    let out = pooler.forward(&mut g, store, t);
    Ok(FactEmbedding {
        vector: g.value(out.vector).row(0).to_owned(),
        weights: g.value(out.weights).row(0).to_vec(),
        frame: None,
    })
}

/// Stacks fact vectors row-wise into a fact matrix.
pub fn stack_facts(facts: &[FactEmbedding]) -> Result<Matrix> {
    let views: Vec<_> = facts
        .iter()
        .map(|f| f.vector.view().insert_axis(Axis(0)))
        .collect();
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Shape(e.to_string()))
}
