//! Mean-pooled fusion of summary facts and document context vectors, and the
//! sigmoid classification head over the four error types.

use ndarray::{Array1, Axis};
use rand::Rng;

use crate::autodiff::{sigmoid, Graph, Matrix, Var};
use crate::error::{Error, Result};
use crate::params::{Linear, ParamStore};
use crate::types::{LabelVector, NUM_ERROR_TYPES};

/// `p = σ(Wᵀ [f̄_sum; c̄] + b)` with `W: 2d x 4` and a per-type bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierHead {
    pub linear: Linear,
}

impl ClassifierHead {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            linear: Linear::new(store, name, 2 * dim, NUM_ERROR_TYPES, true, rng),
        }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        self.linear.input_dim(store)
    }

    /// Probabilities (`1 x 4`) from the fused summary and context rows.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, f_bar: Var, c_bar: Var) -> Var {
        let x = g.concat_cols(&[f_bar, c_bar]);
        let logits = self.linear.forward(g, store, x);
        g.sigmoid(logits)
    }
}

/// Column means of the summary fact matrix and the context matrix.
pub fn fuse(f_sum: &Matrix, context: &Matrix) -> Result<(Array1<f64>, Array1<f64>)> {
    if f_sum.nrows() == 0 {
        return Err(Error::Empty("no summary facts to fuse".into()));
    }
    if f_sum.dim() != context.dim() {
        return Err(Error::Shape(format!(
            "summary facts {:?} vs context {:?}",
            f_sum.dim(),
            context.dim()
        )));
    }
    Ok((
        f_sum.mean_axis(Axis(0)).expect("non-empty"),
        context.mean_axis(Axis(0)).expect("non-empty"),
    ))
}

pub fn predict(
    f_bar: &Array1<f64>,
    c_bar: &Array1<f64>,
    head: &ClassifierHead,
    store: &ParamStore,
) -> Result<[f64; NUM_ERROR_TYPES]> {
    let d2 = head.input_dim(store);
    if f_bar.len() + c_bar.len() != d2 {
        return Err(Error::Shape(format!(
            "head expects {d2} inputs, got {} + {}",
            f_bar.len(),
            c_bar.len()
        )));
    }
    let w = store.value(head.linear.weight);
    let b = store.value(head.linear.bias);
    let mut p = [0.0; NUM_ERROR_TYPES];
    for (c, out) in p.iter_mut().enumerate() {
        let mut z = b[[0, c]];
        for (i, x) in f_bar.iter().chain(c_bar.iter()).enumerate() {
            z += w[[i, c]] * x;
        }
        *out = sigmoid(z);
    }
    Ok(p)
}

/// Sets every type whose probability reaches `threshold` (ties count as positive).
pub fn decide(p: &[f64; NUM_ERROR_TYPES], threshold: f64) -> LabelVector {
    LabelVector::new(p.map(|x| x >= threshold))
}
