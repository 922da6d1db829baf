//! Named parameter storage, dense layers and the Adam optimizer.

use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{Grads, Graph, Matrix, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub trainable: bool,
}

/// All parameters of a model, addressable by id or name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name}"
        );
        self.by_name.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Marks every parameter whose name starts with `prefix`.
    pub fn set_trainable(&mut self, prefix: &str, trainable: bool) {
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.trainable = trainable;
            }
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn num_trainable_scalars(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    /// Copies values from `other` for every parameter with a matching name
    /// and shape. Returns the number of parameters copied.
    pub fn load_matching(&mut self, other: &ParamStore) -> Result<usize> {
        let mut n = 0;
        for p in &mut self.params {
            if let Some(&j) = other.by_name.get(&p.name) {
                let src = &other.params[j].value;
                if src.dim() != p.value.dim() {
                    return Err(Error::Shape(format!(
                        "parameter {}: expected {:?}, found {:?}",
                        p.name,
                        p.value.dim(),
                        src.dim()
                    )));
                }
                p.value.assign(src);
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn all_finite(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.value.iter().all(|v| v.is_finite()))
    }
}

/// Accumulated gradients, one optional slot per parameter.
#[derive(Debug, Clone, Default)]
pub struct GradBuffer {
    slots: Vec<Option<Matrix>>,
}

impl GradBuffer {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            slots: vec![None; store.len()],
        }
    }

    pub fn accumulate(&mut self, grads: &Grads, scale: f64) {
        for (id, g) in grads.params() {
            match &mut self.slots[id.0] {
                Some(acc) => acc.scaled_add(scale, g),
                slot @ None => *slot = Some(g * scale),
            }
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.slots.get(id.0).and_then(Option::as_ref)
    }

    pub fn clear(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }
}

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Option<Matrix>>,
    v: Vec<Option<Matrix>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &GradBuffer) {
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..store.len() {
            let id = ParamId(i);
            if !store.param(id).trainable {
                continue;
            }
            let Some(g) = grads.get(id) else { continue };
            let m = self.m[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            m.zip_mut_with(g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            let v = self.v[i].get_or_insert_with(|| Array2::zeros(g.dim()));
            v.zip_mut_with(g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let (lr, eps) = (self.lr, self.eps);
            let m = &self.m[i].as_ref().expect("set above");
            let v = &self.v[i].as_ref().expect("set above");
            let value = store.value_mut(id);
            ndarray::Zip::from(value)
                .and(*m)
                .and(*v)
                .for_each(|p, &m, &v| *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps));
        }
    }
}

pub fn uniform_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    bound: f64,
) -> Matrix {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}

/// Affine map `x W + b` with `W: in x out` and `b: 1 x out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    /// Uniform init in `±1/sqrt(in)` for weights and bias.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let weight = store.add(
            format!("{name}.weight"),
            uniform_matrix(rng, input, output, bound),
            trainable,
        );
        let bias = store.add(
            format!("{name}.bias"),
            uniform_matrix(rng, 1, output, bound),
            trainable,
        );
        Self { weight, bias }
    }

    pub fn zeros(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        trainable: bool,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            Array2::zeros((input, output)),
            trainable,
        );
        let bias = store.add(
            format!("{name}.bias"),
            Array2::zeros((1, output)),
            trainable,
        );
        Self { weight, bias }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.value(self.weight).nrows()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        store.value(self.weight).ncols()
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xw = g.matmul(x, w);
        g.add_row(xw, b)
    }

    /// Plain evaluation without recording.
    pub fn apply(&self, store: &ParamStore, x: &Matrix) -> Matrix {
        x.dot(store.value(self.weight)) + store.value(self.bias)
    }
}
