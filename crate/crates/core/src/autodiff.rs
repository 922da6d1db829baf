//! Minimal reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Calling
//! [`Graph::backward`] walks the record in reverse and returns gradients for
//! every node that depends on a trainable parameter or a gradient-tracked
//! input. Graphs are cheap and meant to be rebuilt for every sample.

use ndarray::{concatenate, s, Array2, Axis, Zip};

use crate::params::{ParamId, ParamStore};

pub type Matrix = Array2<f64>;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Gelu,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Some(Activation::Relu),
            "gelu" => Some(Activation::Gelu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Gelu => {
                let u = GELU_C * (x + 0.044715 * x * x * x);
                0.5 * x * (1.0 + u.tanh())
            }
            Activation::Tanh => x.tanh(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let u = GELU_C * (x + 0.044715 * x * x * x);
                let t = u.tanh();
                let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
        }
    }
}

// sqrt(2/pi), tanh approximation of GELU
const GELU_C: f64 = 0.797_884_560_802_865_4;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax of a matrix.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    ParamRows(ParamId, Vec<usize>, usize),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Act(Var, Activation),
    Sigmoid(Var),
    SoftmaxRows(Var),
    Transpose(Var),
    MaxOf(Vec<Var>, Vec<usize>),
    MeanRows(Var),
    SumAll(Var),
    RepeatRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SliceCols(Var, usize, usize),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Matrix,
        inv_std: Vec<f64>,
    },
    WeightedBce {
        p: Var,
        target: Matrix,
        beta: Vec<f64>,
        clamp: f64,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Grads {
    node_grads: Vec<Option<Matrix>>,
    params: Vec<(ParamId, Matrix)>,
}

impl Grads {
    /// Gradient of a leaf created with [`Graph::variable`].
    pub fn of(&self, v: Var) -> Option<&Matrix> {
        self.node_grads.get(v.0).and_then(Option::as_ref)
    }

    /// Parameter gradients; a parameter used several times appears once per use.
    pub fn params(&self) -> &[(ParamId, Matrix)] {
        &self.params
    }
}

fn add_into(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Input whose gradient is wanted.
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Parameter leaf; tracked when the parameter is trainable.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.param(id);
        self.push(p.value.clone(), Op::Param(id), p.trainable)
    }

    /// Selected rows of a parameter (embedding lookup).
    pub fn param_rows(&mut self, store: &ParamStore, id: ParamId, rows: &[usize]) -> Var {
        let p = store.param(id);
        let value = p.value.select(Axis(0), rows);
        let n = p.value.nrows();
        self.push(value, Op::ParamRows(id, rows.to_vec(), n), p.trainable)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Sub(a, b), rg)
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a single row");
        let v = self.value(a) + self.value(row);
        let rg = self.rg(a) || self.rg(row);
        self.push(v, Op::AddRow(a, row), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, c), rg)
    }

    pub fn activation(&mut self, a: Var, act: Activation) -> Var {
        let v = self.value(a).mapv(|x| act.apply(x));
        let rg = self.rg(a);
        self.push(v, Op::Act(a, act), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        let rg = self.rg(a);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        let rg = self.rg(a);
        self.push(v, Op::SoftmaxRows(a), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        let rg = self.rg(a);
        self.push(v, Op::Transpose(a), rg)
    }

    /// Elementwise maximum over equally shaped inputs. The gradient goes to
    /// the first input holding the maximum.
    pub fn max_of(&mut self, inputs: &[Var]) -> Var {
        assert!(!inputs.is_empty(), "max_of needs at least one input");
        let first = self.value(inputs[0]);
        let mut best = first.clone();
        let mut arg = vec![0usize; best.len()];
        for (k, &v) in inputs.iter().enumerate().skip(1) {
            let cur = self.value(v);
            assert_eq!(cur.dim(), best.dim(), "max_of shape mismatch");
            for (i, (b, &c)) in best.iter_mut().zip(cur.iter()).enumerate() {
                if c > *b {
                    *b = c;
                    arg[i] = k;
                }
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        self.push(best, Op::MaxOf(inputs.to_vec(), arg), rg)
    }

    /// Column means, as a `1 x n` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = x
            .mean_axis(Axis(0))
            .expect("non-empty")
            .insert_axis(Axis(0));
        let rg = self.rg(a);
        self.push(v, Op::MeanRows(a), rg)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(a);
        self.push(v, Op::SumAll(a), rg)
    }

    /// Stacks `n` copies of a `1 x d` row.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Var {
        let row = self.value(a);
        assert_eq!(row.nrows(), 1);
        let v = row
            .broadcast((n, row.ncols()))
            .expect("row broadcast")
            .to_owned();
        let rg = self.rg(a);
        self.push(v, Op::RepeatRows(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(v, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(v, Op::ConcatRows(parts.to_vec()), rg)
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let v = self.value(a).select(Axis(0), rows);
        let rg = self.rg(a);
        self.push(v, Op::GatherRows(a, rows.to_vec()), rg)
    }

    /// Columns `[start, end)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        let rg = self.rg(a);
        self.push(v, Op::SliceCols(a, start, end), rg)
    }

    /// Per-row normalization with a learned `1 x n` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let n = xv.ncols() as f64;
        let mut normalized = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in normalized.rows_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std.push(inv);
        }
        let v = &normalized * self.value(gain) + self.value(bias);
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        self.push(
            v,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
            rg,
        )
    }

    /// `-Σ [β_c y log p + (1 - y) log(1 - p)]` over all entries of `p`, with
    /// `p` clamped to `[clamp, 1 - clamp]`. `beta` is indexed by column.
    pub fn weighted_bce(&mut self, p: Var, target: Matrix, beta: &[f64], clamp: f64) -> Var {
        let pv = self.value(p);
        assert_eq!(pv.dim(), target.dim(), "bce target shape");
        assert_eq!(pv.ncols(), beta.len(), "bce beta length");
        let mut loss = 0.0;
        for ((r, c), &pr) in pv.indexed_iter() {
            let q = pr.clamp(clamp, 1.0 - clamp);
            let y = target[[r, c]];
            loss -= beta[c] * y * q.ln() + (1.0 - y) * (1.0 - q).ln();
        }
        let rg = self.rg(p);
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::WeightedBce {
                p,
                target,
                beta: beta.to_vec(),
                clamp,
            },
            rg,
        )
    }

    /// Back-propagates from `output`, seeding its gradient with ones.
    pub fn backward(&self, output: Var) -> Grads {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Array2::ones(self.value(output).dim()));
        let mut params = Vec::new();
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let send = |v: Var, m: Matrix, grads: &mut Vec<Option<Matrix>>| {
                if self.rg(v) {
                    add_into(&mut grads[v.0], m);
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => params.push((*id, g)),
                Op::ParamRows(id, rows, n) => params.push((*id, scatter_rows(&g, rows, *n))),
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        send(*a, g.dot(&self.value(*b).t()), &mut grads);
                    }
                    if self.rg(*b) {
                        send(*b, self.value(*a).t().dot(&g), &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone(), &mut grads);
                    send(*b, g.clone(), &mut grads);
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone(), &mut grads);
                    send(*b, -&g, &mut grads);
                }
                Op::AddRow(a, row) => {
                    send(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut grads);
                    send(*a, g.clone(), &mut grads);
                }
                Op::Scale(a, c) => send(*a, &g * *c, &mut grads),
                Op::Act(a, act) => {
                    let mut d = self.value(*a).mapv(|x| act.derivative(x));
                    d *= &g;
                    send(*a, d, &mut grads);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let d = Zip::from(y).and(&g).map_collect(|&y, &g| g * y * (1.0 - y));
                    send(*a, d, &mut grads);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Array2::zeros(y.dim());
                    for ((mut dr, yr), gr) in d.rows_mut().into_iter().zip(y.rows()).zip(g.rows()) {
                        let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                        Zip::from(&mut dr)
                            .and(&yr)
                            .and(&gr)
                            .for_each(|d, &y, &g| *d = y * (g - dot));
                    }
                    send(*a, d, &mut grads);
                }
                Op::Transpose(a) => send(*a, g.t().to_owned(), &mut grads),
                Op::MaxOf(inputs, arg) => {
                    for (k, &v) in inputs.iter().enumerate() {
                        if !self.rg(v) {
                            continue;
                        }
                        let mut d = Array2::zeros(g.dim());
                        for (i, (dv, &gv)) in d.iter_mut().zip(g.iter()).enumerate() {
                            if arg[i] == k {
                                *dv = gv;
                            }
                        }
                        send(v, d, &mut grads);
                    }
                }
                Op::MeanRows(a) => {
                    let n = self.value(*a).nrows();
                    let d = g
                        .broadcast((n, g.ncols()))
                        .expect("mean broadcast")
                        .mapv(|v| v / n as f64);
                    send(*a, d, &mut grads);
                }
                Op::SumAll(a) => {
                    let d = Array2::from_elem(self.value(*a).dim(), g[[0, 0]]);
                    send(*a, d, &mut grads);
                }
                Op::RepeatRows(a) => {
                    send(*a, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut grads);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        send(p, g.slice(s![.., start..start + w]).to_owned(), &mut grads);
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(p).nrows();
                        send(p, g.slice(s![start..start + h, ..]).to_owned(), &mut grads);
                        start += h;
                    }
                }
                Op::GatherRows(a, rows) => {
                    let n = self.value(*a).nrows();
                    send(*a, scatter_rows(&g, rows, n), &mut grads);
                }
                Op::SliceCols(a, start, end) => {
                    let mut d = Array2::zeros(self.value(*a).dim());
                    d.slice_mut(s![.., *start..*end]).assign(&g);
                    send(*a, d, &mut grads);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    send(*bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut grads);
                    if self.rg(*gain) {
                        let dg = (&g * normalized).sum_axis(Axis(0)).insert_axis(Axis(0));
                        send(*gain, dg, &mut grads);
                    }
                    if self.rg(*x) {
                        let dxhat = &g * self.value(*gain);
                        let n = dxhat.ncols() as f64;
                        let mut dx = Array2::zeros(dxhat.dim());
                        for (r, mut row) in dx.rows_mut().into_iter().enumerate() {
                            let dh = dxhat.row(r);
                            let xh = normalized.row(r);
                            let sum_dh = dh.sum();
                            let sum_dh_xh: f64 = dh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum();
                            for c in 0..row.len() {
                                row[c] = inv_std[r] / n * (n * dh[c] - sum_dh - xh[c] * sum_dh_xh);
                            }
                        }
                        send(*x, dx, &mut grads);
                    }
                }
                Op::WeightedBce {
                    p,
                    target,
                    beta,
                    clamp,
                } => {
                    let scale = g[[0, 0]];
                    let pv = self.value(*p);
                    let mut d = Array2::zeros(pv.dim());
                    for ((r, c), &pr) in pv.indexed_iter() {
                        if pr <= *clamp || pr >= 1.0 - *clamp {
                            continue;
                        }
                        let y = target[[r, c]];
                        d[[r, c]] = -scale * (beta[c] * y / pr - (1.0 - y) / (1.0 - pr));
                    }
                    send(*p, d, &mut grads);
                }
            }
        }
        // Only leaf slots survive; intermediate gradients were consumed above.
        Grads {
            node_grads: grads,
            params,
        }
    }
}

fn scatter_rows(g: &Matrix, rows: &[usize], n: usize) -> Matrix {
    let mut d = Array2::zeros((n, g.ncols()));
    for (i, &r) in rows.iter().enumerate() {
        let mut dst = d.row_mut(r);
        dst += &g.row(i);
    }
    d
}
