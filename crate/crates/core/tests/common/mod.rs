#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;

use finefact::attention::{attend, importance, top_k_highlights, MultiHeadCrossAttention};
use finefact::autodiff::Activation;
use finefact::autodiff::{Graph, Matrix, Var};
use finefact::classifier::{fuse, predict, ClassifierHead};
use finefact::encoder::{fuse_layers_var, AttentivePooler};
use finefact::evaluation::macro_f1;
use finefact::evaluation::{build_highlight_eval_set, recall_at_k, HighlightEvalSet, Matcher};
use finefact::model::DocContext;
use finefact::params::{GradBuffer, ParamId, ParamStore};
use finefact::srl::{extract_corpus, FrameIndex};
use finefact::synthetic::{alignment_task, evidence_corpus, fixture_backend, overfit_set};
use finefact::training::{
    example_loss, train, weighted_bce, weighted_bce_grad, ClassWeights, TrainConfig, PROB_CLAMP,
};
use finefact::types::{Argument, FrameSource, SemanticFrame, Span, PREDICATE_ROLE};
use finefact::{FactModel, LabelVector, ModelConfig, Sample};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
/// Denominator floor so that gradients near zero are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel: f64,
}

impl GradReport {
    fn push(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        self.max_rel = self.max_rel.max(rel_err(analytic, numeric));
    }

    pub fn ok(&self) -> bool {
        self.checked > 0 && self.max_rel <= GRAD_TOL
    }
}

type Build<'a> = dyn Fn(&mut Graph, &ParamStore, &[Var]) -> Var + 'a;

fn eval(inputs: &[Matrix], store: &ParamStore, build: &Build) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|m| g.constant(m.clone())).collect();
    let out = build(&mut g, store, &vars);
    g.scalar(out)
}

/// Central differences for every input entry and every trainable parameter
/// entry of a scalar graph.
pub fn check_graph(inputs: &[Matrix], store: &mut ParamStore, build: &Build) -> GradReport {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|m| g.variable(m.clone())).collect();
    let out = build(&mut g, store, &vars);
    assert_eq!(g.value(out).dim(), (1, 1), "scalar output");
    let grads = g.backward(out);
    let mut param_grads: BTreeMap<ParamId, Matrix> = BTreeMap::new();
    for (id, m) in grads.params() {
        *param_grads
            .entry(*id)
            .or_insert_with(|| Matrix::zeros(m.dim())) += m;
    }

    let mut report = GradReport::default();
    let mut inputs = inputs.to_vec();
    for i in 0..inputs.len() {
        let analytic = grads
            .of(vars[i])
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(inputs[i].dim()));
        for idx in 0..inputs[i].len() {
            let (r, c) = (idx / inputs[i].ncols(), idx % inputs[i].ncols());
            let orig = inputs[i][[r, c]];
            inputs[i][[r, c]] = orig + FD_STEP;
            let up = eval(&inputs, store, build);
            inputs[i][[r, c]] = orig - FD_STEP;
            let down = eval(&inputs, store, build);
            inputs[i][[r, c]] = orig;
            report.push(analytic[[r, c]], (up - down) / (2.0 * FD_STEP));
        }
    }
    let ids: Vec<ParamId> = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    for id in ids {
        let shape = store.value(id).dim();
        let analytic = param_grads
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape));
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = store.value(id)[[r, c]];
                store.value_mut(id)[[r, c]] = orig + FD_STEP;
                let up = eval(&inputs, store, build);
                store.value_mut(id)[[r, c]] = orig - FD_STEP;
                let down = eval(&inputs, store, build);
                store.value_mut(id)[[r, c]] = orig;
                report.push(analytic[[r, c]], (up - down) / (2.0 * FD_STEP));
            }
        }
    }
    report
}

/// A smooth scalar probe of a matrix node: `Σ σ(X R)`.
pub fn probe(g: &mut Graph, x: Var, seed: u64) -> Var {
    let cols = g.value(x).ncols();
    let r = random_matrix(&mut rng(seed), cols, 3);
    let r = g.constant(r);
    let y = g.matmul(x, r);
    let y = g.sigmoid(y);
    g.sum_all(y)
}

pub const GRAD_DIM: usize = 8;
pub const GRAD_HEADS: usize = 2;

pub fn grad_weighted_bce() -> GradReport {
    let mut r = rng(11);
    let weights = ClassWeights {
        beta: [0.4, 1.0, 2.5, 0.7],
    };
    let mut report = GradReport::default();
    for _ in 0..20 {
        let p: [f64; 4] = std::array::from_fn(|_| r.random_range(0.05..0.95));
        let gold = LabelVector::from_mask(r.random_range(0..16u8));
        let grad = weighted_bce_grad(&p, &gold, &weights);
        for i in 0..4 {
            let (mut up, mut down) = (p, p);
            up[i] += FD_STEP;
            down[i] -= FD_STEP;
            let numeric = (weighted_bce(&up, &gold, &weights)
                - weighted_bce(&down, &gold, &weights))
                / (2.0 * FD_STEP);
            report.push(grad[i], numeric);
        }
    }
    let p = Array2::from_shape_fn((1, 4), |_| r.random_range(0.05..0.95));
    let target = LabelVector::from_mask(0b1010).as_f64();
    let target = Array2::from_shape_vec((1, 4), target.to_vec()).unwrap();
    let graph = check_graph(&[p], &mut ParamStore::new(), &|g, _, v| {
        g.weighted_bce(v[0], target.clone(), &weights.beta, PROB_CLAMP)
    });
    report.checked += graph.checked;
    report.max_rel = report.max_rel.max(graph.max_rel);
    report
}

pub fn grad_pool_fact() -> GradReport {
    let mut r = rng(12);
    let mut store = ParamStore::new();
    let pooler = AttentivePooler::new(
        &mut store,
        "pooler",
        GRAD_DIM,
        GRAD_DIM,
        Activation::Gelu,
        &mut r,
    );
    let tokens = random_matrix(&mut r, 5, GRAD_DIM);
    check_graph(&[tokens], &mut store, &move |g, s, v| {
        let out = pooler.forward(g, s, v[0]);
        let a = probe(g, out.vector, 1);
        let b = probe(g, out.weights, 2);
        g.add(a, b)
    })
}

pub fn grad_fuse_layers() -> GradReport {
    let mut r = rng(13);
    let layers: Vec<Matrix> = (0..3).map(|_| random_matrix(&mut r, 4, GRAD_DIM)).collect();
    check_graph(&layers, &mut ParamStore::new(), &|g, _, v| {
        let fused = fuse_layers_var(g, v).unwrap();
        probe(g, fused, 3)
    })
}

pub fn grad_attend() -> GradReport {
    let mut r = rng(14);
    let mut store = ParamStore::new();
    let mha = MultiHeadCrossAttention::new(&mut store, "att", GRAD_DIM, GRAD_HEADS, true, &mut r)
        .unwrap();
    let f_sum = random_matrix(&mut r, 3, GRAD_DIM);
    let f_doc = random_matrix(&mut r, 5, GRAD_DIM);
    check_graph(&[f_sum, f_doc], &mut store, &move |g, s, v| {
        let out = mha.forward(g, s, v[0], v[1]);
        let mut total = probe(g, out.context, 4);
        for (h, &p) in out.probs.iter().enumerate() {
            let t = probe(g, p, 5 + h as u64);
            total = g.add(total, t);
        }
        total
    })
}

pub fn grad_predict() -> GradReport {
    let mut r = rng(15);
    let mut store = ParamStore::new();
    let head = ClassifierHead::new(&mut store, "classifier", GRAD_DIM, &mut r);
    let f_sum = random_matrix(&mut r, 3, GRAD_DIM);
    let context = random_matrix(&mut r, 3, GRAD_DIM);
    let target = Array2::from_shape_vec((1, 4), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let beta = [0.5, 1.5, 1.0, 2.0];
    check_graph(&[f_sum, context], &mut store, &move |g, s, v| {
        let f_bar = g.mean_rows(v[0]);
        let c_bar = g.mean_rows(v[1]);
        let p = head.forward(g, s, f_bar, c_bar);
        g.weighted_bce(p, target.clone(), &beta, PROB_CLAMP)
    })
}

/// End-to-end loss of a small detector against central differences, on a
/// few entries of every trainable parameter.
pub fn grad_full_model() -> GradReport {
    let sample = alignment_task(1, 3, 4).remove(0);
    let frames = frames_for(std::slice::from_ref(&sample));
    let mut model = FactModel::new(ModelConfig::toy(GRAD_DIM, GRAD_HEADS), 1).unwrap();
    let ex = model
        .prepare_examples(std::slice::from_ref(&sample), &frames)
        .unwrap()
        .remove(0);
    let weights = ClassWeights {
        beta: [0.5, 1.5, 1.0, 2.0],
    };
    let mut buf = GradBuffer::new(&model.store);
    example_loss(&model, &ex, None, &weights, Some((&mut buf, 1.0))).unwrap();
    let mut report = GradReport::default();
    let ids: Vec<ParamId> = model
        .store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    let mut r = rng(16);
    for id in ids {
        let shape = model.store.value(id).dim();
        for _ in 0..3 {
            let (row, col) = (r.random_range(0..shape.0), r.random_range(0..shape.1));
            let analytic = buf.get(id).map_or(0.0, |g| g[[row, col]]);
            let orig = model.store.value(id)[[row, col]];
            model.store.value_mut(id)[[row, col]] = orig + FD_STEP;
            let up = example_loss(&model, &ex, None, &weights, None).unwrap();
            model.store.value_mut(id)[[row, col]] = orig - FD_STEP;
            let down = example_loss(&model, &ex, None, &weights, None).unwrap();
            model.store.value_mut(id)[[row, col]] = orig;
            report.push(analytic, (up - down) / (2.0 * FD_STEP));
        }
    }
    report
}

pub fn frames_for(samples: &[Sample]) -> FrameIndex {
    FrameIndex::from_records(extract_corpus(samples, &fixture_backend()).unwrap().0)
}

pub fn frame(sentence: usize, predicate: (usize, usize), args: &[(usize, usize)]) -> SemanticFrame {
    SemanticFrame {
        predicate: Span::new(predicate.0, predicate.1),
        predicate_role: PREDICATE_ROLE.into(),
        arguments: args
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| Argument {
                role: format!("ARG{i}"),
                span: Span::new(a, b),
            })
            .collect(),
        sentence_index: sentence,
        source: FrameSource::Document,
    }
}

/// Random frame within a sentence of at most 8 words.
pub fn random_frame(r: &mut ChaCha8Rng, sentences: usize) -> SemanticFrame {
    let p = r.random_range(2..5);
    let a0 = r.random_range(0..p);
    let a1 = r.random_range(p + 1..8);
    frame(
        r.random_range(0..sentences),
        (p, p + 1),
        &[(a0, p), (p + 1, a1)],
    )
}

/// Identity query/key/value/output projections, so that attention scores are
/// plain scaled dot products of the inputs.
pub fn identity_attention(dim: usize, heads: usize) -> (MultiHeadCrossAttention, ParamStore) {
    let mut store = ParamStore::new();
    let mha =
        MultiHeadCrossAttention::new(&mut store, "att", dim, heads, false, &mut rng(0)).unwrap();
    for lin in [mha.query, mha.key, mha.value, mha.output] {
        *store.value_mut(lin.weight) = Array2::eye(dim);
        store.value_mut(lin.bias).fill(0.0);
    }
    (mha, store)
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome {
    pub value: f64,
    pub seconds: f64,
}

fn toy_config(ctx: DocContext, train_adapters: bool) -> ModelConfig {
    let mut cfg = ModelConfig::toy(32, 4);
    cfg.doc_context = ctx;
    cfg.encoder.train_adapters = train_adapters;
    cfg
}

/// Trains on the 32-sample set and returns macro-F1 on that same set.
pub fn overfit(epochs: usize) -> Outcome {
    let start = std::time::Instant::now();
    let samples = overfit_set(0);
    let frames = frames_for(&samples);
    let model = FactModel::new(toy_config(DocContext::Attention, true), 0).unwrap();
    let set = model.prepare_examples(&samples, &frames).unwrap();
    let cfg = TrainConfig {
        epochs,
        lr: 3e-3,
        batch_size: 8,
        grad_accum: 1,
        ..TrainConfig::default()
    };
    let model = train(model, &set, &set, &cfg).unwrap().model;
    let preds: Vec<LabelVector> = set
        .iter()
        .map(|ex| {
            let p = model.infer(&ex.prepared).unwrap().probs;
            LabelVector::new(p.map(|x| x >= cfg.threshold))
        })
        .collect();
    let golds: Vec<LabelVector> = set.iter().map(|e| e.labels).collect();
    Outcome {
        value: macro_f1(&preds, &golds).unwrap(),
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Best validation BACC on the fact-alignment task for one seed.
pub fn alignment_bacc(ctx: DocContext, seed: u64, epochs: usize) -> f64 {
    let train_s = alignment_task(300, 4, 100 + seed);
    let val_s = alignment_task(200, 4, 200 + seed);
    let all: Vec<Sample> = train_s.iter().chain(&val_s).cloned().collect();
    let frames = frames_for(&all);
    let model = FactModel::new(toy_config(ctx, false), seed).unwrap();
    let tr = model.prepare_examples(&train_s, &frames).unwrap();
    let va = model.prepare_examples(&val_s, &frames).unwrap();
    let cfg = TrainConfig {
        epochs,
        lr: 3e-3,
        batch_size: 8,
        grad_accum: 1,
        seed,
        ..TrainConfig::default()
    };
    train(model, &tr, &va, &cfg).unwrap().best_val_bacc
}

pub fn evidence_set(
    n: usize,
    section_facts: usize,
    claim_facts: usize,
    seed: u64,
) -> (Vec<finefact::evaluation::EvidenceRecord>, HighlightEvalSet) {
    let records = evidence_corpus(n, section_facts, claim_facts, seed);
    let set = build_highlight_eval_set(&records, &fixture_backend()).unwrap();
    (records, set)
}

/// Attention forced onto the gold frames: keys for gold frames point along
/// the query direction, everything else is orthogonal.
pub fn forced_attention_recall(set: &HighlightEvalSet, k: usize) -> Vec<f64> {
    let backend = fixture_backend();
    let dim = 8;
    let (mha, store) = identity_attention(dim, 2);
    set.items
        .iter()
        .map(|item| {
            let text = finefact::text::TokenizedText::new(&item.document);
            let frames = finefact::srl::extract_frames(&text, FrameSource::Document, &backend)
                .unwrap()
                .frames;
            let f_doc = Array2::from_shape_fn((frames.len(), dim), |(i, j)| {
                let gold = item.gold.contains(&frames[i]);
                match (gold, j) {
                    (true, 0) | (true, 4) => 20.0,
                    (false, 1) | (false, 5) => 20.0,
                    _ => 0.0,
                }
            });
            let f_sum =
                Array2::from_shape_fn((2, dim), |(_, j)| if j == 0 || j == 4 { 1.0 } else { 0.0 });
            let (_, map) = attend(&f_sum, &f_doc, &mha, &store).unwrap();
            let scores = importance(&map).scores;
            let top = top_k_highlights(&scores, &frames, k).unwrap();
            recall_at_k(&top, &item.gold, k, Matcher::Exact).unwrap()
        })
        .collect()
}

pub fn classify(
    f_sum: &Matrix,
    context: &Matrix,
    head: &ClassifierHead,
    store: &ParamStore,
) -> [f64; 4] {
    let (f_bar, c_bar) = fuse(f_sum, context).unwrap();
    predict(&f_bar, &c_bar, head, store).unwrap()
}

/// Checkpoint bytes, test predictions and the manifests of both split kinds.
pub type RunArtifacts = (
    Vec<u8>,
    Vec<finefact::evaluation::Prediction>,
    Vec<finefact::data::SplitManifest>,
);

/// One short seeded training run.
pub fn determinism_run() -> RunArtifacts {
    use finefact::data::{make_challenging_split, make_random_split, SplitSizes};
    let corpus = alignment_task(60, 3, 8);
    let random = make_random_split(
        &corpus,
        SplitSizes {
            train: 40,
            validation: 10,
            test: 10,
        },
        4,
    )
    .unwrap();
    let hard = make_challenging_split(&corpus, "bart", 10, 4).unwrap();
    let frames = frames_for(&corpus);
    let model = FactModel::new(toy_config(DocContext::Attention, true), 9).unwrap();
    let tr = model.prepare_examples(&random.train, &frames).unwrap();
    let va = model.prepare_examples(&random.validation, &frames).unwrap();
    let te = model.prepare_examples(&random.test, &frames).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        lr: 1e-3,
        batch_size: 4,
        grad_accum: 2,
        seed: 9,
        ..TrainConfig::default()
    };
    let model = train(model, &tr, &va, &cfg).unwrap().model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    finefact::checkpoint::save_model(
        &path,
        &model,
        &finefact::checkpoint::CheckpointMeta::new(model.config.clone(), 9),
    )
    .unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let (restored, _) = finefact::checkpoint::load_model(&path).unwrap();
    let preds = finefact::evaluation::predict_examples(&restored, &te, 0.5).unwrap();
    (bytes, preds, vec![random.manifest, hard.manifest])
}

pub fn determinism_runs() -> (RunArtifacts, RunArtifacts) {
    (determinism_run(), determinism_run())
}
