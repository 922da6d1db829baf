//! Class-weighted binary cross-entropy and the epoch loop with gradient
//! accumulation and best-BACC checkpoint selection.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Matrix};
use crate::error::{Error, Result};
use crate::evaluation::{predict_examples, Scores};
use crate::model::{Example, FactModel, ModelConfig};
use crate::params::{Adam, GradBuffer, ParamStore};
use crate::types::{ErrorType, LabelVector, NUM_ERROR_TYPES};

/// Probabilities are kept this far from 0 and 1 inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

/// Direction of the per-type positive weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `positives / negatives`.
    #[default]
    Ratio,
    /// `negatives / positives`.
    Inverse,
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio" => Ok(WeightMode::Ratio),
            "inverse" => Ok(WeightMode::Inverse),
            other => Err(Error::Config(format!("unknown weight mode {other:?}"))),
        }
    }
}

/// Positive-sample loss weight per error type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub beta: [f64; NUM_ERROR_TYPES],
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights {
        beta: [1.0; NUM_ERROR_TYPES],
    };
}

/// Weights from training label counts. A type with no positives or no
/// negatives gets weight 1.
pub fn compute_class_weights(labels: &[LabelVector], mode: WeightMode) -> ClassWeights {
    let mut beta = [1.0; NUM_ERROR_TYPES];
    for ty in ErrorType::ALL {
        let pos = labels.iter().filter(|l| l.get(ty)).count();
        let neg = labels.len() - pos;
        if pos == 0 || neg == 0 {
            log::warn!(
                "{}: {pos} positives and {neg} negatives in training data, weight set to 1",
                ty.short_name()
            );
            continue;
        }
        beta[ty.index()] = match mode {
            WeightMode::Ratio => pos as f64 / neg as f64,
            WeightMode::Inverse => neg as f64 / pos as f64,
        };
    }
    ClassWeights { beta }
}

/// `-Σ_i [β_i y_i log p_i + (1 - y_i) log(1 - p_i)]` with clamped `p`.
pub fn weighted_bce(p: &[f64; NUM_ERROR_TYPES], gold: &LabelVector, weights: &ClassWeights) -> f64 {
    let y = gold.as_f64();
    let mut loss = 0.0;
    for i in 0..NUM_ERROR_TYPES {
        let q = p[i].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= weights.beta[i] * y[i] * q.ln() + (1.0 - y[i]) * (1.0 - q).ln();
    }
    loss
}

/// Gradient of [`weighted_bce`] with respect to `p` (zero where clamped).
pub fn weighted_bce_grad(
    p: &[f64; NUM_ERROR_TYPES],
    gold: &LabelVector,
    weights: &ClassWeights,
) -> [f64; NUM_ERROR_TYPES] {
    let y = gold.as_f64();
    let mut g = [0.0; NUM_ERROR_TYPES];
    for i in 0..NUM_ERROR_TYPES {
        if p[i] < PROB_CLAMP || p[i] > 1.0 - PROB_CLAMP {
            continue;
        }
        g[i] = -weights.beta[i] * y[i] / p[i] + (1.0 - y[i]) / (1.0 - p[i]);
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub grad_accum: usize,
    pub seed: u64,
    pub threshold: f64,
    pub top_k: usize,
    pub weight_mode: WeightMode,
    /// Append-only JSONL log of per-epoch metrics.
    pub log_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            lr: 1e-5,
            batch_size: 12,
            grad_accum: 2,
            seed: 0,
            threshold: 0.5,
            top_k: 5,
            weight_mode: WeightMode::Ratio,
            log_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.grad_accum == 0 || self.top_k == 0 {
            return Err(Error::Config(
                "batch size, accumulation steps and top-k must be positive".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} is not a finite non-negative number",
                self.lr
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
    pub val_bacc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The model restored to its best validation epoch.
    pub model: FactModel,
    pub best_epoch: usize,
    pub best_val_bacc: f64,
    pub best_val_f1: f64,
    pub weights: ClassWeights,
    pub log: Vec<EpochLog>,
}

fn validation_scores(model: &FactModel, val: &[Example], threshold: f64) -> Result<Scores> {
    let preds = predict_examples(model, val, threshold)?;
    let p: Vec<_> = preds.iter().map(|p| p.labels).collect();
    let g: Vec<_> = val.iter().map(|e| e.labels).collect();
    Scores::compute(&p, &g)
}

/// Loss of one example and its parameter gradients, accumulated into `buf`
/// with weight `scale`.
pub fn example_loss(
    model: &FactModel,
    example: &Example,
    tokens: Option<&Matrix>,
    weights: &ClassWeights,
    buf: Option<(&mut GradBuffer, f64)>,
) -> Result<f64> {
    let mut g = Graph::new();
    let out = model.forward(&mut g, &example.prepared, tokens)?;
    let target = Array2::from_shape_vec((1, NUM_ERROR_TYPES), example.labels.as_f64().to_vec())
        .expect("label row");
    let loss = g.weighted_bce(out.probs, target, &weights.beta, PROB_CLAMP);
    let value = g.scalar(loss);
    if let Some((buf, scale)) = buf {
        if value.is_finite() {
            buf.accumulate(&g.backward(loss), scale);
        }
    }
    Ok(value)
}

struct Log {
    file: Option<std::fs::File>,
    path: Option<PathBuf>,
}

impl Log {
    fn open(path: Option<&PathBuf>) -> Result<Self> {
        let file = match path {
            Some(p) => Some(
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| Error::io(p, e))?,
            ),
            None => None,
        };
        Ok(Self {
            file,
            path: path.cloned(),
        })
    }

    fn write(&mut self, entry: &EpochLog) -> Result<()> {
        log::info!(
            "epoch {}: loss {:.4}, val F1 {:.4}, val BACC {:.4}",
            entry.epoch,
            entry.train_loss,
            entry.val_f1,
            entry.val_bacc
        );
        if let (Some(f), Some(p)) = (self.file.as_mut(), self.path.as_ref()) {
            let line = serde_json::to_string(entry).map_err(|e| Error::parse("training log", e))?;
            writeln!(f, "{line}").map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }
}

/// Trains `model` and returns it at the epoch with the highest validation
/// macro-BACC (the earliest on ties). With zero epochs the initial model is
/// scored once and returned.
pub fn train(
    mut model: FactModel,
    train_set: &[Example],
    val_set: &[Example],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Empty(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let labels: Vec<_> = train_set.iter().map(|e| e.labels).collect();
    let weights = compute_class_weights(&labels, config.weight_mode);
    let mut log = Log::open(config.log_path.as_ref())?;
    let mut history = Vec::new();

    if config.epochs == 0 {
        let s = validation_scores(&model, val_set, config.threshold)?;
        let entry = EpochLog {
            epoch: 0,
            train_loss: f64::NAN,
            val_f1: s.macro_f1,
            val_bacc: s.macro_bacc,
        };
        log.write(&entry)?;
        history.push(entry);
        return Ok(TrainOutcome {
            model,
            best_epoch: 0,
            best_val_bacc: s.macro_bacc,
            best_val_f1: s.macro_f1,
            weights,
            log: history,
        });
    }

    let cache: Option<Vec<Matrix>> = if model.encoder_frozen() {
        Some(
            train_set
                .iter()
                .map(|e| model.token_states(&e.prepared))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.lr);
    let mut buf = GradBuffer::new(&model.store);
    let mut best: Option<(usize, f64, f64, ParamStore)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut pending = 0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let scale = 1.0 / (chunk.len() * config.grad_accum) as f64;
            for &i in chunk {
                let tokens = cache.as_ref().map(|c| &c[i]);
                let loss = example_loss(
                    &model,
                    &train_set[i],
                    tokens,
                    &weights,
                    Some((&mut buf, scale)),
                )?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch });
                }
                total += loss;
            }
            pending += 1;
            if pending == config.grad_accum {
                adam.step(&mut model.store, &buf);
                buf.clear();
                pending = 0;
            }
        }
        if pending > 0 {
            adam.step(&mut model.store, &buf);
            buf.clear();
        }
        if !model.store.all_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(config.batch_size),
            });
        }
        let s = validation_scores(&model, val_set, config.threshold)?;
        let entry = EpochLog {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_f1: s.macro_f1,
            val_bacc: s.macro_bacc,
        };
        log.write(&entry)?;
        history.push(entry);
        if best.as_ref().is_none_or(|b| s.macro_bacc > b.1) {
            best = Some((epoch, s.macro_bacc, s.macro_f1, model.store.clone()));
        }
    }

    let (best_epoch, best_val_bacc, best_val_f1, store) = best.expect("at least one epoch");
    model.store = store;
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_val_bacc,
        best_val_f1,
        weights,
        log: history,
    })
}

/// Mean loss over `examples` without updating anything.
pub fn evaluate_loss(
    model: &FactModel,
    examples: &[Example],
    weights: &ClassWeights,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("no examples".into()));
    }
    let mut total = 0.0;
    for ex in examples {
        total += example_loss(model, ex, None, weights, None)?;
    }
    Ok(total / examples.len() as f64)
}

/// Result of training one model per head count.
#[derive(Debug, Clone)]
pub struct HeadSweep {
    pub heads: usize,
    pub outcome: TrainOutcome,
}

/// Trains one model per head count and returns them all, best validation
/// BACC first (smaller head count first on ties).
pub fn sweep_heads(
    base: &ModelConfig,
    heads: &[usize],
    samples: (&[crate::types::Sample], &[crate::types::Sample]),
    frames: &crate::srl::FrameIndex,
    config: &TrainConfig,
) -> Result<Vec<HeadSweep>> {
    if heads.is_empty() {
        return Err(Error::Config("no head counts to sweep".into()));
    }
    let mut runs = Vec::with_capacity(heads.len());
    for &h in heads {
        let mut cfg = base.clone();
        cfg.heads = h;
        let model = FactModel::new(cfg, config.seed)?;
        let train_set = model.prepare_examples(samples.0, frames)?;
        let val_set = model.prepare_examples(samples.1, frames)?;
        let outcome = train(model, &train_set, &val_set, config)?;
        log::info!("heads {h}: best val BACC {:.4}", outcome.best_val_bacc);
        runs.push(HeadSweep { heads: h, outcome });
    }
    runs.sort_by(|a, b| {
        b.outcome
            .best_val_bacc
            .total_cmp(&a.outcome.best_val_bacc)
            .then(a.heads.cmp(&b.heads))
    });
    Ok(runs)
}
