use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ErrorType, LabelVector, SystemCategory, NUM_ERROR_TYPES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.positives())
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Mean of the true-positive and true-negative rates. A rate with no
    /// support counts as 0.
    pub fn balanced_accuracy(&self) -> f64 {
        (ratio(self.tp, self.positives()) + ratio(self.tn, self.negatives())) / 2.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_aligned(preds: &[LabelVector], golds: &[LabelVector]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    if preds.len() != golds.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    Ok(())
}

pub fn confusion(
    preds: &[LabelVector],
    golds: &[LabelVector],
    class: ErrorType,
) -> Result<Confusion> {
    check_aligned(preds, golds)?;
    let mut c = Confusion::default();
    for (p, g) in preds.iter().zip(golds) {
        match (p.get(class), g.get(class)) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn log_zero_support(c: &Confusion, class: ErrorType) {
    if c.positives() == 0 {
        log::info!(
            "{}: no gold positives, true-positive rate taken as 0",
            class.short_name()
        );
    }
    if c.negatives() == 0 {
        log::info!(
            "{}: no gold negatives, true-negative rate taken as 0",
            class.short_name()
        );
    }
}

pub fn balanced_accuracy(
    preds: &[LabelVector],
    golds: &[LabelVector],
    class: ErrorType,
) -> Result<f64> {
    let c = confusion(preds, golds, class)?;
    log_zero_support(&c, class);
    Ok(c.balanced_accuracy())
}

pub fn f1_score(preds: &[LabelVector], golds: &[LabelVector], class: ErrorType) -> Result<f64> {
    Ok(confusion(preds, golds, class)?.f1())
}

pub fn macro_f1(preds: &[LabelVector], golds: &[LabelVector]) -> Result<f64> {
    Ok(Scores::compute(preds, golds)?.macro_f1)
}

pub fn macro_balanced_accuracy(preds: &[LabelVector], golds: &[LabelVector]) -> Result<f64> {
    Ok(Scores::compute(preds, golds)?.macro_bacc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub bacc: f64,
}

/// Per-class and macro-averaged scores over one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub samples: usize,
    pub per_class: BTreeMap<String, ClassScores>,
    pub macro_f1: f64,
    pub macro_bacc: f64,
}

impl Scores {
    pub fn compute(preds: &[LabelVector], golds: &[LabelVector]) -> Result<Self> {
        check_aligned(preds, golds)?;
        let mut per_class = BTreeMap::new();
        let (mut f1, mut bacc) = (0.0, 0.0);
        for ty in ErrorType::ALL {
            let c = confusion(preds, golds, ty)?;
            log_zero_support(&c, ty);
            let s = ClassScores {
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
                bacc: c.balanced_accuracy(),
            };
            f1 += s.f1;
            bacc += s.bacc;
            per_class.insert(ty.key().to_string(), s);
        }
        Ok(Self {
            samples: preds.len(),
            per_class,
            macro_f1: f1 / NUM_ERROR_TYPES as f64,
            macro_bacc: bacc / NUM_ERROR_TYPES as f64,
        })
    }

    /// Element-wise mean of several score sets over the same population.
    pub fn mean(all: &[Scores]) -> Result<Self> {
        let first = all
            .first()
            .ok_or_else(|| Error::Empty("no scores to average".into()))?;
        let n = all.len() as f64;
        let avg = |f: &dyn Fn(&Scores) -> f64| all.iter().map(f).sum::<f64>() / n;
        let mut per_class = BTreeMap::new();
        for key in first.per_class.keys() {
            let get = |s: &Scores| s.per_class.get(key).copied();
            if all.iter().any(|s| get(s).is_none()) {
                return Err(Error::Shape(format!("class {key} missing from a report")));
            }
            per_class.insert(
                key.clone(),
                ClassScores {
                    precision: avg(&|s| get(s).unwrap().precision),
                    recall: avg(&|s| get(s).unwrap().recall),
                    f1: avg(&|s| get(s).unwrap().f1),
                    bacc: avg(&|s| get(s).unwrap().bacc),
                },
            );
        }
        Ok(Self {
            samples: first.samples,
            per_class,
            macro_f1: avg(&|s| s.macro_f1),
            macro_bacc: avg(&|s| s.macro_bacc),
        })
    }
}

pub const ALL_CATEGORY: &str = "All";

/// Scores per system category plus the whole population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub categories: BTreeMap<String, Scores>,
    pub notes: Vec<String>,
    pub seeds: Vec<u64>,
    pub checkpoint: Option<String>,
}

fn category_order() -> Vec<String> {
    SystemCategory::KNOWN
        .iter()
        .map(|c| c.as_str().to_string())
        .chain(std::iter::once(ALL_CATEGORY.to_string()))
        .collect()
}

impl MetricReport {
    /// Groups aligned predictions by category. Categories without samples
    /// are omitted with a note; samples of unknown category count in "All" only.
    pub fn compute(
        preds: &[LabelVector],
        golds: &[LabelVector],
        categories: &[SystemCategory],
    ) -> Result<Self> {
        check_aligned(preds, golds)?;
        if categories.len() != preds.len() {
            return Err(Error::Shape(format!(
                "{} categories for {} predictions",
                categories.len(),
                preds.len()
            )));
        }
        let mut out = BTreeMap::new();
        let mut notes = Vec::new();
        for cat in SystemCategory::KNOWN {
            let idx: Vec<usize> = (0..preds.len()).filter(|&i| categories[i] == cat).collect();
            if idx.is_empty() {
                notes.push(format!("{}: no samples, omitted", cat.as_str()));
                continue;
            }
            let p: Vec<_> = idx.iter().map(|&i| preds[i]).collect();
            let g: Vec<_> = idx.iter().map(|&i| golds[i]).collect();
            out.insert(cat.as_str().to_string(), Scores::compute(&p, &g)?);
        }
        out.insert(ALL_CATEGORY.to_string(), Scores::compute(preds, golds)?);
        Ok(Self {
            categories: out,
            notes,
            seeds: Vec::new(),
            checkpoint: None,
        })
    }

    pub fn all(&self) -> &Scores {
        &self.categories[ALL_CATEGORY]
    }

    /// Averages reports from several runs; a category is kept when every run has it.
    pub fn mean(reports: &[MetricReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Empty("no reports to average".into()))?;
        let mut categories = BTreeMap::new();
        let mut notes = first.notes.clone();
        for key in first.categories.keys() {
            let runs: Option<Vec<Scores>> = reports
                .iter()
                .map(|r| r.categories.get(key).cloned())
                .collect();
            match runs {
                Some(runs) => {
                    categories.insert(key.clone(), Scores::mean(&runs)?);
                }
                None => notes.push(format!("{key}: missing from some runs, omitted")),
            }
        }
        Ok(Self {
            categories,
            notes,
            seeds: reports
                .iter()
                .flat_map(|r| r.seeds.iter().copied())
                .collect(),
            checkpoint: None,
        })
    }

    /// Aligned text table: one row per category with macro F1 and BACC in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10}{:>8}{:>8}{:>8}", "Category", "N", "F1", "BACC");
        for key in category_order() {
            if let Some(s) = self.categories.get(&key) {
                let _ = writeln!(
                    out,
                    "{:<10}{:>8}{:>8.2}{:>8.2}",
                    key,
                    s.samples,
                    100.0 * s.macro_f1,
                    100.0 * s.macro_bacc
                );
            }
        }
        if let Some(all) = self.categories.get(ALL_CATEGORY) {
            out.push('\n');
            let _ = writeln!(
                out,
                "{:<10}{:>8}{:>8}{:>8}{:>8}",
                "Type", "P", "R", "F1", "BACC"
            );
            for ty in ErrorType::ALL {
                if let Some(c) = all.per_class.get(ty.key()) {
                    let _ = writeln!(
                        out,
                        "{:<10}{:>8.2}{:>8.2}{:>8.2}{:>8.2}",
                        ty.short_name(),
                        100.0 * c.precision,
                        100.0 * c.recall,
                        100.0 * c.f1,
                        100.0 * c.bacc
                    );
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
