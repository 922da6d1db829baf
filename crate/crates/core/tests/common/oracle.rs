//! Brute-force reference implementations of the evaluation metrics.

use finefact::attention::top_k_highlights;
use finefact::evaluation::{
    balanced_accuracy, f1_score, macro_balanced_accuracy, macro_f1, recall_at_k, Matcher,
    MetricReport, ALL_CATEGORY,
};
use finefact::types::SystemCategory;
use finefact::{ErrorType, LabelVector, SemanticFrame};
use rand::Rng;

use super::{random_frame, rng};

pub const FIXTURES: u64 = 100;

pub struct Fixture {
    pub preds: Vec<LabelVector>,
    pub golds: Vec<LabelVector>,
}

/// Fixtures range from tiny to moderate, and some have classes without
/// positives or negatives.
pub fn fixture(seed: u64) -> Fixture {
    let mut r = rng(seed);
    let n = r.random_range(1..40);
    let skew = r.random_range(0..4);
    let draw = |r: &mut rand_chacha::ChaCha8Rng| -> LabelVector {
        let mut m = r.random_range(0..16u8);
        if skew == 0 {
            m &= 0b0011;
        }
        LabelVector::from_mask(m)
    };
    Fixture {
        preds: (0..n).map(|_| draw(&mut r)).collect(),
        golds: (0..n).map(|_| draw(&mut r)).collect(),
    }
}

fn counts(f: &Fixture, c: usize) -> [f64; 4] {
    let mut t = [0.0; 4];
    for (p, g) in f.preds.iter().zip(&f.golds) {
        let slot = match (p.bits()[c], g.bits()[c]) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        t[slot] += 1.0;
    }
    t
}

fn div0(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn f1(f: &Fixture, c: usize) -> f64 {
    let [tp, fp, _, fn_] = counts(f, c);
    let p = div0(tp, tp + fp);
    let r = div0(tp, tp + fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn bacc(f: &Fixture, c: usize) -> f64 {
    let [tp, fp, tn, fn_] = counts(f, c);
    (div0(tp, tp + fn_) + div0(tn, tn + fp)) / 2.0
}

pub fn macro_avg(f: &Fixture, per: fn(&Fixture, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for c in 0..4 {
        s += per(f, c);
    }
    s / 4.0
}

fn check(bad: &mut Vec<String>, what: String, got: f64, want: f64) {
    if got != want {
        bad.push(format!("{what}: got {got}, brute force {want}"));
    }
}

pub fn classification_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for seed in 0..FIXTURES {
        let f = fixture(seed);
        for ty in ErrorType::ALL {
            let c = ty.index();
            check(
                &mut bad,
                format!("seed {seed} F1 {ty}"),
                f1_score(&f.preds, &f.golds, ty).unwrap(),
                f1(&f, c),
            );
            check(
                &mut bad,
                format!("seed {seed} BACC {ty}"),
                balanced_accuracy(&f.preds, &f.golds, ty).unwrap(),
                bacc(&f, c),
            );
        }
        check(
            &mut bad,
            format!("seed {seed} macro F1"),
            macro_f1(&f.preds, &f.golds).unwrap(),
            macro_avg(&f, f1),
        );
        check(
            &mut bad,
            format!("seed {seed} macro BACC"),
            macro_balanced_accuracy(&f.preds, &f.golds).unwrap(),
            macro_avg(&f, bacc),
        );
    }
    bad
}

pub fn category_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for seed in 0..FIXTURES {
        let f = fixture(seed);
        let mut r = rng(seed + 1000);
        let cats: Vec<SystemCategory> = (0..f.preds.len())
            .map(|_| SystemCategory::KNOWN[r.random_range(0..SystemCategory::KNOWN.len())])
            .collect();
        let report = MetricReport::compute(&f.preds, &f.golds, &cats).unwrap();
        for cat in SystemCategory::KNOWN {
            let idx: Vec<usize> = (0..cats.len()).filter(|&i| cats[i] == cat).collect();
            let row = report.categories.get(cat.as_str());
            match (idx.is_empty(), row) {
                (true, None) => continue,
                (true, Some(_)) => {
                    bad.push(format!("seed {seed}: empty category {cat} reported"));
                    continue;
                }
                (false, None) => {
                    bad.push(format!("seed {seed}: category {cat} missing"));
                    continue;
                }
                (false, Some(row)) => {
                    let sub = Fixture {
                        preds: idx.iter().map(|&i| f.preds[i]).collect(),
                        golds: idx.iter().map(|&i| f.golds[i]).collect(),
                    };
                    check(
                        &mut bad,
                        format!("seed {seed} {cat} N"),
                        row.samples as f64,
                        idx.len() as f64,
                    );
                    check(
                        &mut bad,
                        format!("seed {seed} {cat} F1"),
                        row.macro_f1,
                        macro_avg(&sub, f1),
                    );
                    check(
                        &mut bad,
                        format!("seed {seed} {cat} BACC"),
                        row.macro_bacc,
                        macro_avg(&sub, bacc),
                    );
                }
            }
        }
        let all = &report.categories[ALL_CATEGORY];
        check(
            &mut bad,
            format!("seed {seed} All F1"),
            all.macro_f1,
            macro_avg(&f, f1),
        );
        check(
            &mut bad,
            format!("seed {seed} All BACC"),
            all.macro_bacc,
            macro_avg(&f, bacc),
        );
    }
    bad
}

fn words(f: &SemanticFrame) -> Vec<usize> {
    let mut w = Vec::new();
    let spans = std::iter::once(f.predicate).chain(f.arguments.iter().map(|a| a.span));
    for s in spans {
        for i in s.start..s.end {
            if !w.contains(&i) {
                w.push(i);
            }
        }
    }
    w
}

pub fn frames_match(a: &SemanticFrame, b: &SemanticFrame, matcher: Matcher) -> bool {
    if a.sentence_index != b.sentence_index {
        return false;
    }
    match matcher {
        Matcher::Exact => {
            let mut x: Vec<_> = a
                .arguments
                .iter()
                .map(|g| (g.span.start, g.span.end))
                .collect();
            let mut y: Vec<_> = b
                .arguments
                .iter()
                .map(|g| (g.span.start, g.span.end))
                .collect();
            x.sort();
            y.sort();
            a.predicate == b.predicate && x == y
        }
        Matcher::Overlap => {
            let (wa, wb) = (words(a), words(b));
            let common = wa.iter().filter(|w| wb.contains(w)).count() as f64;
            2.0 * common / (wa.len() + wb.len()) as f64 >= 0.5
        }
    }
}

/// Selection sort on the score, earliest index first among equals.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut taken = vec![false; scores.len()];
    let mut out = Vec::new();
    while out.len() < k.min(scores.len()) {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if !taken[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out
}

pub fn recall_mismatches() -> Vec<String> {
    let mut bad = Vec::new();
    for seed in 0..FIXTURES {
        let mut r = rng(seed);
        let n = r.random_range(1..10);
        let frames: Vec<_> = (0..n).map(|_| random_frame(&mut r, 3)).collect();
        let mut gold: Vec<_> = (0..r.random_range(1..4))
            .map(|_| random_frame(&mut r, 3))
            .collect();
        if r.random_bool(0.5) {
            gold.push(frames[r.random_range(0..n)].clone());
        }
        // Coarse scores so that ties are common.
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..4) as f64 / 4.0).collect();
        for k in 1..=n + 1 {
            let top = top_k_highlights(&scores, &frames, k).unwrap();
            let picked = top_k(&scores, k);
            if top.frame_indices() != picked {
                bad.push(format!(
                    "seed {seed} k {k}: ranking {:?} vs {:?}",
                    top.frame_indices(),
                    picked
                ));
            }
            for matcher in [Matcher::Exact, Matcher::Overlap] {
                let hits = gold
                    .iter()
                    .filter(|g| picked.iter().any(|&i| frames_match(&frames[i], g, matcher)))
                    .count();
                let want = hits as f64 / gold.len() as f64;
                let got = recall_at_k(&top, &gold, k, matcher).unwrap();
                check(
                    &mut bad,
                    format!("seed {seed} k {k} {matcher:?} recall"),
                    got,
                    want,
                );
            }
        }
    }
    bad
}
