mod common;

use common::*;
use finefact::attention::{
    attend, importance, rank_top_k, top_k_highlights, MultiHeadCrossAttention,
};
use finefact::autodiff::{Activation, Graph, Matrix};
use finefact::classifier::ClassifierHead;
use finefact::encoder::{fuse_layers, pool_fact, AttentivePooler};
use finefact::evaluation::{recall_at_k, Matcher};
use finefact::params::ParamStore;
use finefact::training::{weighted_bce, ClassWeights};
use finefact::LabelVector;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    m.select(Axis(0), perm)
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}

fn setup(seed: u64, heads: usize) -> (MultiHeadCrossAttention, ClassifierHead, ParamStore) {
    let mut store = ParamStore::new();
    let mut r = rng(seed);
    let mha = MultiHeadCrossAttention::new(&mut store, "att", 8, heads, true, &mut r).unwrap();
    let head = ClassifierHead::new(&mut store, "classifier", 8, &mut r);
    (mha, head, store)
}

fn heads() -> impl Strategy<Value = usize> {
    prop_oneof![Just(1usize), Just(2), Just(4), Just(8)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_are_distributions(seed in any::<u64>(), n_s in 1usize..6, n_d in 1usize..10, h in heads()) {
        let (mha, _, store) = setup(seed, h);
        let mut r = rng(seed ^ 1);
        let (_, map) = attend(&random_matrix(&mut r, n_s, 8), &random_matrix(&mut r, n_d, 8), &mha, &store).unwrap();
        prop_assert_eq!(map.num_heads(), h);
        for m in &map.heads {
            prop_assert_eq!(m.dim(), (n_s, n_d));
            for row in m.rows() {
                prop_assert!(row.iter().all(|&a| a >= 0.0));
                prop_assert!((row.sum() - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn importance_sums_to_queries_times_heads(seed in any::<u64>(), n_s in 1usize..6, n_d in 1usize..10, h in heads()) {
        let (mha, _, store) = setup(seed, h);
        let mut r = rng(seed ^ 2);
        let (_, map) = attend(&random_matrix(&mut r, n_s, 8), &random_matrix(&mut r, n_d, 8), &mha, &store).unwrap();
        let imp = importance(&map);
        prop_assert_eq!(imp.scores.len(), n_d);
        prop_assert!((imp.total() - (n_s * h) as f64).abs() <= 1e-4);
    }

    #[test]
    fn pooled_fact_lies_in_the_hull_of_token_values(seed in any::<u64>(), m in 1usize..12) {
        let mut store = ParamStore::new();
        let mut r = rng(seed);
        let pooler = AttentivePooler::new(&mut store, "pooler", 8, 16, Activation::Gelu, &mut r);
        let tokens = random_matrix(&mut r, m, 8);
        let fact = pool_fact(&tokens, &pooler, &store).unwrap();
        prop_assert!((fact.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(fact.weights.iter().all(|&w| w >= 0.0));

        let mut g = Graph::new();
        let t = g.constant(tokens);
        let phi = pooler.value_net(&mut g, &store, t);
        let phi = g.value(phi);
        for (j, &v) in fact.vector.iter().enumerate() {
            let col = phi.column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn context_lies_in_the_hull_of_document_facts(seed in any::<u64>(), n_s in 1usize..5, n_d in 1usize..8, h in heads()) {
        let (mha, store) = identity_attention(8, h);
        let mut r = rng(seed);
        let f_doc = random_matrix(&mut r, n_d, 8);
        let (context, _) = attend(&random_matrix(&mut r, n_s, 8), &f_doc, &mha, &store).unwrap();
        for row in context.rows() {
            for (j, &v) in row.iter().enumerate() {
                let col = f_doc.column(j);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn document_fact_order_does_not_change_context_or_highlights(seed in any::<u64>(), n_s in 1usize..5, n_d in 2usize..9, h in heads(), k in 1usize..6) {
        let (mha, _, store) = setup(seed, h);
        let mut r = rng(seed ^ 3);
        let f_sum = random_matrix(&mut r, n_s, 8);
        let f_doc = random_matrix(&mut r, n_d, 8);
        let frames: Vec<_> = (0..n_d).map(|i| frame(i, (1, 2), &[(0, 1)])).collect();
        let perm = shuffled(n_d, seed);
        let permuted_frames: Vec<_> = perm.iter().map(|&i| frames[i].clone()).collect();

        let (c1, m1) = attend(&f_sum, &f_doc, &mha, &store).unwrap();
        let (c2, m2) = attend(&f_sum, &permute_rows(&f_doc, &perm), &mha, &store).unwrap();
        prop_assert!((&c1 - &c2).iter().all(|d| d.abs() <= 1e-9));

        let s1 = importance(&m1).scores;
        let s2 = importance(&m2).scores;
        for (new, &old) in perm.iter().enumerate() {
            prop_assert!((s2[new] - s1[old]).abs() <= 1e-9);
        }
        let top1 = top_k_highlights(&s1, &frames, k).unwrap();
        let top2 = top_k_highlights(&s2, &permuted_frames, k).unwrap();
        let f1: Vec<_> = top1.highlights.iter().map(|x| x.frame.clone()).collect();
        let f2: Vec<_> = top2.highlights.iter().map(|x| x.frame.clone()).collect();
        prop_assert_eq!(f1, f2);
    }

    #[test]
    fn summary_fact_order_does_not_change_predictions(seed in any::<u64>(), n_s in 2usize..6, n_d in 1usize..8, h in heads()) {
        let (mha, head, store) = setup(seed, h);
        let mut r = rng(seed ^ 4);
        let f_sum = random_matrix(&mut r, n_s, 8);
        let f_doc = random_matrix(&mut r, n_d, 8);
        let perm = shuffled(n_s, seed);
        let (c1, _) = attend(&f_sum, &f_doc, &mha, &store).unwrap();
        let f_sum2 = permute_rows(&f_sum, &perm);
        let (c2, _) = attend(&f_sum2, &f_doc, &mha, &store).unwrap();
        prop_assert!((&permute_rows(&c1, &perm) - &c2).iter().all(|d| d.abs() <= 1e-9));
        let p1 = classify(&f_sum, &c1, &head, &store);
        let p2 = classify(&f_sum2, &c2, &head, &store);
        for i in 0..4 {
            prop_assert!((p1[i] - p2[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn recall_is_monotone_in_k(seed in any::<u64>(), n in 1usize..12, g in 1usize..5) {
        let mut r = rng(seed);
        let frames: Vec<_> = (0..n).map(|_| random_frame(&mut r, 3)).collect();
        let gold: Vec<_> = (0..g).map(|_| random_frame(&mut r, 3)).collect();
        let scores: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, 0.0..1.0)).collect();
        let ranked = top_k_highlights(&scores, &frames, n).unwrap();
        for matcher in [Matcher::Exact, Matcher::Overlap] {
            let mut last = 0.0;
            for k in 1..=n + 2 {
                let rec = recall_at_k(&ranked, &gold, k, matcher).unwrap();
                prop_assert!((0.0..=1.0).contains(&rec));
                prop_assert!(rec >= last);
                last = rec;
            }
        }
    }

    #[test]
    fn top_k_is_sorted_and_clamped(scores in prop::collection::vec(0u8..4, 1..12), k in 1usize..15) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let idx = rank_top_k(&scores, k);
        prop_assert_eq!(idx.len(), k.min(scores.len()));
        for w in idx.windows(2) {
            prop_assert!(scores[w[0]] > scores[w[1]] || (scores[w[0]] == scores[w[1]] && w[0] < w[1]));
        }
        if let Some(&last) = idx.last() {
            for i in (0..scores.len()).filter(|i| !idx.contains(i)) {
                prop_assert!(scores[i] < scores[last] || (scores[i] == scores[last] && i > last));
            }
        }
    }

    #[test]
    fn fused_layers_are_the_elementwise_maximum(seed in any::<u64>(), layers in 1usize..5, rows in 1usize..6) {
        let mut r = rng(seed);
        let ls: Vec<Matrix> = (0..layers).map(|_| random_matrix(&mut r, rows, 8)).collect();
        let fused = fuse_layers(&ls).unwrap();
        for ((i, j), &v) in fused.indexed_iter() {
            prop_assert!(ls.iter().all(|l| l[[i, j]] <= v));
            prop_assert!(ls.iter().any(|l| l[[i, j]] == v));
        }
    }

    #[test]
    fn weighted_bce_is_nonnegative_and_zero_only_when_certain(p in prop::array::uniform4(0.0f64..=1.0), mask in 0u8..16) {
        let gold = LabelVector::from_mask(mask);
        let w = ClassWeights { beta: [0.5, 1.0, 2.0, 3.0] };
        let loss = weighted_bce(&p, &gold, &w);
        prop_assert!(loss.is_finite() && loss >= 0.0);
        let perfect = gold.as_f64();
        prop_assert!(weighted_bce(&perfect, &gold, &w) < 1e-5);
    }
}

#[test]
fn uniform_scores_rank_in_document_order() {
    assert_eq!(rank_top_k(&[0.5; 6], 4), vec![0, 1, 2, 3]);
}

#[test]
fn identical_document_facts_share_attention_equally() {
    let (mha, _, store) = setup(3, 2);
    let f_doc = Array2::from_shape_fn((4, 8), |(_, j)| j as f64 / 8.0);
    let (_, map) = attend(&random_matrix(&mut rng(1), 2, 8), &f_doc, &mha, &store).unwrap();
    for m in &map.heads {
        assert!(m.iter().all(|&a| (a - 0.25).abs() < 1e-12));
    }
}
