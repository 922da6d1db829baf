mod common;

use std::collections::HashSet;

use common::*;
use finefact::checkpoint::{load_model, save_model, CheckpointMeta};
use finefact::data::{
    corpus_stats, dedup, make_challenging_split, make_random_split, read_raw_corpus, FieldMap,
    RawFormat, Split, SplitManifest, SplitSizes,
};
use finefact::evaluation::{predict_examples, report_for};
use finefact::synthetic::{alignment_task, SYSTEMS};
use finefact::text::normalize_whitespace;
use finefact::{FactModel, ModelConfig, Sample};
use proptest::prelude::*;
use rand::Rng;

/// A corpus with exact duplicates, whitespace variants and documents shared
/// between systems.
fn messy_corpus(n: usize, seed: u64) -> Vec<Sample> {
    let mut base = alignment_task(n, 2, seed);
    let mut r = rng(seed);
    let mut extra = Vec::new();
    for i in 0..n / 4 {
        let src = &base[r.random_range(0..base.len())];
        let mut s = src.clone();
        s.id = format!("copy-{i}");
        match i % 3 {
            0 => {}
            1 => s.document = s.document.replace(' ', "  "),
            _ => {
                s.summary = format!("{} Again.", s.summary);
                s.system = Some(SYSTEMS[r.random_range(0..SYSTEMS.len())].to_string());
            }
        }
        extra.push(s);
    }
    base.extend(extra);
    base
}

fn ids(v: &[Sample]) -> Vec<String> {
    v.iter().map(|s| s.id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dedup_keeps_first_of_each_pair_and_is_idempotent(seed in any::<u64>(), n in 1usize..60) {
        let corpus = messy_corpus(n, seed);
        let (kept, report) = dedup(corpus.clone());
        prop_assert_eq!(kept.len() + report.removed.len(), corpus.len());
        let keys: HashSet<_> = kept
            .iter()
            .map(|s| (normalize_whitespace(&s.document), normalize_whitespace(&s.summary)))
            .collect();
        prop_assert_eq!(keys.len(), kept.len());
        for s in &kept {
            let first = corpus
                .iter()
                .find(|c| normalize_whitespace(&c.document) == normalize_whitespace(&s.document)
                    && normalize_whitespace(&c.summary) == normalize_whitespace(&s.summary))
                .unwrap();
            prop_assert_eq!(&first.id, &s.id);
        }
        let (again, second) = dedup(kept.clone());
        prop_assert_eq!(again, kept);
        prop_assert!(second.removed.is_empty());
    }

    #[test]
    fn random_split_is_a_disjoint_cover(seed in any::<u64>(), n in 3usize..80, split_seed in any::<u64>()) {
        let (corpus, _) = dedup(messy_corpus(n, seed));
        let total = corpus.len();
        let test = total / 5;
        let validation = total / 10;
        let sizes = SplitSizes { train: total - test - validation, validation, test };
        let split = make_random_split(&corpus, sizes, split_seed).unwrap();
        prop_assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (sizes.train, validation, test));
        let mut all: Vec<String> = split.manifest.train.iter().chain(&split.manifest.validation).chain(&split.manifest.test).cloned().collect();
        all.sort();
        let mut want = ids(&corpus);
        want.sort();
        prop_assert_eq!(all, want);
        prop_assert_eq!(make_random_split(&corpus, sizes, split_seed).unwrap().manifest, split.manifest);
    }

    #[test]
    fn challenging_split_separates_systems_and_documents(seed in any::<u64>(), n in 8usize..80) {
        let (corpus, _) = dedup(messy_corpus(n, seed));
        let Ok(split) = make_challenging_split(&corpus, "BART", 2, seed) else {
            prop_assume!(false);
            unreachable!()
        };
        prop_assert!(split.test.iter().all(|s| s.system.as_deref() == Some("bart")));
        prop_assert!(split.train.iter().chain(&split.validation).all(|s| s.system.as_deref() != Some("bart")));
        let test_docs: HashSet<_> = split.test.iter().map(|s| normalize_whitespace(&s.document)).collect();
        prop_assert!(split.train.iter().all(|s| !test_docs.contains(&normalize_whitespace(&s.document))));
        let covered = split.train.len() + split.validation.len() + split.test.len() + split.manifest.removed_overlap.len();
        prop_assert_eq!(covered, corpus.len());
        prop_assert_eq!(split.validation.len(), 2);
    }

    #[test]
    fn stats_count_every_positive_label(seed in any::<u64>(), n in 0usize..60) {
        let corpus = alignment_task(n, 2, seed);
        let stats = corpus_stats(&corpus);
        prop_assert_eq!(stats.samples, n);
        let by_cat: usize = stats.categories.values().flat_map(|c| c.iter()).sum();
        prop_assert_eq!(by_cat, n);
        let positives: usize = corpus.iter().map(|s| s.labels.error_types().count()).sum();
        let counted: usize = stats.error_types.values().flat_map(|c| c.iter()).sum();
        prop_assert_eq!(counted, positives);
    }
}

#[test]
fn manifest_round_trip_rebuilds_the_split() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = alignment_task(30, 2, 1);
    let split = make_random_split(
        &corpus,
        SplitSizes {
            train: 20,
            validation: 4,
            test: 6,
        },
        3,
    )
    .unwrap();
    let path = dir.path().join("manifest.json");
    split.manifest.write(&path).unwrap();
    let manifest = SplitManifest::read(&path).unwrap();
    let rebuilt = Split::from_manifest(&corpus, &manifest).unwrap();
    assert_eq!(rebuilt.test, split.test);
    assert_eq!(rebuilt.train, split.train);
}

#[test]
fn random_split_rejects_sizes_that_do_not_cover_the_corpus() {
    let corpus = alignment_task(10, 2, 1);
    let err = make_random_split(&corpus, SplitSizes::AGGREFACT, 0)
        .unwrap_err()
        .to_string();
    assert!(err.contains("4489") && err.contains("10"), "{err}");
}

#[test]
fn empty_corpus_has_an_all_zero_table() {
    let stats = corpus_stats(&[]);
    assert_eq!(stats.samples, 0);
    assert!(stats.error_types.values().flatten().all(|&c| c == 0));
}

#[test]
fn raw_csv_and_jsonl_map_to_the_same_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("raw.csv");
    std::fs::write(
        &csv,
        "id,doc,summary,labels,model_type,origin,model_name\n\
         a,The cat sat.,A dog sat.,extrinsic-np,SOTA,xsum,bart\n\
         b,The cat sat.,The cat sat.,correct,OLD,cnndm,pegasus\n\
         c,The cat sat.,The cat ran.,\"intrinsic-predicate,extrinsic-np\",XFORMER,xsum,t5\n",
    )
    .unwrap();
    let jsonl = dir.path().join("raw.jsonl");
    std::fs::write(
        &jsonl,
        r#"{"id":"a","doc":"The cat sat.","summary":"A dog sat.","labels":["extrinsic-np"],"model_type":"SOTA","origin":"xsum","model_name":"bart"}
{"id":"b","doc":"The cat sat.","summary":"The cat sat.","labels":"correct","model_type":"OLD","origin":"cnndm","model_name":"pegasus"}
{"id":"c","doc":"The cat sat.","summary":"The cat ran.","labels":"intrinsic-predicate,extrinsic-np","model_type":"XFORMER","origin":"xsum","model_name":"t5"}
"#,
    )
    .unwrap();
    let map = FieldMap::default();
    let a = read_raw_corpus(&csv, RawFormat::Csv, &map).unwrap();
    let b = read_raw_corpus(&jsonl, RawFormat::Jsonl, &map).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].labels.mask(), 0b0001);
    assert!(a[1].labels.is_no_error());
    assert_eq!(a[2].labels.mask(), 0b1001);
}

#[test]
fn checkpoint_reload_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let samples = alignment_task(12, 3, 2);
    let frames = frames_for(&samples);
    let model = FactModel::new(ModelConfig::toy(16, 2), 5).unwrap();
    let examples = model.prepare_examples(&samples, &frames).unwrap();
    let path = dir.path().join("m.ckpt");
    save_model(&path, &model, &CheckpointMeta::new(model.config.clone(), 5)).unwrap();
    let (restored, meta) = load_model(&path).unwrap();
    assert_eq!(meta.seed, 5);
    let a = predict_examples(&model, &examples, 0.5).unwrap();
    let b = predict_examples(&restored, &examples, 0.5).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        report_for(&a, &examples).unwrap(),
        report_for(&b, &examples).unwrap()
    );
}

#[test]
fn training_twice_with_one_seed_gives_identical_models() {
    let (a, b) = determinism_runs();
    assert_eq!(a, b);
}
