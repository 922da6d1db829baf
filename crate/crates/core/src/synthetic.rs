//! Generated corpora for exercising the detector without licensed data.
//!
//! Every document sentence is one fact, "the farmer sold the horse quickly."
//! The summary restates one document fact without its adverbs, and label
//! bit `i` is set exactly when that matching document fact carries marker
//! adverb `i`. Other document facts carry random markers, so the labels
//! can only be read by aligning the summary fact with its document fact.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evaluation::EvidenceRecord;
use crate::srl::FixtureBackend;
use crate::types::{LabelVector, Origin, Sample, SystemCategory, NUM_ERROR_TYPES};

pub const SUBJECTS: [&str; 10] = [
    "farmer", "teacher", "doctor", "pilot", "baker", "lawyer", "miner", "sailor", "painter",
    "singer",
];
pub const VERBS: [&str; 10] = [
    "sold", "bought", "painted", "found", "lost", "carried", "cleaned", "repaired", "watched",
    "moved",
];
pub const OBJECTS: [&str; 10] = [
    "horse", "car", "house", "boat", "lamp", "chair", "piano", "bridge", "clock", "garden",
];
/// Adverb carrying label bit `i`.
pub const MARKERS: [&str; NUM_ERROR_TYPES] = ["quickly", "secretly", "twice", "badly"];
pub const SYSTEMS: [&str; 4] = ["bart", "pegasus", "t5", "bertsum"];

/// SRL backend whose lexicon covers every generated verb.
pub fn fixture_backend() -> FixtureBackend {
    FixtureBackend::new(VERBS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Fact {
    subject: usize,
    verb: usize,
    object: usize,
}

fn sentence(f: Fact, mask: u8) -> String {
    let mut s = format!(
        "The {} {} the {}",
        SUBJECTS[f.subject], VERBS[f.verb], OBJECTS[f.object]
    );
    for (i, m) in MARKERS.iter().enumerate() {
        if mask & (1 << i) != 0 {
            s.push(' ');
            s.push_str(m);
        }
    }
    s.push('.');
    s
}

/// `n` distinct-in-every-slot facts.
fn distinct_facts<R: Rng>(rng: &mut R, n: usize) -> Vec<Fact> {
    assert!(
        n <= SUBJECTS.len(),
        "at most {} facts per document",
        SUBJECTS.len()
    );
    let pick = |rng: &mut R| {
        let mut idx: Vec<usize> = (0..10).collect();
        idx.shuffle(rng);
        idx
    };
    let (s, v, o) = (pick(rng), pick(rng), pick(rng));
    (0..n)
        .map(|i| Fact {
            subject: s[i],
            verb: v[i],
            object: o[i],
        })
        .collect()
}

/// Samples for the fact-alignment task with `doc_facts` facts per document.
pub fn alignment_task(n: usize, doc_facts: usize, seed: u64) -> Vec<Sample> {
    assert!(doc_facts >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let facts = distinct_facts(&mut rng, doc_facts);
            let masks: Vec<u8> = (0..doc_facts).map(|_| rng.random_range(0..16u8)).collect();
            let target = rng.random_range(0..doc_facts);
            let document: Vec<String> = facts
                .iter()
                .zip(&masks)
                .map(|(&f, &m)| sentence(f, m))
                .collect();
            let mut s = Sample::new(
                format!("syn-{seed}-{i}"),
                document.join(" "),
                sentence(facts[target], 0),
                LabelVector::from_mask(masks[target]),
            );
            s.system_category = *SystemCategory::KNOWN.choose(&mut rng).expect("non-empty");
            s.origin = *Origin::KNOWN.choose(&mut rng).expect("non-empty");
            s.system = Some(SYSTEMS.choose(&mut rng).expect("non-empty").to_string());
            s
        })
        .collect()
}

/// The 32-sample set used to check that training can fit its own data.
pub fn overfit_set(seed: u64) -> Vec<Sample> {
    alignment_task(32, 3, seed)
}

/// Claims restating `claim_facts` sentences of a generated section, with
/// those sentences as evidence.
pub fn evidence_corpus(
    n: usize,
    section_facts: usize,
    claim_facts: usize,
    seed: u64,
) -> Vec<EvidenceRecord> {
    assert!(claim_facts >= 1 && claim_facts <= section_facts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let facts = distinct_facts(&mut rng, section_facts);
            let section: Vec<String> = facts
                .iter()
                .map(|&f| sentence(f, rng.random_range(0..16u8)))
                .collect();
            let mut evidence: Vec<usize> = (0..section_facts).collect();
            evidence.shuffle(&mut rng);
            evidence.truncate(claim_facts);
            evidence.sort_unstable();
            let claim: Vec<String> = evidence.iter().map(|&e| sentence(facts[e], 0)).collect();
            EvidenceRecord {
                id: format!("ev-{seed}-{i}"),
                claim: claim.join(" "),
                section: section.join(" "),
                evidence,
            }
        })
        .collect()
}
