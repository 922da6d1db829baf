//! Corpus ingestion, deduplication, split construction and label statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_whitespace;
use crate::types::{
    map_raw_error_labels, write_atomic, ErrorType, LabelVector, Origin, Sample, SystemCategory,
    NUM_ERROR_TYPES,
};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupReport {
    /// Ids of dropped duplicates.
    pub removed: Vec<String>,
    /// Ids of dropped duplicates whose labels differed from the kept sample.
    pub conflicts: Vec<String>,
}

fn pair_key(s: &Sample) -> (String, String) {
    (
        normalize_whitespace(&s.document),
        normalize_whitespace(&s.summary),
    )
}

/// Keeps the first sample of every (document, summary) pair, comparing
/// whitespace-normalized text.
pub fn dedup(samples: Vec<Sample>) -> (Vec<Sample>, DedupReport) {
    let mut seen: HashMap<(String, String), LabelVector> = HashMap::new();
    let mut report = DedupReport::default();
    let mut kept = Vec::with_capacity(samples.len());
    for s in samples {
        match seen.get(&pair_key(&s)) {
            Some(labels) => {
                if *labels != s.labels {
                    log::warn!(
                        "duplicate {} has labels {} but the kept copy has {}",
                        s.id,
                        s.labels,
                        labels
                    );
                    report.conflicts.push(s.id.clone());
                }
                report.removed.push(s.id);
            }
            None => {
                seen.insert(pair_key(&s), s.labels);
                kept.push(s);
            }
        }
    }
    (kept, report)
}

/// Ids per split, plus training samples removed for sharing a test document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub removed_overlap: Vec<String>,
}

impl SplitManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::parse("split manifest", e))?;
        write_atomic(path, format!("{text}\n").as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub manifest: SplitManifest,
}

impl Split {
    fn from_parts(
        train: Vec<Sample>,
        validation: Vec<Sample>,
        test: Vec<Sample>,
        removed: Vec<String>,
    ) -> Self {
        let ids = |v: &[Sample]| v.iter().map(|s| s.id.clone()).collect();
        let manifest = SplitManifest {
            train: ids(&train),
            validation: ids(&validation),
            test: ids(&test),
            removed_overlap: removed,
        };
        Self {
            train,
            validation,
            test,
            manifest,
        }
    }

    /// Selects samples by the ids of a manifest, in manifest order.
    pub fn from_manifest(samples: &[Sample], manifest: &SplitManifest) -> Result<Self> {
        let by_id: HashMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
        let pick = |ids: &[String]| -> Result<Vec<Sample>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|s| (*s).clone())
                        .ok_or_else(|| Error::Split(format!("manifest id {id} not in corpus")))
                })
                .collect()
        };
        Ok(Self {
            train: pick(&manifest.train)?,
            validation: pick(&manifest.validation)?,
            test: pick(&manifest.test)?,
            manifest: manifest.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    pub const AGGREFACT: SplitSizes = SplitSizes {
        train: 3689,
        validation: 300,
        test: 500,
    };

    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }
}

/// Seeded shuffle, then consecutive train / validation / test blocks.
pub fn make_random_split(samples: &[Sample], sizes: SplitSizes, seed: u64) -> Result<Split> {
    if sizes.total() != samples.len() {
        return Err(Error::Split(format!(
            "split sizes {}/{}/{} sum to {}, corpus has {} samples",
            sizes.train,
            sizes.validation,
            sizes.test,
            sizes.total(),
            samples.len()
        )));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |r: std::ops::Range<usize>| -> Vec<Sample> {
        order[r].iter().map(|&i| samples[i].clone()).collect()
    };
    let a = sizes.train;
    let b = a + sizes.validation;
    Ok(Split::from_parts(
        take(0..a),
        take(a..b),
        take(b..samples.len()),
        Vec::new(),
    ))
}

fn same_system(sample: &Sample, system: &str) -> bool {
    sample
        .system
        .as_deref()
        .is_some_and(|s| s.trim().eq_ignore_ascii_case(system.trim()))
}

/// Test set: every sample of `holdout_system`. The rest is shuffled into
/// `validation_size` validation samples and training; training samples whose
/// document also occurs in the test set are then removed.
pub fn make_challenging_split(
    samples: &[Sample],
    holdout_system: &str,
    validation_size: usize,
    seed: u64,
) -> Result<Split> {
    let (test, rest): (Vec<&Sample>, Vec<&Sample>) =
        samples.iter().partition(|s| same_system(s, holdout_system));
    if test.is_empty() {
        return Err(Error::Split(format!(
            "no sample generated by system {holdout_system:?}"
        )));
    }
    if validation_size > rest.len() {
        return Err(Error::Split(format!(
            "validation size {validation_size} exceeds the {} non-holdout samples",
            rest.len()
        )));
    }
    let mut order: Vec<usize> = (0..rest.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let validation: Vec<Sample> = order[..validation_size]
        .iter()
        .map(|&i| rest[i].clone())
        .collect();
    let test_docs: HashSet<String> = test
        .iter()
        .map(|s| normalize_whitespace(&s.document))
        .collect();
    let mut train = Vec::new();
    let mut removed = Vec::new();
    for &i in &order[validation_size..] {
        let s = rest[i];
        if test_docs.contains(&normalize_whitespace(&s.document)) {
            removed.push(s.id.clone());
        } else {
            train.push(s.clone());
        }
    }
    if !removed.is_empty() {
        log::info!(
            "removed {} training samples sharing a document with the test set",
            removed.len()
        );
    }
    let test = test.into_iter().cloned().collect();
    Ok(Split::from_parts(train, validation, test, removed))
}

/// Label and system-category counts per source dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub samples: usize,
    /// Origin → positives per error type.
    pub error_types: BTreeMap<String, [usize; NUM_ERROR_TYPES]>,
    /// Origin → samples per category in `SystemCategory::KNOWN` order.
    pub categories: BTreeMap<String, [usize; 4]>,
}

pub fn corpus_stats(samples: &[Sample]) -> CorpusStats {
    let mut stats = CorpusStats {
        samples: samples.len(),
        ..Default::default()
    };
    for origin in Origin::KNOWN {
        stats
            .error_types
            .insert(origin.as_str().into(), [0; NUM_ERROR_TYPES]);
        stats.categories.insert(origin.as_str().into(), [0; 4]);
    }
    for s in samples {
        let key = s.origin.as_str().to_string();
        let row = stats.error_types.entry(key.clone()).or_default();
        for ty in s.labels.error_types() {
            row[ty.index()] += 1;
        }
        if let Some(c) = SystemCategory::KNOWN
            .iter()
            .position(|&c| c == s.system_category)
        {
            stats.categories.entry(key).or_default()[c] += 1;
        }
    }
    stats
}

impl CorpusStats {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "Source");
        for ty in ErrorType::ALL {
            let _ = write!(out, "{:>10}", ty.short_name());
        }
        out.push('\n');
        for (origin, row) in &self.error_types {
            let _ = write!(out, "{origin:<8}");
            for n in row {
                let _ = write!(out, "{n:>10}");
            }
            out.push('\n');
        }
        out.push('\n');
        let _ = write!(out, "{:<8}", "Source");
        for c in SystemCategory::KNOWN {
            let _ = write!(out, "{:>10}", c.as_str());
        }
        out.push('\n');
        for (origin, row) in &self.categories {
            let _ = write!(out, "{origin:<8}");
            for n in row {
                let _ = write!(out, "{n:>10}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawFormat {
    Jsonl,
    Csv,
}

impl RawFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => RawFormat::Csv,
            _ => RawFormat::Jsonl,
        }
    }
}

/// Source field names of a raw corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub document: String,
    pub summary: String,
    /// Raw error tags: a list, or a string split on `label_separator`.
    pub labels: String,
    pub label_separator: String,
    pub system_category: Option<String>,
    pub origin: Option<String>,
    pub system: Option<String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            document: "doc".into(),
            summary: "summary".into(),
            labels: "labels".into(),
            label_separator: ",".into(),
            system_category: Some("model_type".into()),
            origin: Some("origin".into()),
            system: Some("model_name".into()),
        }
    }
}

const NO_ERROR_TAGS: [&str; 5] = ["", "correct", "none", "no error", "no-error"];

fn is_no_error_tag(tag: &str) -> bool {
    let t = tag.trim().to_ascii_lowercase();
    NO_ERROR_TAGS.contains(&t.as_str())
}

fn labels_from_tags(tags: &[String]) -> Result<LabelVector> {
    map_raw_error_labels(tags.iter().filter(|t| !is_no_error_tag(t)))
}

fn value_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn raw_sample(
    get: &dyn Fn(&str) -> Option<String>,
    tags: Vec<String>,
    map: &FieldMap,
    row: usize,
) -> Result<Sample> {
    let id = get(&map.id)
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| format!("row-{row}"));
    let field = |name: &str| {
        get(name).ok_or_else(|| Error::InvalidSample {
            id: id.clone(),
            reason: format!("missing field {name:?}"),
        })
    };
    let mut s = Sample::new(
        id.clone(),
        field(&map.document)?,
        field(&map.summary)?,
        labels_from_tags(&tags).map_err(|e| Error::InvalidSample {
            id: id.clone(),
            reason: e.to_string(),
        })?,
    );
    if let Some(c) = map.system_category.as_deref().and_then(get) {
        s.system_category = SystemCategory::parse_lenient(&c);
    }
    if let Some(o) = map.origin.as_deref().and_then(get) {
        s.origin = Origin::parse_lenient(&o);
    }
    s.system = map
        .system
        .as_deref()
        .and_then(get)
        .filter(|x| !x.trim().is_empty());
    s.validate()?;
    Ok(s)
}

fn split_tags(text: &str, sep: &str) -> Vec<String> {
    if sep.is_empty() {
        return vec![text.to_string()];
    }
    text.split(sep).map(|t| t.trim().to_string()).collect()
}

/// Reads a raw annotated corpus and maps it onto samples.
pub fn read_raw_corpus(path: &Path, format: RawFormat, map: &FieldMap) -> Result<Vec<Sample>> {
    match format {
        RawFormat::Jsonl => {
            let rows: Vec<serde_json::Map<String, serde_json::Value>> =
                crate::types::read_jsonl(path)?;
            rows.iter()
                .enumerate()
                .map(|(i, row)| {
                    let get = |k: &str| row.get(k).map(value_text);
                    let tags = match row.get(&map.labels) {
                        Some(serde_json::Value::Array(a)) => a.iter().map(value_text).collect(),
                        Some(v) => split_tags(&value_text(v), &map.label_separator),
                        None => Vec::new(),
                    };
                    raw_sample(&get, tags, map, i)
                })
                .collect()
        }
        RawFormat::Csv => {
            let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::parse(path.display().to_string(), format!("{other:?}")),
            })?;
            let headers = reader
                .headers()
                .map_err(|e| Error::parse(path.display().to_string(), e))?
                .clone();
            let mut out = Vec::new();
            for (i, rec) in reader.records().enumerate() {
                let rec =
                    rec.map_err(|e| Error::parse(format!("{} row {}", path.display(), i + 1), e))?;
                let get = |k: &str| {
                    headers
                        .iter()
                        .position(|h| h == k)
                        .and_then(|j| rec.get(j))
                        .map(str::to_string)
                };
                let tags = get(&map.labels)
                    .map(|t| split_tags(&t, &map.label_separator))
                    .unwrap_or_default();
                out.push(raw_sample(&get, tags, map, i)?);
            }
            Ok(out)
        }
    }
}
