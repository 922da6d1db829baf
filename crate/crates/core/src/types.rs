//! Error typology, label vectors, samples and semantic frames.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of fine-grained error types.
pub const NUM_ERROR_TYPES: usize = 4;

/// Fine-grained factual error types, in canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    ExtrinsicNP,
    IntrinsicNP,
    ExtrinsicPred,
    IntrinsicPred,
}

impl ErrorType {
    pub const ALL: [ErrorType; NUM_ERROR_TYPES] = [
        ErrorType::ExtrinsicNP,
        ErrorType::IntrinsicNP,
        ErrorType::ExtrinsicPred,
        ErrorType::IntrinsicPred,
    ];

    pub fn index(self) -> usize {
        match self {
            ErrorType::ExtrinsicNP => 0,
            ErrorType::IntrinsicNP => 1,
            ErrorType::ExtrinsicPred => 2,
            ErrorType::IntrinsicPred => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<ErrorType> {
        Self::ALL.get(index).copied()
    }

    /// Key used in the JSONL label object.
    pub fn key(self) -> &'static str {
        match self {
            ErrorType::ExtrinsicNP => "extrinsic_np",
            ErrorType::IntrinsicNP => "intrinsic_np",
            ErrorType::ExtrinsicPred => "extrinsic_pred",
            ErrorType::IntrinsicPred => "intrinsic_pred",
        }
    }

    /// Short column header used in printed tables.
    pub fn short_name(self) -> &'static str {
        match self {
            ErrorType::ExtrinsicNP => "Ex.NP",
            ErrorType::IntrinsicNP => "In.NP",
            ErrorType::ExtrinsicPred => "Ex.Pred",
            ErrorType::IntrinsicPred => "In.Pred",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One bit per [`ErrorType`]. All zeros means the summary is consistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelVector {
    bits: [bool; NUM_ERROR_TYPES],
}

impl LabelVector {
    pub const NO_ERROR: LabelVector = LabelVector {
        bits: [false; NUM_ERROR_TYPES],
    };

    pub fn new(bits: [bool; NUM_ERROR_TYPES]) -> Self {
        Self { bits }
    }

    /// Builds a vector from the low four bits of `mask` (bit i = error type i).
    pub fn from_mask(mask: u8) -> Self {
        let mut bits = [false; NUM_ERROR_TYPES];
        for (i, b) in bits.iter_mut().enumerate() {
            *b = mask & (1 << i) != 0;
        }
        Self { bits }
    }

    pub fn mask(&self) -> u8 {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((b as u8) << i))
    }

    pub fn get(&self, ty: ErrorType) -> bool {
        self.bits[ty.index()]
    }

    pub fn set(&mut self, ty: ErrorType, value: bool) {
        self.bits[ty.index()] = value;
    }

    pub fn bits(&self) -> [bool; NUM_ERROR_TYPES] {
        self.bits
    }

    pub fn is_no_error(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn union(&self, other: &LabelVector) -> LabelVector {
        let mut bits = self.bits;
        for (b, o) in bits.iter_mut().zip(other.bits) {
            *b |= o;
        }
        LabelVector { bits }
    }

    pub fn as_f64(&self) -> [f64; NUM_ERROR_TYPES] {
        self.bits.map(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn error_types(&self) -> impl Iterator<Item = ErrorType> + '_ {
        ErrorType::ALL.into_iter().filter(|t| self.get(*t))
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_no_error() {
            return f.write_str("No Error");
        }
        let names: Vec<_> = self.error_types().map(|t| t.short_name()).collect();
        f.write_str(&names.join(", "))
    }
}

#[derive(Serialize, Deserialize)]
struct LabelObject {
    extrinsic_np: u8,
    intrinsic_np: u8,
    extrinsic_pred: u8,
    intrinsic_pred: u8,
}

impl Serialize for LabelVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let [a, b, c, d] = self.bits.map(u8::from);
        LabelObject {
            extrinsic_np: a,
            intrinsic_np: b,
            extrinsic_pred: c,
            intrinsic_pred: d,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LabelVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let obj = LabelObject::deserialize(deserializer)?;
        let raw = [
            obj.extrinsic_np,
            obj.intrinsic_np,
            obj.extrinsic_pred,
            obj.intrinsic_pred,
        ];
        let mut bits = [false; NUM_ERROR_TYPES];
        for (i, v) in raw.into_iter().enumerate() {
            bits[i] = match v {
                0 => false,
                1 => true,
                other => {
                    return Err(serde::de::Error::custom(format!(
                        "label `{}` must be 0 or 1, got {other}",
                        ErrorType::ALL[i].key()
                    )))
                }
            };
        }
        Ok(LabelVector { bits })
    }
}

/// Raw annotation tags found in source corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RawErrorTag {
    Fine(ErrorType),
    IntrinsicEntireSentence,
    ExtrinsicEntireSentence,
    EntireSentence,
}

impl FromStr for RawErrorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '_' || c == ' ' { '-' } else { c })
            .collect();
        let tag = match norm.as_str() {
            "extrinsic-np" | "extrinsic-noun-phrase" => RawErrorTag::Fine(ErrorType::ExtrinsicNP),
            "intrinsic-np" | "intrinsic-noun-phrase" => RawErrorTag::Fine(ErrorType::IntrinsicNP),
            "extrinsic-pred" | "extrinsic-predicate" => RawErrorTag::Fine(ErrorType::ExtrinsicPred),
            "intrinsic-pred" | "intrinsic-predicate" => RawErrorTag::Fine(ErrorType::IntrinsicPred),
            "intrinsic-entire-sentence" => RawErrorTag::IntrinsicEntireSentence,
            "extrinsic-entire-sentence" => RawErrorTag::ExtrinsicEntireSentence,
            "entire-sentence" => RawErrorTag::EntireSentence,
            _ => return Err(Error::UnknownErrorTag(s.to_string())),
        };
        Ok(tag)
    }
}

impl RawErrorTag {
    pub fn labels(self) -> LabelVector {
        use ErrorType::*;
        let mut v = LabelVector::NO_ERROR;
        match self {
            RawErrorTag::Fine(t) => v.set(t, true),
            RawErrorTag::IntrinsicEntireSentence => {
                v.set(IntrinsicNP, true);
                v.set(IntrinsicPred, true);
            }
            RawErrorTag::ExtrinsicEntireSentence => {
                v.set(ExtrinsicNP, true);
                v.set(ExtrinsicPred, true);
            }
            RawErrorTag::EntireSentence => v = LabelVector::from_mask(0b1111),
        }
        v
    }
}

/// Maps raw corpus tags onto the four fine-grained types, taking the union
/// over all tags. Entire-sentence tags expand to every type they cover.
pub fn map_raw_error_labels<I, S>(raw_tags: I) -> Result<LabelVector>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    raw_tags
        .into_iter()
        .try_fold(LabelVector::NO_ERROR, |acc, tag| {
            let tag: RawErrorTag = tag.as_ref().parse()?;
            Ok(acc.union(&tag.labels()))
        })
}

/// Half-open word-index range `[start, end)`, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(deserializer)?;
        Ok(Span { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameSource {
    Document,
    Summary,
}

/// Role tag given to the whole-sentence pseudo-frame.
pub const FULLSENT_ROLE: &str = "FULLSENT";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Argument {
    pub role: String,
    pub span: Span,
}

/// Role tag of an ordinary verbal predicate.
pub const PREDICATE_ROLE: &str = "V";

/// One predicate with its role-labelled arguments. Spans are word indices
/// relative to the frame's sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticFrame {
    pub predicate: Span,
    /// `V` for verbal predicates, `FULLSENT` for the whole-sentence fallback.
    pub predicate_role: String,
    pub arguments: Vec<Argument>,
    pub sentence_index: usize,
    pub source: FrameSource,
}

impl SemanticFrame {
    /// Whole-sentence fallback frame for text in which no predicate was found.
    pub fn full_sentence(sentence_index: usize, len: usize, source: FrameSource) -> Self {
        Self {
            predicate: Span::new(0, len),
            predicate_role: FULLSENT_ROLE.to_string(),
            arguments: Vec::new(),
            sentence_index,
            source,
        }
    }

    pub fn is_full_sentence(&self) -> bool {
        self.predicate_role == FULLSENT_ROLE
    }

    /// Sorted, deduplicated word indices covered by the predicate and arguments.
    pub fn word_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .predicate
            .indices()
            .chain(self.arguments.iter().flat_map(|a| a.span.indices()))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// Number of words in the frame.
    pub fn token_count(&self) -> usize {
        self.word_indices().len()
    }

    pub fn validate(&self, sentence_len: usize) -> Result<()> {
        if self.predicate.is_empty() {
            return Err(Error::InvalidFrame("empty predicate span".into()));
        }
        if self.predicate.end > sentence_len {
            return Err(Error::InvalidFrame(format!(
                "predicate {:?} exceeds sentence length {sentence_len}",
                self.predicate
            )));
        }
        for arg in &self.arguments {
            if arg.span.is_empty() {
                return Err(Error::InvalidFrame(format!("empty span for {}", arg.role)));
            }
            if arg.span.end > sentence_len {
                return Err(Error::InvalidFrame(format!(
                    "argument {} {:?} exceeds sentence length {sentence_len}",
                    arg.role, arg.span
                )));
            }
            if arg.span.overlaps(&self.predicate) {
                return Err(Error::InvalidFrame(format!(
                    "argument {} overlaps the predicate",
                    arg.role
                )));
            }
        }
        Ok(())
    }
}

/// Era/architecture bucket of the system that produced a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum SystemCategory {
    Sota,
    Xformer,
    Old,
    Ref,
    #[default]
    Unknown,
}

impl SystemCategory {
    pub const KNOWN: [SystemCategory; 4] = [
        SystemCategory::Sota,
        SystemCategory::Xformer,
        SystemCategory::Old,
        SystemCategory::Ref,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemCategory::Sota => "SOTA",
            SystemCategory::Xformer => "XFORMER",
            SystemCategory::Old => "OLD",
            SystemCategory::Ref => "REF",
            SystemCategory::Unknown => "Unknown",
        }
    }

    /// Lenient parse; anything unrecognised becomes `Unknown`.
    pub fn parse_lenient(s: &str) -> Self {
        match s.trim().to_ascii_uppercase().as_str() {
            "SOTA" => SystemCategory::Sota,
            "XFORMER" => SystemCategory::Xformer,
            "OLD" => SystemCategory::Old,
            "REF" | "REFERENCE" => SystemCategory::Ref,
            _ => SystemCategory::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Origin {
    CnnDm,
    XSum,
    #[default]
    Other,
}

impl Origin {
    pub const KNOWN: [Origin; 2] = [Origin::CnnDm, Origin::XSum];

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::CnnDm => "CNNDM",
            Origin::XSum => "XSum",
            Origin::Other => "Other",
        }
    }

    pub fn parse_lenient(s: &str) -> Self {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "cnndm" | "cnndailymail" | "cnn" => Origin::CnnDm,
            "xsum" => Origin::XSum,
            _ => Origin::Other,
        }
    }
}

macro_rules! lenient_string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(
                deserializer: D,
            ) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                Ok(<$ty>::parse_lenient(&s))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

lenient_string_serde!(SystemCategory);
lenient_string_serde!(Origin);

/// A document-summary pair with its gold fine-grained labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub document: String,
    pub summary: String,
    pub labels: LabelVector,
    #[serde(default)]
    pub system_category: SystemCategory,
    #[serde(default)]
    pub origin: Origin,
    /// Name of the summarization system, when the corpus records it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        document: impl Into<String>,
        summary: impl Into<String>,
        labels: LabelVector,
    ) -> Self {
        Self {
            id: id.into(),
            document: document.into(),
            summary: summary.into(),
            labels,
            system_category: SystemCategory::Unknown,
            origin: Origin::Other,
            system: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Error::InvalidSample {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.document.trim().is_empty() {
            return Err(fail("empty document"));
        }
        if self.summary.trim().is_empty() {
            return Err(fail("empty summary"));
        }
        Ok(())
    }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), lineno + 1), e))?;
        out.push(value);
    }
    Ok(out)
}

/// Writes one JSON value per line, atomically (temp file then rename).
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)
            .map_err(|e| Error::parse(path.display().to_string(), e))?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loads and validates a sample corpus, rejecting duplicate ids.
pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let samples: Vec<Sample> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for s in &samples {
        s.validate()?;
        if !seen.insert(s.id.as_str()) {
            return Err(Error::InvalidSample {
                id: s.id.clone(),
                reason: "duplicate id".into(),
            });
        }
    }
    Ok(samples)
}
