use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::TokenizedText;
use crate::types::{
    read_jsonl, write_jsonl, Argument, FrameSource, Sample, SemanticFrame, Span, PREDICATE_ROLE,
};

use super::{extract_frames, SrlBackend};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgRecord {
    pub role: String,
    pub span: Span,
}

fn default_predicate_role() -> String {
    PREDICATE_ROLE.to_string()
}

fn is_default_role(role: &str) -> bool {
    role == PREDICATE_ROLE
}

/// Wire form of one frame. Spans are sentence-relative word indices, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    #[serde(default)]
    pub sentence: usize,
    pub predicate: Span,
    #[serde(
        default = "default_predicate_role",
        skip_serializing_if = "is_default_role"
    )]
    pub predicate_role: String,
    #[serde(default)]
    pub args: Vec<ArgRecord>,
}

impl FrameRecord {
    pub fn from_frame(frame: &SemanticFrame) -> Self {
        Self {
            sentence: frame.sentence_index,
            predicate: frame.predicate,
            predicate_role: frame.predicate_role.clone(),
            args: frame
                .arguments
                .iter()
                .map(|a| ArgRecord {
                    role: a.role.clone(),
                    span: a.span,
                })
                .collect(),
        }
    }

    pub fn into_frame(self, source: FrameSource) -> SemanticFrame {
        SemanticFrame {
            predicate: self.predicate,
            predicate_role: self.predicate_role,
            arguments: self
                .args
                .into_iter()
                .map(|a| Argument {
                    role: a.role,
                    span: a.span,
                })
                .collect(),
            sentence_index: self.sentence,
            source,
        }
    }
}

/// One line of the frame sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub sample_id: String,
    pub source: FrameSource,
    pub frames: Vec<FrameRecord>,
}

/// Frames keyed by sample id and source.
#[derive(Debug, Clone, Default)]
pub struct FrameIndex {
    map: HashMap<(String, FrameSource), Vec<SemanticFrame>>,
}

impl FrameIndex {
    pub fn insert(&mut self, sample_id: &str, source: FrameSource, frames: Vec<SemanticFrame>) {
        self.map.insert((sample_id.to_string(), source), frames);
    }

    pub fn get(&self, sample_id: &str, source: FrameSource) -> Option<&[SemanticFrame]> {
        self.map
            .get(&(sample_id.to_string(), source))
            .map(Vec::as_slice)
    }

    /// Document and summary frames for a sample, or an error naming what is missing.
    pub fn pair(&self, sample_id: &str) -> Result<(&[SemanticFrame], &[SemanticFrame])> {
        let missing = |src: &str| Error::InvalidSample {
            id: sample_id.to_string(),
            reason: format!("no {src} frames in sidecar"),
        };
        Ok((
            self.get(sample_id, FrameSource::Document)
                .ok_or_else(|| missing("document"))?,
            self.get(sample_id, FrameSource::Summary)
                .ok_or_else(|| missing("summary"))?,
        ))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn from_records(records: Vec<SidecarRecord>) -> Self {
        let mut index = FrameIndex::default();
        for rec in records {
            let source = rec.source;
            let frames = rec
                .frames
                .into_iter()
                .map(|f| f.into_frame(source))
                .collect();
            index.insert(&rec.sample_id, source, frames);
        }
        index
    }
}

pub fn read_sidecar(path: &Path) -> Result<FrameIndex> {
    Ok(FrameIndex::from_records(read_jsonl(path)?))
}

pub fn write_sidecar(path: &Path, records: &[SidecarRecord]) -> Result<()> {
    write_jsonl(path, records)
}

/// Extracts frames for every sample: one document record and one summary
/// record per sample, in corpus order. Returns the records and warnings.
pub fn extract_corpus(
    samples: &[Sample],
    backend: &dyn SrlBackend,
) -> Result<(Vec<SidecarRecord>, Vec<String>)> {
    let mut records = Vec::with_capacity(samples.len() * 2);
    let mut warnings = Vec::new();
    for sample in samples {
        for (source, text) in [
            (FrameSource::Document, &sample.document),
            (FrameSource::Summary, &sample.summary),
        ] {
            let tokens = TokenizedText::new(text);
            let ex = extract_frames(&tokens, source, backend).map_err(|e| match e {
                Error::Backend { backend, reason } => Error::Backend {
                    backend,
                    reason: format!("sample {}: {reason}", sample.id),
                },
                other => other,
            })?;
            warnings.extend(
                ex.warnings
                    .into_iter()
                    .map(|w| format!("{} ({source:?}): {w}", sample.id)),
            );
            records.push(SidecarRecord {
                sample_id: sample.id.clone(),
                source,
                frames: ex.frames.iter().map(FrameRecord::from_frame).collect(),
            });
        }
    }
    Ok((records, warnings))
}
